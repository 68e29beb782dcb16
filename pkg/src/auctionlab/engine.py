"""Deterministic auction execution: drafts, single-item drafts, sequential item auctions.

Bid plans are queried with the public history only (announcements of winner,
winning bid and bundle).  A plain zero bid expresses non-participation: a
round whose maximum bid is (0, no plus) sells nothing, ending a draft and
skipping the item in a sequential auction.  Plus-bids beat the same amount
but pay it, so "just above" best responses exist on a discrete grid.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Optional, Protocol, Sequence

from .exactnum import format_rational, parse_rational
from .valuations import ItemSet, Valuation, mask_of

DRAFT = "draft"
SINGLE_ITEM_DRAFT = "single_item_draft"
SEQUENTIAL_ITEM = "sequential_item"


class AuctionError(RuntimeError):
    """A plan misbehaved or a draft failed to make progress."""


@dataclass(frozen=True, order=True)
class Bid:
    """A bid amount with a "just above" marker; payment is the amount either way."""

    amount: Fraction
    plus: bool = False

    def __init__(self, amount, plus: bool = False):
        amount = parse_rational(amount)
        if amount < 0:
            raise ValueError("bids must be nonnegative")
        object.__setattr__(self, "amount", amount)
        object.__setattr__(self, "plus", bool(plus))

    def __str__(self) -> str:
        return format_rational(self.amount) + ("+" if self.plus else "")


ZERO_BID = Bid(0)


@dataclass(frozen=True)
class MechanismConfig:
    kind: str
    n: int
    m: int
    tie_break: tuple[int, ...] = ()
    item_order: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in (DRAFT, SINGLE_ITEM_DRAFT, SEQUENTIAL_ITEM):
            raise ValueError(f"unknown mechanism kind: {self.kind}")
        tie = tuple(self.tie_break) if self.tie_break else tuple(range(self.n))
        if sorted(tie) != list(range(self.n)):
            raise ValueError("tie_break must be a permutation of the bidders")
        object.__setattr__(self, "tie_break", tie)
        if self.kind == SEQUENTIAL_ITEM:
            order = tuple(self.item_order) if self.item_order else tuple(range(self.m))
            if sorted(order) != list(range(self.m)):
                raise ValueError("item_order must be a permutation of the items")
            object.__setattr__(self, "item_order", order)
        elif self.item_order is not None:
            raise ValueError("item_order only applies to sequential_item")


@dataclass(frozen=True)
class Announcement:
    """Public per-round information: who won, at what bid, taking which bundle."""

    winner: int
    bid: Bid
    bundle: ItemSet


@dataclass(frozen=True)
class RoundRecord:
    t: int
    winner: int
    bid: Bid
    bundle: ItemSet
    price: Fraction  # payment of this round


class History:
    """The public transcript visible to plans, with derived views."""

    __slots__ = ("config", "announcements", "_remaining", "_bundles")

    def __init__(self, config: MechanismConfig, announcements: Sequence[Announcement] = ()):
        self.config = config
        self.announcements = tuple(announcements)
        remaining = set(range(config.m))
        bundles = [set() for _ in range(config.n)]
        for a in self.announcements:
            remaining -= a.bundle
            bundles[a.winner] |= a.bundle
        self._remaining = frozenset(remaining)
        self._bundles = tuple(frozenset(b) for b in bundles)

    @property
    def round(self) -> int:
        return len(self.announcements)

    @property
    def remaining(self) -> ItemSet:
        return self._remaining

    def bundle(self, i: int) -> ItemSet:
        return self._bundles[i]

    def payment(self, i: int) -> Fraction:
        total = Fraction(0)
        for a in self.announcements:
            if a.winner == i:
                total += round_price(self.config, a)
        return total

    def won_any(self, i: int) -> bool:
        return any(a.winner == i for a in self.announcements)

    def extended(self, a: Announcement) -> "History":
        return History(self.config, self.announcements + (a,))

    def key(self) -> str:
        """Canonical text form, one transcript line per round."""
        return ";".join(transcript_line(t, a, round_price(self.config, a))
                        for t, a in enumerate(self.announcements))


def round_price(config: MechanismConfig, a: Announcement) -> Fraction:
    if config.kind == DRAFT:
        return a.bid.amount * len(a.bundle)
    return a.bid.amount


def transcript_line(t: int, a: Announcement, price: Fraction) -> str:
    return (
        f"{t} {a.winner} {format_rational(a.bid.amount)} "
        f"{int(a.bid.plus)} {mask_of(a.bundle)} {format_rational(price)}"
    )


class BidPlan(Protocol):
    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        ...


@dataclass(frozen=True)
class MixedPlan:
    """Finite-support randomization over plans, resolved once per run by seed."""

    plans: tuple
    weights: tuple[Fraction, ...]

    def resolve(self, rng: random.Random):
        denom = 1
        for w in self.weights:
            denom = denom * w.denominator // gcd(denom, w.denominator)
        scaled = [int(w * denom) for w in self.weights]
        pick = rng.randrange(sum(scaled))
        acc = 0
        for plan, s in zip(self.plans, scaled):
            acc += s
            if pick < acc:
                return plan
        return self.plans[-1]


@dataclass(frozen=True)
class Outcome:
    transcript: tuple[RoundRecord, ...]
    allocation: tuple[ItemSet, ...]
    payments: tuple[Fraction, ...]
    item_prices: tuple[Fraction, ...]  # 0 for unsold items

    @property
    def sold(self) -> ItemSet:
        return frozenset().union(*self.allocation) if self.allocation else frozenset()

    def welfare(self, profile: Sequence[Valuation]) -> Fraction:
        return sum((v.value(s) for v, s in zip(profile, self.allocation)), Fraction(0))


def run_auction(
    config: MechanismConfig, plans: Sequence[BidPlan], rng_seed: Optional[int] = None
) -> Outcome:
    """Run one auction to completion under a deterministic bid-plan profile.

    Draft: rounds continue while items remain and someone signals intent (any
    bid above plain zero).  The winner takes her demanded bundle and pays her
    bid per item; a positive-bid winner demanding nothing is a recorded no-op,
    guarded by a 2m round cap.  Single-item draft: the demanded set must be a
    singleton.  Sequential item: one round per item in the configured order,
    winner pays her bid.
    """
    if len(plans) != config.n:
        raise ValueError("need one plan per bidder")
    if any(isinstance(p, MixedPlan) for p in plans):
        rng = random.Random(rng_seed)
        plans = [p.resolve(rng) if isinstance(p, MixedPlan) else p for p in plans]
    records: list[RoundRecord] = []
    hist = History(config)
    payments = [Fraction(0)] * config.n
    prices = [Fraction(0)] * config.m
    priority = {b: r for r, b in enumerate(config.tie_break)}

    def winner_of(bids: list[Bid]) -> Optional[int]:
        top = max(bids)
        if top == ZERO_BID:
            return None
        return min((i for i in range(config.n) if bids[i] == top), key=priority.__getitem__)

    if config.kind == SEQUENTIAL_ITEM:
        for t, item in enumerate(config.item_order):
            actions = [plan.act(i, hist) for i, plan in enumerate(plans)]
            win = winner_of([bid for bid, _ in actions])
            if win is None:
                continue  # item goes unsold
            bid = actions[win][0]
            bundle = frozenset([item])
            payments[win] += bid.amount
            prices[item] = bid.amount
            records.append(RoundRecord(len(records), win, bid, bundle, bid.amount))
            hist = hist.extended(Announcement(win, bid, bundle))
        return _finish(config, records, payments, prices)

    cap = 2 * config.m
    rounds = 0
    while hist.remaining:
        if rounds >= cap:
            raise AuctionError(f"draft exceeded {cap} rounds without selling out")
        rounds += 1
        actions = [plan.act(i, hist) for i, plan in enumerate(plans)]
        for i, (_, demand) in enumerate(actions):
            if not frozenset(demand) <= hist.remaining:
                raise AuctionError(
                    f"bidder {i} demanded unavailable items {sorted(set(demand) - hist.remaining)}"
                )
        win = winner_of([bid for bid, _ in actions])
        if win is None:
            break  # nobody signals intent; remaining items go unsold
        bid, demand = actions[win]
        bundle = frozenset(demand)
        if config.kind == SINGLE_ITEM_DRAFT and len(bundle) != 1:
            raise AuctionError("single-item draft winners must take exactly one item")
        price = bid.amount * len(bundle)
        payments[win] += price
        for j in bundle:
            prices[j] = bid.amount
        records.append(RoundRecord(len(records), win, bid, bundle, price))
        hist = hist.extended(Announcement(win, bid, bundle))
    return _finish(config, records, payments, prices)


def _finish(config, records, payments, prices) -> Outcome:
    bundles = [set() for _ in range(config.n)]
    for r in records:
        bundles[r.winner] |= r.bundle
    return Outcome(
        transcript=tuple(records),
        allocation=tuple(frozenset(b) for b in bundles),
        payments=tuple(payments),
        item_prices=tuple(prices),
    )


def utility(outcome: Outcome, i: int, v: Valuation) -> Fraction:
    """Quasi-linear payoff: value of the final bundle minus total payment."""
    return v.value(outcome.allocation[i]) - outcome.payments[i]


def revenue(outcome: Outcome) -> Fraction:
    return sum(outcome.payments, Fraction(0))


def transcript_export(outcome: Outcome) -> str:
    """Line-oriented transcript: `t winner amount plus bundle_bitmask price`."""
    return "\n".join(
        transcript_line(r.t, Announcement(r.winner, r.bid, r.bundle), r.price)
        for r in outcome.transcript
    )
