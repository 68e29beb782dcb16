"""Bid plans: library rules, scripted decision tables, and deviation constructions.

Plans are immutable values; ``act(i, history)`` must be a pure function of the
public history, so every piece of strategy state (units won so far, whether a
deviation has completed) is derived from the transcript on each query.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import Bid, History, ZERO_BID
from .exactnum import parse_rational
from .valuations import ItemSet, Valuation

DROP = (ZERO_BID, frozenset())


@dataclass(frozen=True)
class DropOut:
    """Never participates: plain zero bid, empty demand."""

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        return DROP


@dataclass(frozen=True)
class GreedyDemand:
    """Greedy positive-marginal selection, up to ``limit`` items (None = all)."""

    valuation: Valuation
    limit: Optional[int] = 1

    def demand(self, owned: ItemSet, remaining: ItemSet) -> ItemSet:
        picked: set[int] = set()
        have = set(owned)
        while remaining - picked and (self.limit is None or len(picked) < self.limit):
            best_j, best_gain = None, Fraction(0)
            base = self.valuation.value(frozenset(have))
            for j in sorted(remaining - picked):
                gain = self.valuation.value(frozenset(have | {j})) - base
                if gain > best_gain:
                    best_j, best_gain = j, gain
            if best_j is None:
                break
            picked.add(best_j)
            have.add(best_j)
        return frozenset(picked)


@dataclass(frozen=True)
class ConstantBidPlan:
    """Bid a fixed amount while the selection rule wants something; drop out when satiated."""

    bid: Bid
    rule: GreedyDemand

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        demand = self.rule.demand(history.bundle(i), history.remaining)
        if not demand:
            return DROP
        return self.bid, demand


@dataclass(frozen=True)
class FixedSelectionPlan:
    """Bid a fixed amount for a fixed target set while any of it remains."""

    bid: Bid
    targets: ItemSet
    limit: Optional[int] = None

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        want = frozenset(self.targets) & history.remaining
        if not want:
            return DROP
        if self.limit is not None:
            want = frozenset(sorted(want)[: self.limit])
        return self.bid, want


@dataclass(frozen=True)
class TruthfulMarginal:
    """Bid the best remaining item's marginal value and demand that item."""

    valuation: Valuation

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        owned = history.bundle(i)
        best_j, best_gain = None, Fraction(0)
        for j in sorted(history.remaining):
            gain = self.valuation.marginal(owned, frozenset([j]))
            if gain > best_gain:
                best_j, best_gain = j, gain
        if best_j is None:
            return DROP
        return Bid(best_gain), frozenset([best_j])


@dataclass(frozen=True)
class AfterWinDrop:
    """Play the base plan until the first win, then drop out."""

    base: object

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        if history.won_any(i):
            return DROP
        return self.base.act(i, history)


@dataclass(frozen=True)
class ScriptedPlan:
    """Decision table keyed by the canonical history string, with a fallback plan.

    Used to encode transcript-replay profiles; any history missing from the
    table is delegated to the fallback, so the plan stays total.
    """

    table: tuple[tuple[str, tuple[Bid, ItemSet]], ...]
    fallback: object = DropOut()

    def __init__(self, table, fallback=DropOut()):
        rows = tuple(sorted((k, (bid, frozenset(demand))) for k, (bid, demand) in dict(table).items()))
        object.__setattr__(self, "table", rows)
        object.__setattr__(self, "fallback", fallback)

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        key = history.key()
        for k, action in self.table:
            if k == key:
                bid, demand = action
                return bid, demand & history.remaining
        return self.fallback.act(i, history)


@dataclass(frozen=True)
class UnitDemandDeviation:
    """Chase one target item at half its value without disturbing the path.

    Each round, while the target is unsold and no round has been won: bid the
    larger of the wrapped plan's bid and half the target value, demanding the
    target.  Once the target sells or a round is won, drop out.
    """

    original: object
    target: int
    target_value: Fraction
    half_bid: Bid

    def __init__(self, original, target: int, target_value):
        target_value = parse_rational(target_value)
        if target_value < 0:
            raise ValueError("target value must be nonnegative")
        object.__setattr__(self, "original", original)
        object.__setattr__(self, "target", int(target))
        object.__setattr__(self, "target_value", target_value)
        object.__setattr__(self, "half_bid", Bid(target_value / 2))

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        if self.target not in history.remaining or history.won_any(i):
            return DROP
        original_bid, _ = self.original.act(i, history)
        return max(original_bid, self.half_bid), frozenset([self.target])


def unit_demand_deviation(original, j_star: int, v_star) -> UnitDemandDeviation:
    return UnitDemandDeviation(original, j_star, v_star)


@dataclass(frozen=True)
class CoreDeviation:
    """Complete half the interest set at half the unit value, else mimic the original.

    With s* = ceil(|S|/2) and b* = v_hat/2: while fewer than s* units are held
    and enough units remain, bid max(b*, original bid).  When b* is the larger
    bid, demand exactly the units missing to reach s* (lowest indices first);
    otherwise mirror the original plan's demand.  After reaching s* units the
    plan drops out; when the remaining units cannot complete s*, it reverts to
    the original plan.  Ties go to the original bid, which keeps the public
    history identical to the original run until a completion purchase.
    """

    original: object
    interest: ItemSet
    unit_value: Fraction
    s_star: int
    star_bid: Bid

    def __init__(self, original, interest, unit_value):
        unit_value = parse_rational(unit_value)
        if unit_value < 0:
            raise ValueError("unit value must be nonnegative")
        interest = frozenset(interest)
        object.__setattr__(self, "original", original)
        object.__setattr__(self, "interest", interest)
        object.__setattr__(self, "unit_value", unit_value)
        object.__setattr__(self, "s_star", (len(interest) + 1) // 2)
        object.__setattr__(self, "star_bid", Bid(unit_value / 2))

    def act(self, i: int, history: History) -> tuple[Bid, ItemSet]:
        units_held = len(history.bundle(i) & self.interest)
        if units_held >= self.s_star:
            return DROP
        available = history.remaining & self.interest
        if len(available) < self.s_star - units_held:
            return self.original.act(i, history)
        original_bid, original_demand = self.original.act(i, history)
        if self.star_bid > original_bid:
            take = frozenset(sorted(available)[: self.s_star - units_held])
            return self.star_bid, take
        return original_bid, original_demand


def core_deviation(original, interest, v_hat) -> CoreDeviation:
    return CoreDeviation(original, interest, v_hat)


def first_divergence(t1, t2) -> Optional[int]:
    """Index of the first differing round between two transcripts, None if equal."""
    for idx, (a, b) in enumerate(zip(t1, t2)):
        if (a.winner, a.bid, a.bundle) != (b.winner, b.bid, b.bundle):
            return idx
    if len(t1) != len(t2):
        return min(len(t1), len(t2))
    return None
