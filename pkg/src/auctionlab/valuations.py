"""Valuation classes, welfare optimum, and pointwise-approximation constructors.

All values are exact rationals.  Item sets are frozensets of indices in
``range(m)``; explicit tables are indexed by subset bitmask with bit ``j``
standing for item ``j``.
"""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .exactnum import ScaledLog, ge_product, parse_rational, scaled_log

ItemSet = frozenset


class CapExceeded(RuntimeError):
    """An exhaustive search would exceed its configured size cap."""


class InvalidValuation(ValueError):
    """A valuation violates its structural invariants."""


class ApproxGuaranteeError(RuntimeError):
    """A constructed approximation failed its stated guarantee."""


def _as_fractions(values) -> tuple[Fraction, ...]:
    out = tuple(parse_rational(v) for v in values)
    if any(v < 0 for v in out):
        raise InvalidValuation("values must be nonnegative")
    return out


class Valuation(ABC):
    """A monotone set function over items 0..m-1 with value(empty) = 0."""

    m: int

    @abstractmethod
    def value(self, items: ItemSet) -> Fraction:
        ...

    def _check(self, items: ItemSet) -> ItemSet:
        items = frozenset(items)
        if any(not (0 <= j < self.m) for j in items):
            raise IndexError(f"item index out of range for m={self.m}: {sorted(items)}")
        return items

    def marginal(self, owned: ItemSet, extra: ItemSet) -> Fraction:
        return self.value(frozenset(owned) | frozenset(extra)) - self.value(owned)

    def max_single_value(self) -> Fraction:
        """Largest value of any single item; used by the undominated-strategy filter."""
        return max((self.value(frozenset([j])) for j in range(self.m)), default=Fraction(0))


@dataclass(frozen=True)
class UnitDemand(Valuation):
    """v(T) = max of per-item values over T."""

    values: tuple[Fraction, ...]

    def __init__(self, values: Sequence):
        object.__setattr__(self, "values", _as_fractions(values))

    @property
    def m(self) -> int:
        return len(self.values)

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return max((self.values[j] for j in items), default=Fraction(0))


@dataclass(frozen=True)
class Additive(Valuation):
    """v(T) = sum of per-item values over T."""

    values: tuple[Fraction, ...]

    def __init__(self, values: Sequence):
        object.__setattr__(self, "values", _as_fractions(values))

    @property
    def m(self) -> int:
        return len(self.values)

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return sum((self.values[j] for j in items), Fraction(0))


@dataclass(frozen=True)
class XOS(Valuation):
    """v(T) = max over additive clauses of the clause's sum on T."""

    clauses: tuple[tuple[Fraction, ...], ...]

    def __init__(self, clauses: Sequence[Sequence]):
        if not clauses:
            raise InvalidValuation("XOS needs at least one clause")
        rows = tuple(_as_fractions(c) for c in clauses)
        if len({len(r) for r in rows}) != 1:
            raise InvalidValuation("XOS clauses must share one item count")
        object.__setattr__(self, "clauses", rows)

    @property
    def m(self) -> int:
        return len(self.clauses[0])

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return max(sum((row[j] for j in items), Fraction(0)) for row in self.clauses)


@dataclass(frozen=True)
class ConstraintHomogeneous(Valuation):
    """v(T) = unit_value * |T & interest|."""

    m: int
    interest: ItemSet
    unit_value: Fraction

    def __init__(self, m: int, interest, unit_value):
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "interest", frozenset(interest))
        object.__setattr__(self, "unit_value", parse_rational(unit_value))
        if any(not (0 <= j < m) for j in self.interest):
            raise InvalidValuation("interest set out of range")
        if self.unit_value < 0:
            raise InvalidValuation("unit value must be nonnegative")

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return self.unit_value * len(items & self.interest)


@dataclass(frozen=True)
class ConcaveSymmetric(Valuation):
    """v(T) = f(|T|) for a nondecreasing concave f with f(0) = 0."""

    f: tuple[Fraction, ...]

    def __init__(self, f: Sequence):
        vals = _as_fractions(f)
        if not vals or vals[0] != 0:
            raise InvalidValuation("f(0) must be 0")
        for k in range(1, len(vals)):
            if vals[k] < vals[k - 1]:
                raise InvalidValuation("f must be nondecreasing")
        for k in range(2, len(vals)):
            if vals[k] - vals[k - 1] > vals[k - 1] - vals[k - 2]:
                raise InvalidValuation("f increments must be nonincreasing")
        object.__setattr__(self, "f", vals)

    @property
    def m(self) -> int:
        return len(self.f) - 1

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return self.f[len(items)]


@dataclass(frozen=True)
class ExplicitTable(Valuation):
    """v given by one entry per subset bitmask; optionally tagged subadditive.

    Construction checks v(empty)=0, nonnegativity and monotonicity, and (when
    tagged) subadditivity, all exhaustively.
    """

    m: int
    table: tuple[Fraction, ...]
    subadditive: bool = False

    def __init__(self, m: int, table: Sequence, subadditive: bool = False):
        entries = tuple(parse_rational(v) for v in table)
        if len(entries) != 1 << m:
            raise InvalidValuation(f"table needs {1 << m} entries, got {len(entries)}")
        if entries[0] != 0:
            raise InvalidValuation("value of the empty set must be 0")
        if any(v < 0 for v in entries):
            raise InvalidValuation("values must be nonnegative")
        full = (1 << m) - 1
        for mask in range(1 << m):
            rest = full & ~mask
            j = rest
            while j:
                bit = j & -j
                if entries[mask | bit] < entries[mask]:
                    raise InvalidValuation("table is not monotone")
                j ^= bit
        if subadditive:
            for union in range(1 << m):
                sub = (union - 1) & union
                while sub:
                    if entries[union] > entries[sub] + entries[union & ~sub]:
                        raise InvalidValuation(
                            f"not subadditive at masks {sub:#b}, {union & ~sub:#b}"
                        )
                    sub = (sub - 1) & union
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "table", entries)
        object.__setattr__(self, "subadditive", subadditive)

    def value(self, items: ItemSet) -> Fraction:
        items = self._check(items)
        return self.table[mask_of(items)]


def mask_of(items: ItemSet) -> int:
    out = 0
    for j in items:
        out |= 1 << j
    return out


def set_of(mask: int) -> ItemSet:
    return frozenset(j for j in range(mask.bit_length()) if mask >> j & 1)


Allocation = tuple  # one ItemSet per bidder, pairwise disjoint


@dataclass(frozen=True)
class ApproxResult:
    """A pointwise approximation: beta * approx(target) >= v(target), approx <= v everywhere."""

    approx: Valuation
    beta: Union[Fraction, ScaledLog]
    target: ItemSet = field(default_factory=frozenset)


def optimal_welfare(profile: Sequence[Valuation], cap: int = 10**7) -> tuple[Allocation, Fraction]:
    """Exhaustively maximize total value over assignments of items to bidders or unsold.

    Returns the first maximizer in enumeration order and the optimum.  The
    enumeration includes the "unsold" option for every item even though
    monotonicity makes it redundant.
    """
    n = len(profile)
    if n < 1:
        raise ValueError("need at least one bidder")
    m = profile[0].m
    if any(v.m != m for v in profile):
        raise ValueError("profile valuations disagree on m")
    if (n + 1) ** m > cap:
        raise CapExceeded(f"(n+1)^m = {(n + 1) ** m} exceeds cap {cap}")
    caches: list[dict[int, Fraction]] = [{0: Fraction(0)} for _ in range(n)]

    def val(i: int, mask: int) -> Fraction:
        got = caches[i].get(mask)
        if got is None:
            got = profile[i].value(set_of(mask))
            caches[i][mask] = got
        return got

    best_assign = None
    best = Fraction(-1)
    for assign in itertools.product(range(n + 1), repeat=m):
        masks = [0] * n
        for j, owner in enumerate(assign):
            if owner < n:
                masks[owner] |= 1 << j
        welfare = sum((val(i, masks[i]) for i in range(n)), Fraction(0))
        if welfare > best:
            best = welfare
            best_assign = masks
    allocation = tuple(set_of(mask) for mask in best_assign)
    return allocation, best


def check_pointwise_approx(
    v: Valuation, v_prime: Valuation, target: ItemSet, beta, cap: int = 2**20
) -> bool:
    """True iff beta * v'(target) >= v(target) and v'(T) <= v(T) for every T."""
    if v.m != v_prime.m:
        raise ValueError("valuations disagree on m")
    if (1 << v.m) > cap:
        raise CapExceeded(f"2^m = {1 << v.m} exceeds cap {cap}")
    target = frozenset(target)
    if not ge_product(beta, v_prime.value(target), v.value(target)):
        return False
    for mask in range(1 << v.m):
        t = set_of(mask)
        if v_prime.value(t) > v.value(t):
            return False
    return True


def approx_concave_symmetric(v: ConcaveSymmetric, target: ItemSet) -> ApproxResult:
    """Constraint-homogeneous surrogate with unit value f(|S|)/|S|; exact (beta = 1)."""
    target = frozenset(target)
    if not target:
        raise ValueError("target set must be nonempty")
    unit = v.f[len(target)] / len(target)
    return ApproxResult(ConstraintHomogeneous(v.m, target, unit), Fraction(1), target)


def approx_additive(v: Additive, target: ItemSet) -> ApproxResult:
    """Bucket the target by halving value thresholds and keep the best bucket.

    Items worth less than v_max/2^ceil(log2(k-1)) form an excluded tail; the
    surrogate is constraint-homogeneous on the most valuable non-tail bucket
    at that bucket's minimum value.  beta = 2*(log2(k-1)+1) for k >= 2 kept
    items, beta = 1 for a singleton.
    """
    target = frozenset(target)
    if not target:
        raise ValueError("target set must be nonempty")
    kept = sorted((j for j in target if v.values[j] > 0), key=lambda j: (-v.values[j], j))
    if not kept:
        return ApproxResult(Additive([0] * v.m), Fraction(1), target)
    k = len(kept)
    if k == 1:
        j = kept[0]
        return ApproxResult(
            ConstraintHomogeneous(v.m, frozenset([j]), v.values[j]), Fraction(1), target
        )
    v1 = v.values[kept[0]]
    depth = max(1, (k - 2).bit_length())  # ceil(log2(k-1)), at least one bucket
    buckets: list[list[int]] = [[] for _ in range(depth)]
    tail: list[int] = []
    for j in kept:
        for t in range(depth):
            if v.values[j] * (2 ** (t + 1)) >= v1:
                buckets[t].append(j)
                break
        else:
            tail.append(j)
    bucket_vals = [sum((v.values[j] for j in b), Fraction(0)) for b in buckets]
    tail_val = sum((v.values[j] for j in tail), Fraction(0))
    if not (tail_val < v1 <= bucket_vals[0]):
        raise ApproxGuaranteeError("tail exclusion invariant failed")
    tau = max(range(depth), key=lambda t: (bucket_vals[t], -t))
    chosen = buckets[tau]
    unit = min(v.values[j] for j in chosen)
    beta = scaled_log(2, 2 * (k - 1))  # 2*(log2(k-1)+1)
    return ApproxResult(ConstraintHomogeneous(v.m, frozenset(chosen), unit), beta, target)


def approx_xos(v: XOS, target: ItemSet) -> ApproxResult:
    """The clause maximizing the target, zeroed outside the target; exact (beta = 1)."""
    target = frozenset(target)
    best = max(v.clauses, key=lambda row: sum((row[j] for j in target), Fraction(0)))
    weights = [best[j] if j in target else Fraction(0) for j in range(v.m)]
    return ApproxResult(Additive(weights), Fraction(1), target)


def harmonic(k: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, k + 1)), Fraction(0))


def approx_subadditive(v: ExplicitTable, target: ItemSet, cap: int = 16) -> ApproxResult:
    """Largest additive valuation below v on the target, via an exact LP.

    Maximizes sum(x_j) subject to x(T) <= v(T) for every nonempty T inside the
    target, x >= 0.  Items outside the target get weight 0.  The harmonic
    guarantee H_k * sum(x) >= v(target) is verified and a failure raises.
    """
    if not v.subadditive:
        raise InvalidValuation("valuation must be tagged subadditive")
    target = frozenset(target)
    items = sorted(target)
    k = len(items)
    if k > cap:
        raise CapExceeded(f"|target| = {k} exceeds cap {cap}")
    if k == 0:
        return ApproxResult(Additive([0] * v.m), Fraction(1), target)
    rows = []
    rhs = []
    for sub_mask in range(1, 1 << k):
        rows.append([Fraction(int(sub_mask >> idx & 1)) for idx in range(k)])
        rhs.append(v.value(frozenset(items[idx] for idx in range(k) if sub_mask >> idx & 1)))
    x = _simplex_max(rows, rhs, [Fraction(1)] * k)
    weights = [Fraction(0)] * v.m
    for idx, j in enumerate(items):
        weights[j] = x[idx]
    total = sum(x, Fraction(0))
    beta = harmonic(k)
    if beta * total < v.value(target):
        raise ApproxGuaranteeError(
            f"H_{k} * {total} < v(target) = {v.value(target)}: harmonic guarantee failed"
        )
    approx = Additive(weights)
    for sub_mask in range(1, 1 << k):
        t = frozenset(items[idx] for idx in range(k) if sub_mask >> idx & 1)
        if approx.value(t) > v.value(t):
            raise ApproxGuaranteeError("LP solution violates an upper-bound constraint")
    return ApproxResult(approx, beta, target)


def _simplex_max(rows, rhs, objective):
    """Exact simplex (Bland's rule) for max c.x s.t. rows.x <= rhs, x >= 0, rhs >= 0."""
    n_cons = len(rows)
    n_var = len(objective)
    tab = [list(rows[i]) + [Fraction(0)] * n_cons + [rhs[i]] for i in range(n_cons)]
    for i in range(n_cons):
        tab[i][n_var + i] = Fraction(1)
    cost = list(objective) + [Fraction(0)] * (n_cons + 1)
    basis = list(range(n_var, n_var + n_cons))
    while True:
        enter = next((j for j in range(n_var + n_cons) if cost[j] > 0), None)
        if enter is None:
            break
        pivot_row = None
        best_ratio = None
        for i in range(n_cons):
            a = tab[i][enter]
            if a > 0:
                ratio = tab[i][-1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i] < basis[pivot_row])
                ):
                    best_ratio = ratio
                    pivot_row = i
        if pivot_row is None:
            raise ArithmeticError("LP is unbounded")
        piv = tab[pivot_row][enter]
        tab[pivot_row] = [a / piv for a in tab[pivot_row]]
        for i in range(n_cons):
            if i != pivot_row and tab[i][enter] != 0:
                f = tab[i][enter]
                tab[i] = [a - f * b for a, b in zip(tab[i], tab[pivot_row])]
        f = cost[enter]
        cost = [a - f * b for a, b in zip(cost, tab[pivot_row])]
        basis[pivot_row] = enter
    x = [Fraction(0)] * n_var
    for i, b in enumerate(basis):
        if b < n_var:
            x[b] = tab[i][-1]
    return x


def to_constraint_homogeneous(v: Valuation, target: ItemSet) -> ApproxResult:
    """Compose the class-appropriate chain down to a constraint-homogeneous surrogate.

    Dispatch: constraint-homogeneous and concave-symmetric map directly
    (beta = 1); additive buckets; XOS goes through its maximizing clause;
    subadditive tables go through the harmonic LP then bucket.  Unit-demand is
    treated as XOS with singleton clauses.  Betas multiply along the chain.
    """
    target = frozenset(target)
    if isinstance(v, ConstraintHomogeneous):
        trimmed = ConstraintHomogeneous(v.m, v.interest & target, v.unit_value)
        return ApproxResult(trimmed, Fraction(1), target)
    if isinstance(v, ConcaveSymmetric):
        if not target:
            return ApproxResult(ConstraintHomogeneous(v.m, frozenset(), 0), Fraction(1), target)
        return approx_concave_symmetric(v, target)
    if isinstance(v, UnitDemand):
        v = XOS([[val if j == i else 0 for j in range(v.m)] for i, val in enumerate(v.values)])
    if isinstance(v, Additive):
        first = ApproxResult(v, Fraction(1), target)
    elif isinstance(v, XOS):
        first = approx_xos(v, target)
    elif isinstance(v, ExplicitTable):
        first = approx_subadditive(v, target)
    else:
        raise TypeError(f"no chain for {type(v).__name__}")
    if not target:
        return ApproxResult(ConstraintHomogeneous(v.m, frozenset(), 0), Fraction(1), target)
    second = approx_additive(first.approx, target)
    beta = _beta_product(first.beta, second.beta)
    return ApproxResult(second.approx, beta, target)


def _beta_product(b1, b2):
    if isinstance(b1, ScaledLog) and isinstance(b2, ScaledLog):
        raise TypeError("cannot multiply two log-form factors exactly")
    if isinstance(b1, ScaledLog):
        return ScaledLog(b1.coeff * b2, b1.arg)
    if isinstance(b2, ScaledLog):
        return ScaledLog(b2.coeff * b1, b2.arg)
    return b1 * b2
