"""Exact scalars: rational parsing plus log-form constants.

Several guarantee factors in this package have the shape ``c * log2(n)`` or
``c / log2(n)`` with rational ``c`` and integer ``n``.  Verdicts must not
depend on floating-point rounding, so comparisons against these constants are
decided exactly via integer power comparisons: ``log2(n) >= p/q`` iff
``n**q >= 2**p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log2
from typing import Union


def parse_rational(text) -> Fraction:
    """Parse a rational from 'p/q' or 'p' strings; ints and Fractions pass through."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        return Fraction(text.strip())
    raise ValueError(f"not a rational: {text!r}")


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def cmp_log2(n: int, q: Fraction) -> int:
    """Sign of log2(n) - q, computed exactly. Requires n >= 1."""
    if n < 1:
        raise ValueError("log2 argument must be >= 1")
    if n == 1:
        return -((q > 0) - (q < 0))
    q = Fraction(q)
    p, r = q.numerator, q.denominator
    if p <= 0:
        return 1 if p < 0 or n > 1 else 0
    lhs = n**r
    rhs = 2**p
    return (lhs > rhs) - (lhs < rhs)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ScaledLog:
    """The exact positive value coeff * log2(arg), with arg not a power of two."""

    coeff: Fraction
    arg: int

    def ge(self, q: Fraction) -> bool:
        """self >= q, exactly."""
        return cmp_log2(self.arg, Fraction(q) / self.coeff) >= 0

    def times_ge(self, x: Fraction, y: Fraction) -> bool:
        """self * x >= y for x >= 0, exactly."""
        if x < 0:
            raise ValueError("x must be nonnegative")
        if x == 0:
            return y <= 0
        if y <= 0:
            return True
        return cmp_log2(self.arg, Fraction(y) / (self.coeff * x)) >= 0

    def approx(self) -> float:
        return float(self.coeff) * log2(self.arg)

    def __str__(self) -> str:
        return f"{format_rational(self.coeff)}*log2({self.arg})"


@dataclass(frozen=True)
class InvLog:
    """The exact positive value scale / log2(arg), with arg >= 2 not a power of two."""

    scale: Fraction
    arg: int

    def approx(self) -> float:
        return float(self.scale) / log2(self.arg)

    def __str__(self) -> str:
        return f"{format_rational(self.scale)}/log2({self.arg})"


ExactScalar = Union[Fraction, ScaledLog, InvLog]


def scaled_log(coeff, arg: int) -> Union[Fraction, ScaledLog]:
    """coeff * log2(arg), as a plain Fraction whenever arg is a power of two."""
    coeff = parse_rational(coeff)
    if arg < 1:
        raise ValueError("log2 argument must be >= 1")
    if _is_power_of_two(arg):
        return coeff * (arg.bit_length() - 1)
    return ScaledLog(coeff, arg)


def inv_log(scale, arg: int) -> Union[Fraction, InvLog]:
    """scale / log2(arg), as a plain Fraction whenever arg is a power of two."""
    scale = parse_rational(scale)
    if arg < 2:
        raise ValueError("inv_log needs arg >= 2")
    if _is_power_of_two(arg):
        return scale / (arg.bit_length() - 1)
    return InvLog(scale, arg)


def ge_product(c: ExactScalar, x: Fraction, y: Fraction) -> bool:
    """c * x >= y for x >= 0, exactly; c is a Fraction or ScaledLog."""
    if isinstance(c, ScaledLog):
        return c.times_ge(x, y)
    if isinstance(c, InvLog):
        raise TypeError("ge_product does not take InvLog coefficients")
    return c * x >= y


def margin_sign(lam: ExactScalar, a: Fraction, b: Fraction) -> int:
    """Sign of a - lam*b, exactly; lam is a positive Fraction or InvLog, a and b any sign."""
    if isinstance(lam, InvLog):
        # a - scale*b/L with L = log2(arg) > 0: the sign equals sign(a*L - scale*b).
        t = lam.scale * b
        if a == 0:
            return (t < 0) - (t > 0)
        c = cmp_log2(lam.arg, t / a)
        return c if a > 0 else -c
    d = a - lam * b
    return (d > 0) - (d < 0)


def margin_cmp(lam: ExactScalar, a1: Fraction, b1: Fraction, a2: Fraction, b2: Fraction) -> int:
    """Sign of (a1 - lam*b1) - (a2 - lam*b2), exactly."""
    return margin_sign(lam, a1 - a2, b1 - b2)


def scalar_approx(x: ExactScalar) -> float:
    return x.approx() if isinstance(x, (ScaledLog, InvLog)) else float(x)


def scalar_str(x: ExactScalar) -> str:
    return str(x) if isinstance(x, (ScaledLog, InvLog)) else format_rational(x)
