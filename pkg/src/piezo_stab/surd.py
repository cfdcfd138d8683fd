"""Exact arithmetic in real quadratic fields Q(sqrt(R)).

A :class:`QuadSurd` is ``a + b*sqrt(R)`` with rational ``a, b`` and a positive
integer radicand ``R``.  ``R == 1`` encodes plain rationals (then ``b == 0``).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isqrt

import mpmath

__all__ = ["QuadSurd", "is_square", "rational_sqrt", "sqrt_rational", "NotInField"]


class NotInField(ArithmeticError):
    """Raised when two surds live in different quadratic fields."""


def is_square(q) -> bool:
    q = Fraction(q)
    if q < 0:
        return False
    n, d = q.numerator, q.denominator
    return isqrt(n) ** 2 == n and isqrt(d) ** 2 == d


def rational_sqrt(q) -> Fraction:
    """Exact square root of a rational square; ``ValueError`` otherwise."""
    q = Fraction(q)
    if not is_square(q):
        raise ValueError(f"{q} is not the square of a rational")
    return Fraction(isqrt(q.numerator), isqrt(q.denominator))


_SMALL_PRIMES = [p for p in range(2, 1000) if all(p % k for k in range(2, isqrt(p) + 1))]


def _split_square(n: int) -> tuple[int, int]:
    """Write ``n = s**2 * r`` pulling out square factors of small primes."""
    s = 1
    for p in _SMALL_PRIMES:
        pp = p * p
        if pp > n:
            break
        while n % pp == 0:
            n //= pp
            s *= p
    r = isqrt(n)
    if r * r == n:
        return s * r, 1
    return s, n


@dataclass(frozen=True)
class QuadSurd:
    a: Fraction
    b: Fraction = Fraction(0)
    radicand: int = 1

    def __post_init__(self):
        a, b, r = Fraction(self.a), Fraction(self.b), int(self.radicand)
        if r <= 0:
            raise ValueError("radicand must be positive")
        s, r = _split_square(r)
        b *= s
        if r == 1:
            a, b = a + b, Fraction(0)
        if b == 0:
            r = 1
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "radicand", r)

    @classmethod
    def coerce(cls, x) -> "QuadSurd":
        if isinstance(x, QuadSurd):
            return x
        if isinstance(x, (int, Fraction)):
            return cls(Fraction(x))
        raise TypeError(f"cannot coerce {type(x).__name__} to QuadSurd")

    # field alignment ------------------------------------------------------
    def _align(self, other: "QuadSurd"):
        if self.radicand == other.radicand or other.radicand == 1:
            return self, other, self.radicand
        if self.radicand == 1:
            return self, other, other.radicand
        # sqrt(R2) = sqrt(R1*R2)/sqrt(R1) lies in Q(sqrt(R1)) iff R1*R2 is a square
        prod = self.radicand * other.radicand
        k = isqrt(prod)
        if k * k != prod:
            raise NotInField(f"sqrt({self.radicand}) and sqrt({other.radicand}) generate different fields")
        r1 = self.radicand
        moved = QuadSurd(other.a, other.b * Fraction(k, r1), r1)
        return self, moved, r1

    def __add__(self, other):
        try:
            other = QuadSurd.coerce(other)
        except TypeError:
            return NotImplemented
        x, y, r = self._align(other)
        return QuadSurd(x.a + y.a, x.b + y.b, r)

    __radd__ = __add__

    def __neg__(self):
        return QuadSurd(-self.a, -self.b, self.radicand)

    def __sub__(self, other):
        try:
            other = QuadSurd.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return QuadSurd.coerce(other) - self

    def __mul__(self, other):
        try:
            other = QuadSurd.coerce(other)
        except TypeError:
            return NotImplemented
        x, y, r = self._align(other)
        return QuadSurd(x.a * y.a + x.b * y.b * r, x.a * y.b + x.b * y.a, r)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadSurd":
        return QuadSurd(self.a, -self.b, self.radicand)

    def norm(self) -> Fraction:
        """Field norm ``a**2 - b**2 R``."""
        return self.a**2 - self.b**2 * self.radicand

    def trace(self) -> Fraction:
        return 2 * self.a

    def __truediv__(self, other):
        try:
            other = QuadSurd.coerce(other)
        except TypeError:
            return NotImplemented
        x, y, r = self._align(other)
        n = y.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero surd")
        num = x * y.conjugate()
        return QuadSurd(num.a / n, num.b / n, r)

    def __rtruediv__(self, other):
        return QuadSurd.coerce(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QuadSurd(1) / self ** (-k)
        out = QuadSurd(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # order ----------------------------------------------------------------
    def sign(self) -> int:
        """Exact sign of ``a + b sqrt(R)``."""
        a, b, r = self.a, self.b, self.radicand
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with b^2 R
        diff = a * a - b * b * r
        return sa if diff > 0 else (sb if diff < 0 else 0)

    def __eq__(self, other):
        try:
            other = QuadSurd.coerce(other)
        except TypeError:
            return NotImplemented
        try:
            return (self - other).sign() == 0
        except NotInField:
            return False

    def __hash__(self):
        return hash((self.a, self.b, self.radicand))

    def __lt__(self, other):
        return (self - QuadSurd.coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - QuadSurd.coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - QuadSurd.coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - QuadSurd.coerce(other)).sign() >= 0

    # conversions ----------------------------------------------------------
    @property
    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if not self.is_rational:
            raise ValueError(f"{self} is irrational")
        return self.a

    def __float__(self):
        return float(self.to_mpf(30))

    def to_mpf(self, dps: int = 50):
        with mpmath.workdps(dps + 10):
            val = mpmath.mpf(self.a.numerator) / self.a.denominator
            if self.b:
                val += mpmath.mpf(self.b.numerator) / self.b.denominator * mpmath.sqrt(self.radicand)
        return val

    def sqrt(self) -> "QuadSurd | None":
        """Square root as a quadratic surd, or ``None`` if it is not one.

        A rational always has one; an irrational needs a root in its own field.
        """
        if self.sign() < 0:
            return None
        if self.is_rational:
            return sqrt_rational(self.a)
        # (c + e sqrt R)^2 = a + b sqrt R  =>  c^2 = (a +- sqrt(norm)) / 2
        n = self.norm()
        if not is_square(n):
            return None
        root_n = rational_sqrt(n)
        for c2 in ((self.a + root_n) / 2, (self.a - root_n) / 2):
            if c2 > 0 and is_square(c2):
                c = rational_sqrt(c2)
                e = self.b / (2 * c)
                cand = QuadSurd(c, e, self.radicand)
                if cand.sign() < 0:
                    cand = -cand
                if cand * cand == self:
                    return cand
        return None

    def pqr(self) -> tuple[int, int, int]:
        """Integers ``(p, q, r)`` with value ``(p + q sqrt(R)) / r``, ``r > 0``."""
        den = self.a.denominator * self.b.denominator // gcd(self.a.denominator, self.b.denominator)
        return int(self.a * den), int(self.b * den), den

    def __str__(self):
        if self.is_rational:
            return str(self.a)
        p, q, r = self.pqr()
        sign = "+" if q > 0 else "-"
        body = f"{p} {sign} {abs(q)}*sqrt({self.radicand})" if p else f"{q}*sqrt({self.radicand})"
        return f"({body})/{r}" if r != 1 else f"({body})" if p else body


def sqrt_rational(q) -> QuadSurd:
    """``sqrt(q)`` for a non-negative rational as a surd."""
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative radicand")
    if q == 0:
        return QuadSurd(0)
    n, d = q.numerator, q.denominator
    # sqrt(n/d) = sqrt(n*d) / d
    return QuadSurd(0, Fraction(1, d), n * d)
