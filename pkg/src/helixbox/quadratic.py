"""Exact arithmetic in real quadratic fields Q(sqrt(D)).

Numbers are stored as p + q*sqrt(D) with rational p, q and a squarefree
nonnegative integer D.  Rational vs irrational is decidable exactly (q == 0
after canonicalization), which is what slope dichotomies need; floating point
cannot make that call.

Numbers from different fields do not mix: adding sqrt(2) to sqrt(3) raises
instead of silently working in a biquadratic field.  Rationals (q == 0) are
compatible with every field.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from typing import Union

Rational = Union[int, Fraction]


def squarefree_decompose(n: int) -> tuple[int, int]:
    """Write n >= 0 as s*s*d with d squarefree; returns (s, d)."""
    if n < 0:
        raise ValueError("negative radicand")
    if n == 0:
        return 1, 0
    s = 1
    d = n
    f = 2
    while f * f <= d:
        f2 = f * f
        while d % f2 == 0:
            d //= f2
            s *= f
        f += 1
    return s, d


@total_ordering
class QuadraticNumber:
    """p + q*sqrt(D) with exact rational p, q and squarefree D >= 0."""

    __slots__ = ("p", "q", "D")

    def __init__(self, p: Rational = 0, q: Rational = 0, D: int = 0):
        p = Fraction(p)
        q = Fraction(q)
        if D < 0:
            raise ValueError("D must be nonnegative")
        s, d = squarefree_decompose(D)
        if s != 1:
            q = q * s
            D = d
        if D == 0:
            q = Fraction(0)
        elif D == 1:
            p = p + q
            q = Fraction(0)
            D = 0
        if q == 0:
            D = 0
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "D", D)

    def __setattr__(self, *args):
        raise AttributeError("QuadraticNumber is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def rational(cls, x: Rational) -> "QuadraticNumber":
        return cls(Fraction(x), 0, 0)

    @classmethod
    def sqrt(cls, n: int) -> "QuadraticNumber":
        return cls(0, 1, n)

    # -- predicates --------------------------------------------------------

    def is_rational(self) -> bool:
        return self.q == 0

    def is_zero(self) -> bool:
        return self.p == 0 and self.q == 0

    # -- field bookkeeping ---------------------------------------------------

    def _joint_field(self, other: "QuadraticNumber") -> int:
        if self.q == 0:
            return other.D
        if other.q == 0:
            return self.D
        if self.D != other.D:
            raise ValueError(
                f"mixed quadratic fields: sqrt({self.D}) vs sqrt({other.D})"
            )
        return self.D

    @staticmethod
    def _coerce(x: "QuadraticNumber | Rational") -> "QuadraticNumber":
        if isinstance(x, QuadraticNumber):
            return x
        if isinstance(x, (int, Fraction)):
            return QuadraticNumber.rational(x)
        return NotImplemented  # type: ignore[return-value]

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        D = self._joint_field(other)
        return QuadraticNumber(self.p + other.p, self.q + other.q, D)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.p, -self.q, self.D)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        D = self._joint_field(other)
        p = self.p * other.p + self.q * other.q * D
        q = self.p * other.q + self.q * other.p
        return QuadraticNumber(p, q, D)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other.is_zero():
            raise ZeroDivisionError("division by zero quadratic number")
        D = self._joint_field(other)
        # Multiply by the conjugate; the norm p^2 - q^2 D vanishes only at 0.
        norm = other.p * other.p - other.q * other.q * D
        conj = QuadraticNumber(other.p, -other.q, other.D)
        num = self * conj
        return QuadraticNumber(num.p / norm, num.q / norm, D)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    # -- order ---------------------------------------------------------------

    def sign(self) -> int:
        """Exact sign in {-1, 0, 1}."""
        if self.q == 0:
            return (self.p > 0) - (self.p < 0)
        if self.p == 0:
            return 1 if self.q > 0 else -1
        if self.p > 0 and self.q > 0:
            return 1
        if self.p < 0 and self.q < 0:
            return -1
        # Opposite signs: compare p^2 with q^2 D.
        lhs = self.p * self.p
        rhs = self.q * self.q * self.D
        if lhs == rhs:
            return 0  # unreachable for squarefree D > 1, kept for D folding
        bigger_is_p = lhs > rhs
        return (1 if self.p > 0 else -1) if bigger_is_p else (1 if self.q > 0 else -1)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.q == 0 and other.q == 0:
            return self.p == other.p
        return self.D == other.D and self.p == other.p and self.q == other.q

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return (self - other).sign() < 0

    def __hash__(self):
        return hash((self.p, self.q, self.D))

    # -- conversions -----------------------------------------------------------

    def __float__(self) -> float:
        return float(self.p) + float(self.q) * math.sqrt(self.D)

    def __repr__(self) -> str:
        if self.q == 0:
            return f"QuadraticNumber({self.p})"
        return f"QuadraticNumber({self.p} + {self.q}*sqrt({self.D}))"

    def __str__(self) -> str:
        if self.q == 0:
            return str(self.p)
        return f"{self.p} + {self.q}*sqrt({self.D})"
