"""Exact integer arithmetic on first homology classes of the two-torus.

A class is an integer pair ``(a, b)`` in the fixed basis given by the two
coordinate circles of T^2.  Everything here is exact: gcd reductions, 2x2
integer determinants and Cramer solves, and the cylinder-splitting ledger

    (p, q) = r*(0, 1) + c1*(1, 0) + c2*(N, 1),   c1 = p - (q - r)*N,  c2 = q - r,

which tracks how a family of boundary curves is rewritten over the anchor
classes (1, 0) and (N, 1) before splitting it across two stacked boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True, order=True)
class HomClass:
    """An element of H_1(T^2; Z): ``a`` times the x-circle plus ``b`` times the y-circle."""

    a: int
    b: int

    def __post_init__(self) -> None:
        if not isinstance(self.a, int) or not isinstance(self.b, int):
            raise TypeError("homology coefficients must be integers")

    def __add__(self, other: "HomClass") -> "HomClass":
        return HomClass(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "HomClass") -> "HomClass":
        return HomClass(self.a - other.a, self.b - other.b)

    def __neg__(self) -> "HomClass":
        return HomClass(-self.a, -self.b)

    def __rmul__(self, k: int) -> "HomClass":
        return HomClass(k * self.a, k * self.b)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_primitive(self) -> bool:
        return math.gcd(abs(self.a), abs(self.b)) == 1

    def sup_norm(self) -> int:
        return max(abs(self.a), abs(self.b))

    def canonical(self) -> "HomClass":
        """The representative of {c, -c} whose first nonzero entry is positive."""
        if self.a < 0 or (self.a == 0 and self.b < 0):
            return -self
        return self

    def as_tuple(self) -> tuple[int, int]:
        return (self.a, self.b)


def det(u: HomClass, v: HomClass) -> int:
    """Signed intersection-style determinant u.a*v.b - u.b*v.a."""
    return u.a * v.b - u.b * v.a


def primitive_part(c: HomClass) -> tuple[int, HomClass]:
    """Split ``c`` as ``d * prim`` with d > 0 and prim primitive.

    The direction of ``c`` is preserved (orientation carries meaning), so the
    divisor is always the positive gcd.
    """
    if c.is_zero():
        raise ValueError("zero homology class")
    d = math.gcd(abs(c.a), abs(c.b))
    return d, HomClass(c.a // d, c.b // d)


def is_basis(u: HomClass, v: HomClass) -> bool:
    """Whether u, v generate H_1(T^2; Z), i.e. |det(u, v)| = 1."""
    return abs(det(u, v)) == 1


def _completion_candidates(u: HomClass) -> Iterator[HomClass]:
    """All v with det(u, v) = +1, enumerated as v0 + k*u over a safe window."""
    g, x, y = _ext_gcd(u.a, u.b)
    # u primitive: g == 1 and u.a*(-y)... solve u.a*v.b - u.b*v.a = 1.
    # With ext gcd: x*u.a + y*u.b = 1, so v = (-y, x) works.
    v0 = HomClass(-y, x)
    assert det(u, v0) == 1
    centers = [0]
    if u.a != 0:
        centers.append(round(-v0.a / u.a))
    if u.b != 0:
        centers.append(round(-v0.b / u.b))
    lo = min(centers) - 2
    hi = max(centers) + 2
    for k in range(lo, hi + 1):
        yield HomClass(v0.a + k * u.a, v0.b + k * u.b)


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, x, y) with x*a + y*b = g = gcd(a, b), g >= 0."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    if old_r < 0:
        old_r, old_x, old_y = -old_r, -old_x, -old_y
    return old_r, old_x, old_y


def complete_basis(u: HomClass) -> HomClass:
    """A deterministic v with det(u, v) = +1.

    Tie-break among all completions: minimal sup norm, then minimal
    (|v.a|, |v.b|) lexicographically, then minimal signed (v.a, v.b).  This
    picks (0, 1) for (1, 0) and (-1, 0) for (0, 1).
    """
    if not u.is_primitive():
        raise ValueError("can only complete a primitive class to a basis")
    best = min(
        _completion_candidates(u),
        key=lambda v: (v.sup_norm(), (abs(v.a), abs(v.b)), (v.a, v.b)),
    )
    return best


def express_in_basis(c: HomClass, u: HomClass, v: HomClass) -> tuple[int, int]:
    """Integers (m, n) with c = m*u + n*v, by Cramer over the integers."""
    d = det(u, v)
    if abs(d) != 1:
        raise ValueError("(u, v) is not a basis of H_1(T^2; Z)")
    m = (c.a * v.b - c.b * v.a) // d
    n = (u.a * c.b - u.b * c.a) // d
    return m, n


@dataclass(frozen=True)
class Ledger:
    """The exact bookkeeping of one boundary family over the anchor classes.

    With the x-circle class written (0, 1) against anchors b1 = (1, 0) and
    b2 = (N, 1), the identity

        (p, q) = r*(0, 1) + c1*(1, 0) + c2*(N, 1)

    holds for c1 = p - (q - r)*N and c2 = q - r, for every integer quadruple.
    """

    p: int
    q: int
    r: int
    N: int
    c1: int
    c2: int

    def identity_holds(self) -> bool:
        lhs = (self.p, self.q)
        rhs = (
            self.r * 0 + self.c1 * 1 + self.c2 * self.N,
            self.r * 1 + self.c1 * 0 + self.c2 * 1,
        )
        return lhs == rhs


def ledger_decompose(p: int, q: int, r: int, N: int) -> Ledger:
    """Build the ledger for (p, q) against copies r and anchor shear N."""
    c1 = p - (q - r) * N
    c2 = q - r
    ledger = Ledger(p=p, q=q, r=r, N=N, c1=c1, c2=c2)
    assert ledger.identity_holds()
    return ledger
