"""SL(2, Z) gluing analysis for torus bundles over the circle.

The mapping torus of A in SL(2, Z) is classified up to the trace trichotomy:
elliptic (|tr| < 2), parabolic (tr = +-2, split into the two shear families),
hyperbolic (|tr| > 2).  Eigenvector slopes are roots of

    b*x^2 + (a - d)*x - c = 0

and are kept in exact quadratic arithmetic so the rational/irrational
dichotomy is decidable.  The Lefschetz number 2 - tr(A) is cross-checked by a
lattice fixed-point count via Smith normal form, and a Fried-style pairing
test decides which cohomology classes are dual to global cross sections of a
suspension with a given rotation vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

from .homology import HomClass
from .quadratic import QuadraticNumber, squarefree_decompose


@dataclass(frozen=True)
class GluingMatrix:
    """Row-major [[a, b], [c, d]] with determinant 1."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self) -> None:
        if self.det() != 1:
            raise ValueError(f"gluing matrix must have determinant 1, got {self.det()}")

    def det(self) -> int:
        return self.a * self.d - self.b * self.c

    def trace(self) -> int:
        return self.a + self.d

    def apply(self, v: HomClass) -> HomClass:
        return HomClass(self.a * v.a + self.b * v.b, self.c * v.a + self.d * v.b)

    def __matmul__(self, other: "GluingMatrix") -> "GluingMatrix":
        return GluingMatrix(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "GluingMatrix":
        return GluingMatrix(self.d, -self.b, -self.c, self.a)

    @classmethod
    def identity(cls) -> "GluingMatrix":
        return cls(1, 0, 0, 1)

    def rows(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.a, self.b), (self.c, self.d))


class BundleTag(Enum):
    ELLIPTIC = "elliptic"
    POSITIVE_PARABOLIC = "positive parabolic"
    NEGATIVE_PARABOLIC = "negative parabolic"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class BundleClass:
    """Trace-level classification; ``index`` is the shear amount n when the
    matrix literally equals the normal form [[+-1, n], [0, +-1]], else None."""

    tag: BundleTag
    trace: int
    index: Optional[int] = None

    def __str__(self) -> str:
        if self.tag in (BundleTag.POSITIVE_PARABOLIC, BundleTag.NEGATIVE_PARABOLIC):
            n = "?" if self.index is None else str(self.index)
            return f"{self.tag.value}(n={n})"
        if self.tag is BundleTag.ELLIPTIC:
            return f"{self.tag.value}(trace={self.trace})"
        return self.tag.value


def classify_bundle(A: GluingMatrix) -> BundleClass:
    """Classify the mapping torus of A by trace.

    For |tr| = 2 the conjugacy-class index n is extracted only when A is
    exactly a normal form [[+-1, n], [0, +-1]]; otherwise it is left None
    (full conjugacy reduction is out of scope, the trace tag is what the
    downstream obstruction tests consume).
    """
    tr = A.trace()
    if abs(tr) < 2:
        return BundleClass(BundleTag.ELLIPTIC, tr)
    if abs(tr) > 2:
        return BundleClass(BundleTag.HYPERBOLIC, tr)
    sign = 1 if tr == 2 else -1
    tag = BundleTag.POSITIVE_PARABOLIC if sign == 1 else BundleTag.NEGATIVE_PARABOLIC
    index = None
    if A.a == sign and A.d == sign and A.c == 0:
        index = A.b
    return BundleClass(tag, tr, index)


@dataclass(frozen=True)
class EigenSlopes:
    """Roots of the eigenvector-slope quadratic, plus the degenerate flags.

    ``slopes`` lists the finite slopes alpha of eigenvectors (1, alpha); the
    quadratic b*x^2 + (a-d)*x - c degenerates when b = 0, in which case the
    vertical vector (0, 1) is an eigenvector (``vertical``), and for +-identity
    every direction is one (``all_directions``).
    """

    slopes: tuple[QuadraticNumber, ...]
    vertical: bool = False
    all_directions: bool = False
    double_root: bool = False


def eigen_slopes(A: GluingMatrix) -> EigenSlopes:
    """All real eigenvector slopes of A in exact quadratic form."""
    a, b, c, d = A.a, A.b, A.c, A.d
    if b == 0:
        # det = a*d = 1 forces a = d = +-1 over the integers, but handle the
        # general linear degeneration anyway.
        if a != d:
            return EigenSlopes((QuadraticNumber.rational(Fraction(c, a - d)),), vertical=True)
        if c == 0:
            return EigenSlopes((), vertical=True, all_directions=True)
        return EigenSlopes((), vertical=True)
    disc = (a - d) * (a - d) + 4 * b * c  # equals tr^2 - 4 when det = 1
    if disc < 0:
        return EigenSlopes(())
    if disc == 0:
        alpha = QuadraticNumber.rational(Fraction(d - a, 2 * b))
        return EigenSlopes((alpha,), double_root=True)
    s, D = squarefree_decompose(disc)
    # alpha = ((d - a) +- s*sqrt(D)) / (2b)
    base = Fraction(d - a, 2 * b)
    coef = Fraction(s, 2 * b)
    r1 = QuadraticNumber(base, coef, D)
    r2 = QuadraticNumber(base, -coef, D)
    if D == 0:  # disc was a perfect square: two rational slopes
        return EigenSlopes(tuple(sorted((r1, r2))))
    return EigenSlopes(tuple(sorted((r1, r2), reverse=True)))


def slope_residual(A: GluingMatrix, alpha: QuadraticNumber) -> QuadraticNumber:
    """b*alpha^2 + (a-d)*alpha - c; exactly zero iff alpha is an eigen slope."""
    return A.b * alpha * alpha + (A.a - A.d) * alpha - A.c


def has_integer_eigenvector(A: GluingMatrix) -> tuple[bool, Optional[HomClass]]:
    """Whether A fixes an integer direction, with a canonical primitive witness.

    The witness is (t, s) for a rational eigen slope s/t in lowest terms with
    t > 0, (0, 1) for a vertical eigenvector, and (1, 0) when every direction
    is fixed (the +-identity).  Hyperbolic matrices return (False, None): their
    slopes have a nonzero square-root part.
    """
    es = eigen_slopes(A)
    if es.all_directions:
        return True, HomClass(1, 0)
    for alpha in es.slopes:
        if alpha.is_rational():
            frac = Fraction(alpha.p)
            v = HomClass(frac.denominator, frac.numerator)
            assert _is_eigen(A, v)
            return True, v
    if es.vertical:
        return True, HomClass(0, 1)
    return False, None


def _is_eigen(A: GluingMatrix, v: HomClass) -> bool:
    w = A.apply(v)
    return w.a * v.b - w.b * v.a == 0


def lefschetz_number(A: GluingMatrix) -> int:
    """Lefschetz number of a torus map acting as A on H_1: 2 - tr(A)."""
    return 2 - A.trace()


def smith_normal_form_2x2(m: list[list[int]]) -> tuple[list[list[int]], list[list[int]], list[list[int]]]:
    """(U, D, V) with U*m*V = D diagonal, d1 | d2, U, V unimodular."""
    M = [[m[0][0], m[0][1]], [m[1][0], m[1][1]]]
    U = [[1, 0], [0, 1]]
    V = [[1, 0], [0, 1]]

    def row_op(i, j, k):  # row i += k * row j
        for t in range(2):
            M[i][t] += k * M[j][t]
            U[i][t] += k * U[j][t]

    def col_op(i, j, k):  # col i += k * col j
        for t in range(2):
            M[t][i] += k * M[t][j]
            V[t][i] += k * V[t][j]

    def swap_rows():
        M[0], M[1] = M[1], M[0]
        U[0], U[1] = U[1], U[0]

    def swap_cols():
        for t in range(2):
            M[t][0], M[t][1] = M[t][1], M[t][0]
            V[t][0], V[t][1] = V[t][1], V[t][0]

    def pivot_smallest():
        nz = [(abs(M[i][j]), i, j) for i in range(2) for j in range(2) if M[i][j] != 0]
        if not nz:
            return False
        _, i, j = min(nz)
        if i == 1:
            swap_rows()
        if j == 1:
            swap_cols()
        return True

    # Euclidean reduction: shrink entries against the smallest pivot until the
    # pivot divides its row and column, then clear them.
    while pivot_smallest():
        if M[1][0] % M[0][0] != 0:
            row_op(1, 0, -(M[1][0] // M[0][0]))
            continue
        if M[0][1] % M[0][0] != 0:
            col_op(1, 0, -(M[0][1] // M[0][0]))
            continue
        row_op(1, 0, -(M[1][0] // M[0][0]))
        col_op(1, 0, -(M[0][1] // M[0][0]))
        break

    # Divisibility d1 | d2: fold the second diagonal entry next to the first
    # and redo the reduction (at most once more for 2x2).
    if M[0][0] != 0 and M[1][1] % M[0][0] != 0:
        col_op(0, 1, 1)
        while M[1][0] != 0:
            if M[1][0] % M[0][0] == 0:
                row_op(1, 0, -(M[1][0] // M[0][0]))
            else:
                row_op(0, 1, -(M[0][0] // M[1][0]))
                swap_rows()
        col_op(1, 0, -(M[0][1] // M[0][0]))
    for i in range(2):  # sign-normalize the diagonal
        if M[i][i] < 0:
            for t in range(2):
                M[i][t] = -M[i][t]
                U[i][t] = -U[i][t]
    return U, M, V


def fixed_point_count_oracle(A: GluingMatrix) -> int | str:
    """Count fixed points of the torus map induced by A.

    These are the solutions of (A - I)x in Z^2 on the torus; via a Smith form
    U (A - I) V = diag(d1, d2) the count is |d1*d2|, infinite when the
    determinant vanishes.  Independent of lefschetz_number computationally:
    this one counts lattice solutions.
    """
    B = [[A.a - 1, A.b], [A.c, A.d - 1]]
    _, D, _ = smith_normal_form_2x2(B)
    d1, d2 = D[0][0], D[1][1]
    if d1 == 0 or d2 == 0:
        return "infinite"
    return abs(d1 * d2)


@dataclass(frozen=True)
class RotationData:
    """Rotation vector (rho1, rho2) of a suspended torus map, exact."""

    rho1: QuadraticNumber
    rho2: QuadraticNumber = QuadraticNumber.rational(0)

    def homological_direction(self) -> tuple[QuadraticNumber, QuadraticNumber, int]:
        return (self.rho1, self.rho2, 1)


def fried_section_test(rot: RotationData, cls: tuple[int, int]) -> bool:
    """Whether the class (p, q) is dual to a global cross section.

    The 1-form -q*dx + p*dt paired with the homological direction
    (rho1, rho2, 1) gives p - q*rho1; the section dual to +-(-q*dx + p*dt)
    exists exactly when this value is nonzero, and the computation is exact.
    """
    p, q = cls
    if p == 0 and q == 0:
        raise ValueError("trivial class")
    value = QuadraticNumber.rational(p) - q * rot.rho1
    return not value.is_zero()


@dataclass(frozen=True)
class SectionVerdict:
    exists: bool
    description: str
    witnesses: tuple[HomClass, ...] = ()


def global_section_obstruction(A: GluingMatrix, slope: QuadraticNumber) -> SectionVerdict:
    """Decide global-torus-section existence for the mapping torus of A when
    the fiberwise flow has the given irrational slope.

    The slope must be an eigen slope of A (the gluing has to preserve the
    flow's line field); hyperbolic A then admits no global section, while an
    integer eigenvector provides the section class.
    """
    if slope.is_rational():
        raise ValueError("slope must be irrational for this obstruction test")
    residual = slope_residual(A, slope)
    es = eigen_slopes(A)
    if not es.all_directions and not residual.is_zero():
        raise ValueError(
            "flow/gluing incompatible: slope is not an eigenvector slope of the matrix"
        )
    ok, witness = has_integer_eigenvector(A)
    if ok:
        if es.all_directions:
            witnesses = (HomClass(1, 0), HomClass(0, 1))
        else:
            assert witness is not None
            witnesses = (witness,)
        return SectionVerdict(True, "section class exists", witnesses)
    assert classify_bundle(A).tag is BundleTag.HYPERBOLIC
    return SectionVerdict(False, "no global torus section")


def random_sl2z(rng, factors: int) -> GluingMatrix:
    """Product of 1..factors random elementary shears (and a possible flip)."""
    M = GluingMatrix.identity()
    for _ in range(factors):
        k = rng.randrange(-3, 4)
        if rng.random() < 0.5:
            E = GluingMatrix(1, k, 0, 1)
        else:
            E = GluingMatrix(1, 0, k, 1)
        M = M @ E
    if rng.random() < 0.5:
        M = M @ GluingMatrix(0, -1, 1, 0)
    return M
