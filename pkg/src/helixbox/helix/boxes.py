"""Single helix boxes: a helix surface in a thin slab around one binding
orbit, extended by product collars to span a full t-interval.

The cube construction lives in coordinates where the binding direction is
+y and the basis-side curves are x-lines.  A unimodular fiber map sends
those to the real classes, a per-copy exact translation places every
boundary curve at a prescribed position, and vertical collars connect the
slab to the interval ends.

Curve positions are tracked exactly: a line of primitive class c through a
point P is determined by chi_c(P) = det(c, P) mod 1.  Interface families
are handed around as lists of rational chi values measured against the
canonical (sign-normalized) class, so welding between neighbouring pieces
is by construction, never by float comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from ..flow import SlopeProfile, cylinder_transversality_margin, direction_at
from ..homology import HomClass, complete_basis, det, is_basis
from ..mesh import BoundaryLoop, MeshResolution, SectionMesh
from .paths import build_lambda_paths
from .surface import helix_surface

PARALLEL_TOL = 1e-9


def ring_vertex_count(cls: HomClass) -> int:
    return max(16, 8 * (abs(cls.a) + abs(cls.b)))


class RingStore:
    """Shared interface circles, so adjacent pieces weld by construction."""

    def __init__(self, mesh: SectionMesh):
        self.mesh = mesh
        self._rings: dict = {}

    def get(self, level: float, cls: HomClass, anchor: Fraction
            ) -> tuple[list[int], list[float]]:
        cls = cls.canonical()
        anchor = anchor % 1
        key = (round(level, 12), cls.as_tuple(), anchor)
        if key not in self._rings:
            n = ring_vertex_count(cls)
            u = complete_basis(cls)
            bx, by = float(anchor) * u.a, float(anchor) * u.b
            ids = [self.mesh.add_vertex(bx + (i / n) * cls.a,
                                        by + (i / n) * cls.b, level)
                   for i in range(n)]
            self._rings[key] = (ids, [i / n for i in range(n)])
        return self._rings[key]


def line_parameter(cls: HomClass, anchor: Fraction, x: float, y: float) -> float:
    """Position in [0, 1) along the canonical cls-line with the given anchor.

    For P = base + w*cls one has det(u, P - base) = -w with u the canonical
    transversal, hence the sign below.
    """
    cls = cls.canonical()
    u = complete_basis(cls)
    bx, by = float(anchor) * u.a, float(anchor) * u.b
    return (u.b * (x - bx) - u.a * (y - by)) % 1.0


def stitch_band(mesh: SectionMesh, a_ids: list[int], a_w: list[float],
                b_ids: list[int], b_w: list[float]) -> list[int]:
    """Triangulate the cylinder band between two closed rings on the same
    fiber line, merging their circle parameters.  Returns triangle indices."""
    na, nb = len(a_ids), len(b_ids)
    shift = min(range(nb), key=lambda j: ((b_w[j] - a_w[0]) % 1.0, j))
    b_ids = b_ids[shift:] + b_ids[:shift]
    bw = [(b_w[(shift + j) % nb] - a_w[0]) % 1.0 for j in range(nb)] + [1.0]
    aw = [(w - a_w[0]) % 1.0 for w in a_w] + [1.0]
    added = []
    i = j = 0
    while i < na or j < nb:
        a_next = aw[i + 1] if i < na else math.inf
        b_next = bw[j + 1] if j < nb else math.inf
        if a_next <= b_next and i < na:
            tri = (a_ids[i % na], a_ids[(i + 1) % na], b_ids[j % nb])
            i += 1
        else:
            tri = (a_ids[i % na], b_ids[(j + 1) % nb], b_ids[j % nb])
            j += 1
        mesh.add_triangle(*tri)
        added.append(len(mesh.triangles) - 1)
    return added


@dataclass(frozen=True)
class HelixBoxSpec:
    """One box: interval, binding data, and the class arithmetic.

    ``gamma0`` is the basis-side primitive class (it generates homology
    together with the binding class), ``gamma1`` the other side, and
    gamma1 = p*gamma0 + q*binding_class exactly.  ``copies`` counts the
    parallel copies of the gamma1-side curve; the gamma0 side then carries
    |p|*copies curves.  ``flipped`` puts the basis side at the top of the
    interval instead of the bottom.
    """

    interval: tuple[float, float]
    binding_level: float
    binding_class: HomClass
    gamma0: HomClass
    gamma1: HomClass
    p: int
    q: int
    copies: int = 1
    flipped: bool = False
    half_width_factor: float = 0.05

    def __post_init__(self) -> None:
        ta, tb = self.interval
        if not ta < self.binding_level < tb:
            raise ValueError("binding level must be inside the interval")
        if self.copies < 1:
            raise ValueError("copies must be positive")
        if self.q != 0:
            if not is_basis(self.gamma0, self.binding_class):
                raise ValueError("gamma0 and the binding class must generate homology")
            if math.gcd(abs(self.p), abs(self.q)) != 1:
                raise ValueError("gamma1 is not primitive; fold the content into copies")
            if self.p == 0:
                raise ValueError("gamma1 parallel to the binding; no transverse box exists")
        if self.p * self.gamma0 + self.q * self.binding_class != self.gamma1:
            raise ValueError("gamma1 != p*gamma0 + q*binding_class")

    def basis_side_count(self) -> int:
        return abs(self.p) * self.copies

    def basis_end(self) -> float:
        return self.interval[1] if self.flipped else self.interval[0]

    def other_end(self) -> float:
        return self.interval[0] if self.flipped else self.interval[1]

    def half_width(self) -> float:
        ta, tb = self.interval
        d = self.half_width_factor * (tb - ta)
        room = 0.45 * min(self.binding_level - ta, tb - self.binding_level)
        return min(d, room)


@lru_cache(maxsize=64)
def _cached_cube(p: int, q: int, s_per_pi: int, rho: int,
                 fiber_scale: int = 1) -> SectionMesh:
    return helix_surface(build_lambda_paths(p, q), MeshResolution(s_per_pi, rho),
                         fiber_scale=fiber_scale)


def uniform_anchors(n: int) -> list[Fraction]:
    return [Fraction(k, n) for k in range(n)]


def staggered_anchors(n: int) -> list[Fraction]:
    """Distinct targets that also keep per-copy binding orbits apart."""
    return [Fraction(k, n) + Fraction(k, 2 * n * n) for k in range(n)]


def _signed_chi(cls: HomClass, chi_canonical: Fraction) -> Fraction:
    """chi against the signed class, given chi against its canonical form."""
    return chi_canonical % 1 if cls == cls.canonical() else (-chi_canonical) % 1


def _solve_translation(beta: HomClass, tau: HomClass, chi_beta: Fraction,
                       chi_tau: Fraction) -> tuple[Fraction, Fraction]:
    """Exact fiber translation D with det(beta, D) = chi_beta, det(tau, D) = chi_tau."""
    denom = det(beta, tau)
    dx = (chi_beta * tau.a - chi_tau * beta.a) / denom
    dy = (chi_beta * tau.b - chi_tau * beta.b) / denom
    assert (beta.a * dy - beta.b * dx - chi_beta) % 1 == 0
    assert (tau.a * dy - tau.b * dx - chi_tau) % 1 == 0
    return dx, dy


def _chi_of(cls: HomClass, pt: tuple[Fraction, Fraction]) -> Fraction:
    return (cls.a * pt[1] - cls.b * pt[0]) % 1


def _uniform_shift_pattern(subset: list[Fraction], p: int) -> Fraction:
    """The shift s with subset = {j/p + s mod 1}; raises if there is none."""
    sub = sorted(f % 1 for f in subset)
    shift = sub[0]
    if any(sub[j] != (shift + Fraction(j, p)) for j in range(p)):
        raise ValueError("interface anchors are not a shifted uniform pattern")
    return shift


def helix_box(spec: HelixBoxSpec, profile: SlopeProfile, res: MeshResolution,
              mesh: SectionMesh | None = None, rings: RingStore | None = None,
              basis_anchors: list[Fraction] | None = None,
              other_anchors: list[Fraction] | None = None,
              tag_ends: bool = True, validate: bool = True) -> SectionMesh:
    """Build the box mesh: helix slab around the binding plus product collars.

    ``basis_anchors`` are the canonical chi positions of the |p|*copies
    basis-side curves (default uniform), ``other_anchors`` of the ``copies``
    curves on the other side (default staggered, which keeps the binding
    orbits of different copies distinct).  Collar transversality is a
    precondition and is verified here; failures name the offending interval.

    ``tag_ends``/``validate`` are disabled by the plan assembler, which owns
    the interface bookkeeping across segments.
    """
    if mesh is None:
        mesh = SectionMesh()
    if rings is None:
        rings = RingStore(mesh)

    if spec.q == 0:
        anchors = basis_anchors if basis_anchors is not None else uniform_anchors(
            spec.basis_side_count())
        _check_margin(profile, spec.gamma0, spec.interval)
        product_cylinders(mesh, rings, profile, spec.gamma0, anchors, spec.interval)
        if tag_ends:
            for level, kind in ((spec.interval[0], "bottom"), (spec.interval[1], "top")):
                for idx, anchor in enumerate(anchors):
                    _tag_ring(mesh, rings, level, spec.gamma0, anchor, kind, idx)
        if validate:
            mesh.validate()
        return mesh

    dx, dy = direction_at(profile, spec.binding_level)
    nu = spec.binding_class
    if abs(dx * nu.b - dy * nu.a) / math.hypot(nu.a, nu.b) > PARALLEL_TOL:
        raise ValueError("flow at the binding level is not parallel to the binding class")
    if dx * nu.a + dy * nu.b <= 0:
        raise ValueError("binding class must be positively oriented along the flow")

    delta = spec.half_width()
    t_lo = spec.binding_level - delta
    t_hi = spec.binding_level + delta
    u0, u1 = spec.basis_end(), spec.other_end()
    _check_margin(profile, spec.gamma0,
                  (min(u0, spec.binding_level), max(u0, spec.binding_level)))
    _check_margin(profile, spec.gamma1,
                  (min(u1, spec.binding_level), max(u1, spec.binding_level)))

    m = spec.copies
    n_basis = spec.basis_side_count()
    if basis_anchors is None:
        basis_anchors = uniform_anchors(n_basis)
    if other_anchors is None:
        other_anchors = staggered_anchors(m)
    if len(basis_anchors) != n_basis or len(other_anchors) != m:
        raise ValueError("anchor counts do not match curve counts")

    beta, tau = spec.gamma0, spec.gamma1
    nu = spec.binding_class
    fiber_scale = max(abs(beta.a) + abs(nu.a), abs(beta.b) + abs(nu.b))
    cube = _cached_cube(spec.p, spec.q, res.s_per_pi, res.rho, fiber_scale)
    sgn_b = 1 if beta == beta.canonical() else -1
    sgn_t = 1 if tau == tau.canonical() else -1
    e = det(beta, nu)
    ap = abs(spec.p)
    sorted_basis = sorted(a % 1 for a in basis_anchors)

    units: list[list[int]] = []
    for k in range(m):
        subset = sorted_basis[k::m]
        shift = _uniform_shift_pattern(subset, ap)
        chi_beta_delta = _signed_chi(beta, shift)
        target_other = other_anchors[(m - 1 - k) % m] % 1
        chi_tau_delta = (_signed_chi(tau, target_other)
                         + Fraction(det(tau, beta), 2)) % 1
        delta_exact = _solve_translation(beta, tau, chi_beta_delta, chi_tau_delta)
        units.extend(_emit_copy(mesh, rings, cube, spec, k, delta_exact,
                                t_lo, t_hi, subset, target_other))
    _orient_units(mesh, profile, units)
    if tag_ends:
        kind0 = "bottom" if u0 < u1 else "top"
        kind1 = "top" if u0 < u1 else "bottom"
        for idx, anchor in enumerate(sorted_basis):
            _tag_ring(mesh, rings, u0, beta, anchor, kind0, idx)
        for idx, anchor in enumerate(other_anchors):
            _tag_ring(mesh, rings, u1, tau, anchor % 1, kind1, idx)
    if validate:
        mesh.validate()
    return mesh


def _tag_ring(mesh: SectionMesh, rings: RingStore, level: float, cls: HomClass,
              anchor: Fraction, kind: str, copy_index: int) -> None:
    ids, _ = rings.get(level, cls, anchor)
    mesh.boundary_loops.append(BoundaryLoop(
        kind, list(ids), cls.canonical(), level, copy_index=copy_index))


def _check_margin(profile: SlopeProfile, cls: HomClass,
                  interval: tuple[float, float]) -> None:
    margin = cylinder_transversality_margin(profile, cls.canonical(), interval)
    if margin <= 0:
        raise ValueError(
            f"cylinder {cls.as_tuple()} tangent to the flow on "
            f"[{interval[0]:.4f}, {interval[1]:.4f}]")


def _emit_copy(mesh: SectionMesh, rings: RingStore, cube: SectionMesh,
               spec: HelixBoxSpec, k: int, delta_exact, t_lo: float,
               t_hi: float, subset: list[Fraction], target_other: Fraction
               ) -> list[list[int]]:
    """Transform one cube copy into the slab, attach both collars; returns the
    triangle-index units added (for orientation normalization)."""
    beta, nu, tau = spec.gamma0, spec.binding_class, spec.gamma1
    u0, u1 = spec.basis_end(), spec.other_end()
    ap = abs(spec.p)
    e = det(beta, nu)
    sgn_b = 1 if beta == beta.canonical() else -1
    dxf, dyf = float(delta_exact[0]), float(delta_exact[1])

    def fiber_map(xc: float, yc: float) -> tuple[float, float]:
        return (beta.a * (xc - 0.5) + nu.a * yc + dxf,
                beta.b * (xc - 0.5) + nu.b * yc + dyf)

    def t_map(tc: float) -> float:
        return (t_hi - tc * (t_hi - t_lo)) if spec.flipped else (t_lo + tc * (t_hi - t_lo))

    tri0 = len(mesh.triangles)
    vmap = {}
    for i, (xc, yc, tc) in enumerate(cube.vertices):
        fx, fy = fiber_map(xc, yc)
        vmap[i] = mesh.add_vertex(fx, fy, t_map(tc))
    for a, b, c in cube.triangles:
        mesh.add_triangle(vmap[a], vmap[b], vmap[c])
    for a, b in cube.corner_edges:
        mesh.add_corner_edge(vmap[a], vmap[b])
    units = [list(range(tri0, len(mesh.triangles)))]

    for loop in cube.loops_of_kind("binding"):
        mesh.boundary_loops.append(BoundaryLoop(
            "binding", _oriented(mesh, [vmap[v] for v in loop.vertices]),
            nu.canonical(), spec.binding_level,
            multiplicity=loop.multiplicity, copy_index=k))

    chi_b_delta = _chi_of(beta, delta_exact)
    for loop in cube.loops_of_kind("bottom"):
        y_level = _loop_y_level(cube, loop, ap)
        chi_canon = (sgn_b * (e * y_level + chi_b_delta)) % 1
        anchor = _match_anchor(subset, chi_canon)
        units.append(_collar(mesh, rings, loop, vmap, beta, anchor, u0))
    for loop in cube.loops_of_kind("top"):
        units.append(_collar(mesh, rings, loop, vmap, tau, target_other, u1))
    return units


def _collar(mesh: SectionMesh, rings: RingStore, loop: BoundaryLoop, vmap,
            cls: HomClass, anchor: Fraction, end_level: float) -> list[int]:
    ring_ids, ring_w = rings.get(end_level, cls, anchor)
    loop_ids = [vmap[v] for v in loop.vertices]
    loop_w = [line_parameter(cls, anchor, *mesh.vertices[v][:2]) for v in loop_ids]
    # the loop may traverse the line against the canonical direction
    steps = [(loop_w[(i + 1) % len(loop_w)] - loop_w[i]) % 1.0
             for i in range(len(loop_w))]
    if sorted(steps)[len(steps) // 2] > 0.5:
        loop_ids.reverse()
        loop_w.reverse()
    tris = stitch_band(mesh, ring_ids, ring_w, loop_ids, loop_w)
    for a, b in zip(loop_ids, loop_ids[1:] + loop_ids[:1]):
        mesh.add_corner_edge(a, b)
    return tris


def _loop_y_level(cube: SectionMesh, loop: BoundaryLoop, ap: int) -> Fraction:
    ys = [cube.vertices[v][1] for v in loop.vertices]
    mean = sum(ys) / len(ys)
    return Fraction(round(mean * ap) % ap, ap)


def _match_anchor(candidates: list[Fraction], value: Fraction) -> Fraction:
    for c in candidates:
        if (c - value) % 1 == 0:
            return c
    raise ValueError(f"no interface anchor matches curve position {value}")


def _oriented(mesh: SectionMesh, loop: list[int]) -> list[int]:
    w = mesh.loop_winding(loop)
    if w.a < 0 or (w.a == 0 and w.b < 0):
        return loop[::-1]
    return loop


def _orient_units(mesh: SectionMesh, profile: SlopeProfile,
                  units: list[list[int]]) -> None:
    """Flip whole construction units so the flow crosses each positively."""
    from ..verify import triangle_margins

    for unit in units:
        if not unit:
            continue
        margins = triangle_margins(mesh, profile, unit)
        best = max(margins, key=abs)
        if best < 0:
            for i in unit:
                a, b, c = mesh.triangles[i]
                mesh.triangles[i] = (a, c, b)


def product_cylinders(mesh: SectionMesh, rings: RingStore, profile: SlopeProfile,
                      cls: HomClass, anchors: list[Fraction],
                      interval: tuple[float, float]) -> None:
    """Vertical cylinders over the cls-lines at the given anchors."""
    lo, hi = interval
    for anchor in anchors:
        ring_lo, w_lo = rings.get(lo, cls, anchor)
        ring_hi, w_hi = rings.get(hi, cls, anchor)
        tris = stitch_band(mesh, ring_lo, w_lo, ring_hi, w_hi)
        _orient_units(mesh, profile, [tris])
