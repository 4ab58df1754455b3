"""Numerical certification that a mesh is a Birkhoff section of a profile flow.

Four independent checks, none of which trusts the construction that produced
the mesh: interior transversality (signed, coorientation must be constant),
boundary homology against the plan, the anchor-cylinder determinant
criterion, and boundedness of the first-return time.  Return times use the
fact that t is conserved: each fiber torus is a 2d problem, where the mesh
cuts out wall polylines and the flow is a straight ray, so first hits are
found by exact segment solves along a lattice walk, with no tolerance
stacking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .flow import SlopeProfile
from .homology import HomClass
from .mesh import SectionMesh

DEFAULT_TAU = 1e-6
DEFAULT_GRID = (16, 16, 16)
DEFAULT_TMAX = 1e3
DET_SAMPLES = 1024


def triangle_margins(mesh: SectionMesh, profile: SlopeProfile,
                     indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Signed normalized volume det(e1, e2, X) per triangle.

    Positive means the flow crosses with the triangle's orientation; the
    normalization (unit flow, unit triangle normal) makes 1 the orthogonal
    crossing.
    """
    tris = mesh.triangles if indices is None else [mesh.triangles[i] for i in indices]
    if not tris:
        return np.zeros(0)
    T = np.asarray(tris)
    verts = mesh.vertices
    V = np.asarray([verts[v] for v in T.ravel()]).reshape(-1, 3, 3)
    e1 = V[:, 1] - V[:, 0]
    e2 = V[:, 2] - V[:, 0]
    e1[:, :2] -= np.round(e1[:, :2])
    e2[:, :2] -= np.round(e2[:, :2])
    tmid = V[:, :, 2].mean(axis=1)
    d = profile.raw_direction_many(tmid)
    X = np.concatenate([d, np.zeros((len(d), 1))], axis=1)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    n = np.cross(e1, e2)
    nn = np.linalg.norm(n, axis=1)
    nn[nn == 0] = np.inf
    return np.einsum("ij,ij->i", n, X) / nn


@dataclass
class TransversalityResult:
    margin: float
    sign: int
    hard_count: int
    excluded_count: int
    excluded_min_abs: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def check_transversality(mesh: SectionMesh, profile: SlopeProfile,
                         tau: float = DEFAULT_TAU) -> TransversalityResult:
    """Minimum |margin| over interior triangles, with constant sign required.

    Triangles touching binding loops or crease edges are evaluated but
    reported separately: at the binding the smooth surface itself has
    vanishing margin in the limit, and creases are an artifact of the
    piecewise-linear boundary paths.
    """
    margins = triangle_margins(mesh, profile)
    excluded_verts: set[int] = set()
    for loop in mesh.loops_of_kind("binding"):
        excluded_verts.update(loop.vertices)
    for a, b in mesh.corner_edges:
        excluded_verts.add(a)
        excluded_verts.add(b)
    hard_idx = [i for i, tri in enumerate(mesh.triangles)
                if not any(v in excluded_verts for v in tri)]
    hard_set = set(hard_idx)
    soft_idx = [i for i in range(len(mesh.triangles)) if i not in hard_set]
    failures = []
    if not hard_idx:
        return TransversalityResult(0.0, 0, 0, len(soft_idx), 0.0,
                                    [("mesh", "no interior triangles to check")])
    hard = margins[hard_idx]
    sign = 1 if np.median(hard) > 0 else -1
    for i, v in zip(hard_idx, hard):
        if abs(v) <= tau:
            failures.append((i, f"margin {v:.3e} below tolerance"))
        elif (1 if v > 0 else -1) != sign:
            failures.append((i, f"coorientation flips (margin {v:.3e})"))
    excluded_min = float(np.min(np.abs(margins[soft_idx]))) if soft_idx else math.inf
    return TransversalityResult(
        margin=float(np.min(np.abs(hard))), sign=sign, hard_count=len(hard_idx),
        excluded_count=len(soft_idx), excluded_min_abs=excluded_min,
        failures=failures)


@dataclass
class LoopCheck:
    kind: str
    computed: tuple[int, int]
    expected: tuple[int, int]
    level: float
    ok: bool
    note: str = ""


def check_boundary_ledger(mesh: SectionMesh, plan=None,
                          profile: SlopeProfile | None = None) -> list[LoopCheck]:
    """Recompute every boundary loop's winding pair and compare to its tag,
    and (when a plan is given) to the plan's families and binding levels."""
    results: list[LoopCheck] = []
    for loop in mesh.boundary_loops:
        w = mesh.loop_winding(loop.vertices).canonical()
        if loop.kind == "binding":
            expected = (loop.multiplicity * loop.cls).canonical()
        else:
            expected = loop.cls.canonical()
        ok = w == expected
        note = ""
        if plan is not None:
            ok2, note = _check_against_plan(loop, w, plan)
            ok = ok and ok2
        if loop.kind == "binding" and profile is not None and ok:
            d = profile.raw_direction(loop.level)
            cr = abs(d[0] * loop.cls.b - d[1] * loop.cls.a)
            nr = math.hypot(*d) * math.hypot(loop.cls.a, loop.cls.b)
            if cr / nr > 1e-6:
                ok = False
                note = "binding class not parallel to the flow at its level"
        results.append(LoopCheck(loop.kind, w.as_tuple(), expected.as_tuple(),
                                 loop.level, ok, note))
    if plan is not None:
        results.extend(_check_counts_against_plan(mesh, plan))
    return results


def _check_against_plan(loop, w: HomClass, plan) -> tuple[bool, str]:
    if loop.kind == "bottom":
        want = plan.bottom_class.canonical()
        if w != want:
            return False, f"bottom loop class {w.as_tuple()} != plan {want.as_tuple()}"
    elif loop.kind == "top":
        want = plan.top_class.canonical()
        if w != want:
            return False, f"top loop class {w.as_tuple()} != plan {want.as_tuple()}"
    else:
        levels = plan.binding_levels()
        if not any(abs(loop.level - lv) <= 1e-9 for lv, _ in levels):
            return False, f"binding level {loop.level} not in plan"
        cls = next(c for lv, c in levels if abs(loop.level - lv) <= 1e-9)
        if loop.cls.canonical() != cls.canonical():
            return False, "binding class differs from plan"
    return True, ""


def _check_counts_against_plan(mesh: SectionMesh, plan) -> list[LoopCheck]:
    out = []
    n_bot = len(mesh.loops_of_kind("bottom"))
    n_top = len(mesh.loops_of_kind("top"))
    out.append(LoopCheck("bottom-count", (n_bot, 0), (plan.bottom_copies, 0), 0.0,
                         n_bot == plan.bottom_copies))
    out.append(LoopCheck("top-count", (n_top, 0), (plan.top_copies, 0), 1.0,
                         n_top == plan.top_copies))
    return out


def check_determinant_criterion(r: int, p: int, q: int, N: int,
                                profile: SlopeProfile,
                                interval: tuple[float, float],
                                basis: tuple[HomClass, HomClass] | None = None
                                ) -> float:
    """Minimum over the interval of r*n - m*(p - (q - r)*N) for the unit flow
    direction (m, n); positive means the rewritten boundary family's cylinder
    stays transverse there.

    With ``basis`` = (gamma0, b1), (m, n) are the components of the direction
    in that basis; without it the raw fiber components are used.
    """
    c1 = p - (q - r) * N
    ts = np.linspace(interval[0], interval[1], DET_SAMPLES)
    d = profile.raw_direction_many(ts)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    if basis is not None:
        g0, b1 = basis
        M = np.array([[g0.a, b1.a], [g0.b, b1.b]], dtype=float)
        comps = np.linalg.solve(M, d.T).T
        m_, n_ = comps[:, 0], comps[:, 1]
    else:
        m_, n_ = d[:, 0], d[:, 1]
    return float(np.min(r * n_ - m_ * c1))


# -- first-return time -------------------------------------------------------


def fiber_walls(mesh: SectionMesh, t_level: float) -> np.ndarray:
    """Intersection segments of the mesh with the fiber torus at t_level.

    Returns an (n, 4) array of segments (x0, y0, x1, y1); each segment's
    endpoints live in the local chart of its own triangle (the segment may
    poke past a face seam but is much shorter than half a period).
    """
    V = mesh.vertex_array()
    T = np.asarray(mesh.triangles)
    if len(T) == 0:
        return np.zeros((0, 4))
    tt = V[:, 2][T]
    lo = tt.min(axis=1)
    hi = tt.max(axis=1)
    cand = np.nonzero((lo <= t_level) & (hi >= t_level) & (hi > lo))[0]
    segs = []
    corners = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))
    for i in cand:
        a, b, c = T[i]
        pa = V[a].copy()
        eb = V[b] - pa
        ec = V[c] - pa
        eb[:2] -= np.round(eb[:2])
        ec[:2] -= np.round(ec[:2])

        def point(u0: float, u1: float) -> tuple[float, float]:
            return (pa[0] + u0 * eb[0] + u1 * ec[0],
                    pa[1] + u0 * eb[1] + u1 * ec[1])

        f = [pa[2] - t_level, pa[2] + eb[2] - t_level, pa[2] + ec[2] - t_level]
        pts = [point(*corners[k]) for k in range(3) if f[k] == 0.0]
        for k in range(3):
            k2 = (k + 1) % 3
            if f[k] * f[k2] < 0.0:
                lam = f[k] / (f[k] - f[k2])
                u0 = corners[k][0] + lam * (corners[k2][0] - corners[k][0])
                u1 = corners[k][1] + lam * (corners[k2][1] - corners[k][1])
                pts.append(point(u0, u1))
        uniq: list[tuple[float, float]] = []
        for pt in pts:
            if not any(abs(pt[0] - o[0]) < 1e-13 and abs(pt[1] - o[1]) < 1e-13
                       for o in uniq):
                uniq.append(pt)
        if len(uniq) >= 2:
            segs.append((uniq[0][0], uniq[0][1], uniq[1][0], uniq[1][1]))
    if not segs:
        return np.zeros((0, 4))
    return np.asarray(segs)


def _prepare_walls(segs: np.ndarray) -> dict:
    """Per-fiber precomputation: the 3x3 block of wall translates around a
    cell, so one vectorized solve per visited cell suffices."""
    p0 = segs[:, 0:2]
    d = segs[:, 2:4] - segs[:, 0:2]
    offs = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=float)
    p9 = (p0[None, :, :] + offs[:, None, :]).reshape(-1, 2)
    d9 = np.tile(d, (9, 1))
    return {"p": p9, "d": d9}


def _first_hit(z: tuple[float, float], a: tuple[float, float],
               walls: dict, tmax: float) -> float:
    """Exact first positive hit time of the ray z + tau*a with the wall
    segments on the torus, by walking the lattice of translates."""
    p9, d9 = walls["p"], walls["d"]
    if len(p9) == 0:
        return math.inf
    ax, ay = a
    cross_ad = ax * d9[:, 1] - ay * d9[:, 0]
    ok = np.abs(cross_ad) > 1e-15
    inv = np.where(ok, cross_ad, 1.0)

    x, y = z
    cx, cy = math.floor(x), math.floor(y)
    step_x = 1 if ax > 0 else -1
    step_y = 1 if ay > 0 else -1
    tdx = math.inf if ax == 0 else abs(1.0 / ax)
    tdy = math.inf if ay == 0 else abs(1.0 / ay)
    tmx = math.inf if ax == 0 else (((cx + 1) - x) / ax if ax > 0 else (cx - x) / ax)
    tmy = math.inf if ay == 0 else (((cy + 1) - y) / ay if ay > 0 else (cy - y) / ay)
    t_enter = 0.0
    best = math.inf
    while t_enter <= min(tmax, best):
        wx = p9[:, 0] + cx - x
        wy = p9[:, 1] + cy - y
        tau_val = (wx * d9[:, 1] - wy * d9[:, 0]) / inv
        sig = (wx * ay - wy * ax) / inv
        good = ok & (tau_val > 1e-12) & (sig >= 0.0) & (sig <= 1.0)
        if np.any(good):
            m = float(np.min(tau_val[good]))
            if m < best:
                best = m
        t_exit = min(tmx, tmy)
        if t_exit > tmax:
            break
        if tmx < tmy:
            cx += step_x
            tmx += tdx
        else:
            cy += step_y
            tmy += tdy
        t_enter = t_exit
    return best


@dataclass
class ReturnTimeResult:
    max_time: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and math.isfinite(self.max_time)


def check_return_time(mesh: SectionMesh, profile: SlopeProfile,
                      grid: tuple[int, int, int] = DEFAULT_GRID,
                      tmax: float = DEFAULT_TMAX,
                      threads: int = 1) -> ReturnTimeResult:
    """March the exact fiber flow from every grid point to its first crossing
    with the mesh's intersection curves on that fiber.

    Grid fibers are offset half a cell so they avoid the interval endpoints.
    A fiber with no intersection curve at all fails immediately: points
    there can never cross the surface.
    """
    nx, ny, nt = grid
    failures = []
    worst = 0.0

    def run_fiber(kt: int):
        nonlocal worst
        t_level = (kt + 0.5) / nt
        segs = fiber_walls(mesh, t_level)
        if len(segs) == 0:
            failures.append(((None, None, t_level), "no section on this fiber"))
            return
        walls = _prepare_walls(segs)
        a = profile.raw_direction(t_level)
        for ix in range(nx):
            for iy in range(ny):
                z = ((ix + 0.5) / nx, (iy + 0.5) / ny)
                tau_hit = _first_hit(z, a, walls, tmax)
                if not math.isfinite(tau_hit) or tau_hit > tmax:
                    failures.append(((z[0], z[1], t_level),
                                     f"no crossing within {tmax}"))
                else:
                    worst = max(worst, tau_hit)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run_fiber, range(nt)))
    else:
        for kt in range(nt):
            run_fiber(kt)
    failures.sort(key=lambda f: (f[0][2] if f[0][2] is not None else -1,
                                 f[0][0] if f[0][0] is not None else -1,
                                 f[0][1] if f[0][1] is not None else -1))
    return ReturnTimeResult(worst if not failures else math.inf, failures)


def check_fiber_embeddedness(mesh: SectionMesh, t_level: float) -> list:
    """Pairwise crossing test of the wall segments on one fiber; a transversal
    crossing away from shared endpoints witnesses surface self-intersection."""
    segs = fiber_walls(mesh, t_level)
    bad = []
    n = len(segs)
    for i in range(n):
        p = segs[i, 0:2]
        r = segs[i, 2:4] - p
        for j in range(i + 1, n):
            q = segs[j, 0:2]
            s = segs[j, 2:4] - q
            for ox in (-1.0, 0.0, 1.0):
                for oy in (-1.0, 0.0, 1.0):
                    qq = q + np.array([ox, oy])
                    denom = r[0] * s[1] - r[1] * s[0]
                    if abs(denom) < 1e-14:
                        continue
                    w = qq - p
                    u = (w[0] * s[1] - w[1] * s[0]) / denom
                    v = (w[0] * r[1] - w[1] * r[0]) / denom
                    eps = 1e-9
                    if eps < u < 1 - eps and eps < v < 1 - eps:
                        bad.append((i, j, float(u), float(v)))
    return bad


@dataclass
class VerificationReport:
    transversality: TransversalityResult
    boundary: list[LoopCheck]
    determinant_min: Optional[float]
    return_time: ReturnTimeResult
    tau: float

    @property
    def passed(self) -> bool:
        return (self.transversality.margin > self.tau
                and self.transversality.passed
                and all(c.ok for c in self.boundary)
                and self.return_time.passed)

    def failures(self) -> list:
        out = [("transversality", f) for f in self.transversality.failures]
        out += [("boundary", (c.kind, c.note)) for c in self.boundary if not c.ok]
        out += [("return-time", f) for f in self.return_time.failures]
        return out


def verify_mesh(mesh: SectionMesh, profile: SlopeProfile, plan=None,
                tau: float = DEFAULT_TAU, grid: tuple[int, int, int] = DEFAULT_GRID,
                tmax: float = DEFAULT_TMAX, threads: int = 1) -> VerificationReport:
    """Run all checks; the determinant criterion runs when the plan carries
    its ledger and anchor data."""
    trans = check_transversality(mesh, profile, tau)
    boundary = check_boundary_ledger(mesh, plan, profile)
    det_min = None
    if plan is not None and getattr(plan, "ledger", None) is not None:
        led = plan.ledger
        det_min = check_determinant_criterion(
            led.r, led.p, led.q, led.N, profile,
            (plan.s1, plan.s2), basis=(plan.gamma0_primitive, plan.b1))
    rt = check_return_time(mesh, profile, grid, tmax, threads)
    return VerificationReport(trans, boundary, det_min, rt, tau)
