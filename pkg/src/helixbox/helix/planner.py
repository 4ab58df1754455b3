"""Planning a Birkhoff section across T^2 x [0, 1] for a non-constant profile.

The plan stacks helix boxes and product cylinders.  Working down from t = 1,
each slope-variation window gets an interface curve family and a binding
orbit forming a basis with it; copies multiply by the basis coefficient at
every hand-off.  Near t = 0 two anchor orbits b1 and b2 = N*b1 + gamma0 at
rational-slope levels s1 < s2 rewrite the arriving family, exactly as the
ledger identity

    (p, q) = r*(0,1) + (p - (q - r)*N)*(1,0) + (q - r)*(N,1)

dictates, so that the final two boxes end on exactly r parallel copies of
the requested bottom curve.  N is pinned by unimodularity against the
arriving class (the shear that makes the last hand-off a basis), and the
intermediate family's transversality on [s1, s2] is the determinant
criterion, verified numerically before the plan is accepted.

All tie-breaks are fixed (candidate classes by sup-norm then
lexicographically, levels by position), so planning is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from ..flow import (SlopeProfile, cylinder_transversality_margin,
                    partition_by_slope_variation, rational_levels)
from ..homology import (HomClass, Ledger, det, express_in_basis, is_basis,
                        ledger_decompose, primitive_part)
from ..mesh import MeshResolution, SectionMesh
from ..verify import check_determinant_criterion
from .boxes import HelixBoxSpec, RingStore, helix_box, product_cylinders, uniform_anchors

DEFAULT_THETA0 = 0.1
EPSILON_CAP = 0.2
SUP_CAP_BINDING = 12
SUP_CAP_SIGMA = 10
END_MARGIN_WINDOW = 0.02
MIN_MARGIN = 1e-9
#: plans at most this expensive are accepted immediately; otherwise the
#: search keeps looking for a cheaper one
ACCEPT_COST = 600


@dataclass(frozen=True)
class Family:
    """A parallel family of closed curves: a signed primitive class and a count."""

    cls: HomClass
    copies: int

    def __post_init__(self) -> None:
        if self.copies < 1:
            raise ValueError("family needs at least one curve")
        if not self.cls.is_primitive():
            raise ValueError("family class must be primitive (fold content into copies)")

    def total(self) -> HomClass:
        return self.copies * self.cls


def normalize_family(cls: HomClass, copies: int) -> Family:
    d, prim = primitive_part(cls)
    return Family(prim, d * copies)


@dataclass
class PlanSegment:
    kind: str  # "box" | "product"
    interval: tuple[float, float]
    bottom: Family
    top: Family
    binding: Optional[HomClass] = None
    binding_level: Optional[float] = None
    p: int = 0
    q: int = 0
    flipped: bool = False

    def box_spec(self) -> HelixBoxSpec:
        basis_fam = self.top if self.flipped else self.bottom
        other_fam = self.bottom if self.flipped else self.top
        return HelixBoxSpec(
            interval=self.interval, binding_level=self.binding_level,
            binding_class=self.binding, gamma0=basis_fam.cls,
            gamma1=other_fam.cls, p=self.p, q=self.q, copies=other_fam.copies,
            flipped=self.flipped)


@dataclass
class SectionPlan:
    segments: list[PlanSegment]
    ledger: Ledger
    b1: HomClass
    b2: HomClass
    s1: float
    s2: float
    epsilon: float
    epsilon_prime: float
    sigma: list[Family]
    gamma0_primitive: HomClass
    theta0: float

    @property
    def bottom_class(self) -> HomClass:
        return self.segments[0].bottom.cls

    @property
    def bottom_copies(self) -> int:
        return self.segments[0].bottom.copies

    @property
    def top_class(self) -> HomClass:
        return self.segments[-1].top.cls

    @property
    def top_copies(self) -> int:
        return self.segments[-1].top.copies

    def binding_levels(self) -> list[tuple[float, HomClass]]:
        return [(s.binding_level, s.binding) for s in self.segments
                if s.kind == "box" and s.q != 0]

    def validate(self, start: float = 0.0) -> None:
        segs = self.segments
        if not segs:
            raise ValueError("empty plan")
        if segs[0].interval[0] != start or segs[-1].interval[1] != 1.0:
            raise ValueError("segments do not span the required interval")
        for a, b in zip(segs, segs[1:]):
            if a.interval[1] != b.interval[0]:
                raise ValueError("segment intervals do not tile")
            if a.top != b.bottom:
                raise ValueError(
                    f"interface mismatch: {a.top} vs {b.bottom} at t={a.interval[1]}")
        if not self.ledger.identity_holds():
            raise ValueError("ledger identity violated")
        if self.b2 != self.ledger.N * self.b1 + self.gamma0_primitive:
            raise ValueError("b2 != N*b1 + gamma0")
        for seg in segs:
            if seg.kind == "box" and seg.q != 0:
                basis_fam = seg.top if seg.flipped else seg.bottom
                if not is_basis(basis_fam.cls, seg.binding):
                    raise ValueError("binding does not generate with its basis-side class")
                other = seg.bottom if seg.flipped else seg.top
                if other.cls != seg.p * basis_fam.cls + seg.q * seg.binding:
                    raise ValueError("box class arithmetic broken")
                if basis_fam.copies != abs(seg.p) * other.copies:
                    raise ValueError("box copy counts broken")


class PlanningError(ValueError):
    pass


def _plan_cost(plan: SectionPlan) -> int:
    """Rough mesh-size proxy: winding turns times strand counts, plus the
    lengths of the interface curves."""
    cost = 0
    for seg in plan.segments:
        cost += (seg.bottom.cls.sup_norm() * seg.bottom.copies
                 + seg.top.cls.sup_norm() * seg.top.copies)
        if seg.kind == "box":
            other = seg.bottom if seg.flipped else seg.top
            cost += (abs(seg.p) + abs(seg.q) + 1) * other.copies
    return cost


def _better(a: Optional[SectionPlan], b: Optional[SectionPlan]) -> Optional[SectionPlan]:
    if a is None:
        return b
    if b is None:
        return a
    return a if _plan_cost(a) <= _plan_cost(b) else b


_query_caches: "weakref.WeakKeyDictionary" = None


def _cache_for(profile: SlopeProfile) -> dict:
    global _query_caches
    import weakref
    if _query_caches is None:
        _query_caches = weakref.WeakKeyDictionary()
    if profile not in _query_caches:
        _query_caches[profile] = {}
    return _query_caches[profile]


@lru_cache(maxsize=8)
def _primitive_classes(sup_cap: int) -> tuple[HomClass, ...]:
    """Canonical primitive classes ordered by sup-norm then lexicographically."""
    out = []
    for s in range(1, sup_cap + 1):
        batch = set()
        for a in range(-s, s + 1):
            for b in range(-s, s + 1):
                if max(abs(a), abs(b)) != s or (a == 0 and b == 0):
                    continue
                c = HomClass(a, b).canonical()
                if c.is_primitive():
                    batch.add(c)
        out.extend(sorted(batch, key=lambda c: (c.a, c.b)))
    return tuple(out)


def _angle_cone(profile: SlopeProfile, interval: tuple[float, float],
                n: int = 256) -> tuple[float, float]:
    cache = _cache_for(profile)
    key = ("cone", round(interval[0], 12), round(interval[1], 12))
    if key not in cache:
        ts = np.linspace(interval[0], interval[1], n)
        ang = profile.unwrapped_angles(ts)
        cache[key] = (float(np.min(ang)), float(np.max(ang)))
    return cache[key]


def _angle_in_cone(cls: HomClass, cone: tuple[float, float]) -> bool:
    base = math.atan2(cls.b, cls.a)
    lo, hi = cone
    for k in range(math.floor((lo - base) / (2 * math.pi)) - 1,
                   math.ceil((hi - base) / (2 * math.pi)) + 2):
        if lo - 1e-9 <= base + 2 * math.pi * k <= hi + 1e-9:
            return True
    return False


def _oriented_level(profile: SlopeProfile, cls: HomClass,
                    window: tuple[float, float]) -> Optional[tuple[HomClass, float]]:
    """First level in the window where the flow is parallel to the cls-line,
    with the class signed along the flow."""
    cache = _cache_for(profile)
    key = ("level", cls.canonical().as_tuple(),
           round(window[0], 12), round(window[1], 12))
    if key in cache:
        return cache[key]
    result = None
    for lv in rational_levels(profile, cls, window):
        if lv.identically_parallel:
            continue
        d = profile.raw_direction(lv.t)
        dot = d[0] * cls.a + d[1] * cls.b
        signed = cls if dot > 0 else -cls
        result = (signed, lv.t)
        break
    cache[key] = result
    return result


def _margin(profile: SlopeProfile, cls: HomClass,
            interval: tuple[float, float]) -> float:
    cache = _cache_for(profile)
    key = ("margin", cls.canonical().as_tuple(),
           round(interval[0], 12), round(interval[1], 12))
    if key not in cache:
        cache[key] = cylinder_transversality_margin(
            profile, cls.canonical(), interval)
    return cache[key]


def plan_section(profile: SlopeProfile, gamma0: tuple[HomClass, int],
                 gamma1: tuple[HomClass, int],
                 theta0: float = DEFAULT_THETA0) -> SectionPlan:
    """Plan a section meeting ``gamma0`` copies at t=0 and ``gamma1`` at t=1.

    Raises PlanningError when the profile has constant slope, when a boundary
    family is tangent to the flow near its end, or when no anchor levels can
    be found in the monotone bottom window.
    """
    fam0 = normalize_family(*gamma0)
    fam1 = normalize_family(*gamma1)

    if _margin(profile, fam0.cls, (0.0, END_MARGIN_WINDOW)) <= MIN_MARGIN:
        raise PlanningError("bottom family tangent to the flow near t=0")
    if _margin(profile, fam1.cls, (1.0 - END_MARGIN_WINDOW, 1.0)) <= MIN_MARGIN:
        raise PlanningError("top family tangent to the flow near t=1")

    # Degenerate head: same family on both ends, transverse throughout.
    if (fam0.cls.canonical() == fam1.cls.canonical()
            and fam0.copies == fam1.copies
            and _margin(profile, fam0.cls, (0.0, 1.0)) > MIN_MARGIN):
        return _product_plan(profile, fam0, theta0)

    # The bottom window prefers the 0.2 cap; when the anchor search cannot
    # find a basis partner of gamma0 in the (narrow) swept direction cone,
    # widen the window as far as the slope stays monotone.  Expensive plans
    # are kept but the wider windows get a chance to beat them.
    last_err: Optional[PlanningError] = None
    best: Optional[SectionPlan] = None
    done_eps = -1.0
    for cap in (EPSILON_CAP, 0.35, 0.5, 0.65, 0.8, 0.9):
        try:
            epsilon, rot_sign = _monotone_window(profile, cap)
        except PlanningError as exc:
            if last_err is None:
                last_err = exc
            break
        if epsilon <= done_eps + 1e-9:
            continue
        done_eps = epsilon
        try:
            breaks = _partition_breaks(profile, theta0, epsilon)
            chain = _choose_chain(profile, breaks, fam1)
            plan = _solve_bottom(profile, fam0, fam1, epsilon, rot_sign,
                                 breaks, chain, theta0)
        except PlanningError as exc:
            last_err = exc
            continue
        if _plan_cost(plan) <= ACCEPT_COST:
            return plan
        best = _better(best, plan)
    if best is not None:
        return best
    assert last_err is not None
    raise last_err


def _product_plan(profile: SlopeProfile, fam: Family, theta0: float) -> SectionPlan:
    g0 = fam.cls
    b1 = _orient_completion(profile, g0)
    plan = SectionPlan(
        segments=[PlanSegment("product", (0.0, 1.0), fam, fam)],
        ledger=ledger_decompose(0, fam.copies, fam.copies, 1),
        b1=b1, b2=b1 + g0, s1=0.0, s2=0.0, epsilon=0.0, epsilon_prime=0.0,
        sigma=[fam], gamma0_primitive=g0, theta0=theta0)
    plan.validate()
    return plan


def _orient_completion(profile: SlopeProfile, g0: HomClass) -> HomClass:
    b1 = __import__("helixbox.homology", fromlist=["complete_basis"]).complete_basis(g0)
    d = profile.raw_direction(0.0)
    m, n = np.linalg.solve(np.array([[g0.a, b1.a], [g0.b, b1.b]], float),
                           np.array(d))
    return b1 if n > 0 else -b1


def _monotone_window(profile: SlopeProfile, cap: float = EPSILON_CAP) -> tuple[float, int]:
    ts = np.linspace(0.0, cap, 1024)
    ang = profile.unwrapped_angles(ts)
    diffs = np.diff(ang)
    sign = 0
    k_last = 0
    for k, dv in enumerate(diffs):
        if abs(dv) < 1e-14:
            break
        s = 1 if dv > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            break
        k_last = k + 1
    if sign == 0 or ts[k_last] < 0.02:
        raise PlanningError("constant slope: no monotone window above t=0")
    return float(ts[k_last]), sign


def _partition_breaks(profile: SlopeProfile, theta0: float,
                      epsilon: float) -> list[float]:
    """Greedy slope-variation windows over [epsilon, 1], with slivers (under
    0.3*theta0 of variation) merged into a neighbour so every window's
    direction cone is wide enough to contain binding candidates."""
    try:
        parts = partition_by_slope_variation(profile, theta0, (epsilon, 1.0))
    except ValueError as exc:
        raise PlanningError(str(exc)) from exc
    merged = []
    for part in parts:
        if merged and part.variation < 0.3 * theta0:
            prev = merged[-1]
            merged[-1] = (prev[0], part.thi)
        else:
            merged.append((part.tlo, part.thi))
    if len(merged) > 1 and (merged[0][1] - merged[0][0]) < 1e-9:
        merged[1] = (merged[0][0], merged[1][1])
        merged.pop(0)
    return [w[0] for w in merged] + [1.0]


@dataclass
class _ChainChoice:
    lines: list[HomClass]          # sigma_i line (canonical), i = 1..n-1
    bindings: list[HomClass]       # nu_i signed, per interval i = 1..n-1
    levels: list[float]


def _choose_chain(profile: SlopeProfile, breaks: list[float],
                  fam1: Family) -> _ChainChoice:
    """Pick interface lines and binding orbits downward from the top window.

    In the top window the binding must sit above every level where the flow
    is parallel to the given top family, so that family's cylinder stays
    transverse from the binding up to t=1.
    """
    n = len(breaks) - 1  # number of chain intervals
    lines: list[Optional[HomClass]] = [None] * (n + 1)
    bindings: list[Optional[HomClass]] = [None] * n
    levels: list[float] = [0.0] * n
    lines[n] = fam1.cls.canonical()
    for i in range(n - 1, -1, -1):
        t_lo, t_hi = breaks[i], breaks[i + 1]
        h = 0.02 * (t_hi - t_lo)
        lo_search = t_lo + h
        if i == n - 1:
            top_parallel = [lv.t for lv in
                            rational_levels(profile, fam1.cls, (t_lo, 1.0))
                            if not lv.identically_parallel]
            if top_parallel:
                lo_search = max(lo_search, max(top_parallel) + h)
                if lo_search >= t_hi - h:
                    raise PlanningError(
                        "top family parallel to the flow too close to t=1")
        window = (lo_search, t_hi - h)
        margin_lo = breaks[i - 1] if i >= 1 else 0.0
        cone = _angle_cone(profile, window)
        upper = lines[i + 1]
        best = None
        for nu_c in _primitive_classes(SUP_CAP_BINDING):
            if not (_angle_in_cone(nu_c, cone) or _angle_in_cone(-nu_c, cone)):
                continue
            p_raw = det(upper, nu_c)
            if p_raw == 0:
                continue  # interface would be parallel to the binding
            found = _oriented_level(profile, nu_c, window)
            if found is None:
                continue
            nu, level = found
            for sig in _primitive_classes(SUP_CAP_SIGMA):
                if abs(det(sig, nu)) != 1:
                    continue
                marg = _margin(profile, sig, (margin_lo, t_hi))
                if marg <= MIN_MARGIN:
                    continue
                score = (abs(p_raw), -round(marg, 6), nu_c.sup_norm(),
                         sig.sup_norm(), nu_c.as_tuple(), sig.as_tuple())
                if best is None or score < best[0]:
                    best = (score, nu, level, sig)
        if best is None:
            raise PlanningError(
                f"no binding/interface pair for window [{t_lo:.4f}, {t_hi:.4f}]")
        _, nu, level, sig = best
        bindings[i] = nu
        levels[i] = level
        lines[i] = sig
    return _ChainChoice(lines[:-1], bindings, levels)  # lines[i] for i=0..n-1


def _signed_chain(chain: _ChainChoice, fam1: Family, polarity: int
                  ) -> tuple[list[HomClass], list[int], list[int], list[int]]:
    """Resolve signs upward from sigma_1 = polarity * line_1; returns
    (sigma signed incl. top, p_i, q_i, copies_i)."""
    n = len(chain.bindings)
    sigma: list[HomClass] = [None] * (n + 1)
    sigma[0] = polarity * chain.lines[0]
    ps, qs = [0] * n, [0] * n
    for i in range(n):
        nu = chain.bindings[i]
        upper_line = chain.lines[i + 1] if i + 1 < n else fam1.cls.canonical()
        p_i, q_i = express_in_basis(upper_line, sigma[i], nu)
        if p_i < 0:
            upper_line = -upper_line
            p_i, q_i = -p_i, -q_i
        sigma[i + 1] = upper_line
        ps[i] = p_i
        qs[i] = q_i
    copies = [0] * (n + 1)
    copies[n] = fam1.copies
    for i in range(n - 1, -1, -1):
        copies[i] = ps[i] * copies[i + 1]
    return sigma, ps, qs, copies


def _solve_bottom(profile, fam0: Family, fam1: Family, epsilon: float,
                  rot_sign: int, breaks: list[float], chain: _ChainChoice,
                  theta0: float) -> SectionPlan:
    plan = _solve_bottom_window(profile, fam0, fam1, 0.0, epsilon, rot_sign,
                                breaks, chain, theta0, depth=0)
    if plan is None:
        raise PlanningError("no anchor levels: could not realize the bottom family")
    return plan


def _solve_bottom_window(profile, fam_bot: Family, fam1: Family, lo: float,
                         epsilon: float, rot_sign: int, breaks: list[float],
                         chain: _ChainChoice, theta0: float, depth: int
                         ) -> Optional[SectionPlan]:
    """Connect ``fam_bot`` at level ``lo`` to the chain at ``epsilon``.

    First tries the two-anchor scheme directly.  When the swept cone over the
    window contains no basis partner of the bottom class at all (a narrow
    twist far from that class's neighbours), one reduction box exchanges the
    bottom family for a family over a partner of a realizable orbit class,
    and the solver recurses on the shrunk window.
    """
    r = fam_bot.copies
    h = 0.02 * (epsilon - lo)
    # s1 must stay below every level where the flow is parallel to the bottom
    # family, so its cylinder reaches down to ``lo`` transversally.
    hi_s1 = epsilon - h
    g0_parallel = [lv.t for lv in rational_levels(profile, fam_bot.cls, (lo, epsilon))
                   if not lv.identically_parallel]
    if g0_parallel:
        hi_s1 = min(hi_s1, min(g0_parallel) - h)
        if hi_s1 <= lo + h:
            return None
    cone_s1 = _angle_cone(profile, (lo + h, hi_s1))
    best: Optional[SectionPlan] = None
    for polarity in (1, -1):
        sigma, ps, qs, copies = _signed_chain(chain, fam1, polarity)
        sigma1 = sigma[0]
        for b1_c in _primitive_classes(SUP_CAP_BINDING):
            if abs(det(fam_bot.cls, b1_c)) != 1:
                continue
            # the cone determines the flow-oriented sign before any level query
            if _angle_in_cone(b1_c, cone_s1):
                b1 = b1_c
            elif _angle_in_cone(-b1_c, cone_s1):
                b1 = -b1_c
            else:
                continue
            g0 = fam_bot.cls if det(b1, fam_bot.cls) == rot_sign else -fam_bot.cls
            x1, y1 = express_in_basis(sigma1, b1, g0)
            if y1 == 0:
                if x1 != -1:
                    continue
                n_candidates = list(range(1, 33))
            else:
                if (x1 + 1) % y1 != 0:
                    continue
                N = (x1 + 1) // y1
                # N = 0 is the degenerate shear: the second anchor is gamma0
                # itself, usable when the flow passes through its direction
                # above s1
                if N < 0:
                    continue
                n_candidates = [N]
            found = _oriented_level(profile, b1_c, (lo + h, hi_s1))
            if found is None or found[0] != b1:
                continue
            s1 = found[1]
            if _margin(profile, fam_bot.cls, (lo, s1)) <= MIN_MARGIN:
                continue
            for N in n_candidates:
                plan = _try_anchor(profile, Family(g0, r), fam1, lo, epsilon,
                                   breaks, chain, sigma, ps, qs, copies, b1,
                                   g0, s1, N, theta0)
                if plan is not None:
                    if _plan_cost(plan) <= ACCEPT_COST:
                        return plan
                    best = _better(best, plan)
    if depth >= 1:
        return best
    reduced = _reduce_bottom(profile, fam_bot, fam1, lo, epsilon, rot_sign,
                             breaks, chain, theta0, depth, best)
    return _better(best, reduced)


def _reduce_bottom(profile, fam_bot: Family, fam1: Family, lo: float,
                   epsilon: float, rot_sign: int, breaks: list[float],
                   chain: _ChainChoice, theta0: float, depth: int,
                   best: Optional[SectionPlan]) -> Optional[SectionPlan]:
    """One flipped box trades the bottom family for copies of a class that
    pairs unimodularly with a realizable orbit, then the window solve recurses.

    Candidates are ranked by the exchange coefficient (which multiplies the
    strand count) and the search keeps the cheapest plan found."""
    h = 0.02 * (epsilon - lo)
    low_window = (lo + h, lo + 0.45 * (epsilon - lo))
    cone = _angle_cone(profile, low_window)
    candidates = []
    for nu_c in _primitive_classes(SUP_CAP_BINDING):
        if not (_angle_in_cone(nu_c, cone) or _angle_in_cone(-nu_c, cone)):
            continue
        if det(fam_bot.cls, nu_c) == 0:
            continue  # bottom family parallel to the binding
        found = _oriented_level(profile, nu_c, low_window)
        if found is None:
            continue
        nu0, s0 = found
        if _margin(profile, fam_bot.cls, (lo, s0)) <= MIN_MARGIN:
            continue
        p0 = abs(det(fam_bot.cls, nu0))
        candidates.append((p0, nu_c.sup_norm(), nu_c.as_tuple(), nu0, s0))
        if len(candidates) >= 10:
            break
    attempts = 0
    for p0, _, _, nu0, s0 in sorted(candidates)[:6]:
        u0 = s0 + 0.05 * (epsilon - s0)
        from ..homology import complete_basis
        u_part = complete_basis(nu0.canonical())
        betas = []
        for k in range(-4, 5):
            for sign in (1, -1):
                cand = sign * u_part + k * nu0.canonical()
                if cand.is_zero() or not cand.is_primitive():
                    continue
                # beta only has to stay transverse up to the hand-off level;
                # above it the recursion enforces its own margins
                marg = _margin(profile, cand, (s0, u0))
                if marg > MIN_MARGIN:
                    betas.append((-round(marg, 6), cand.canonical().as_tuple(), cand))
        for _, _, beta in sorted(betas, key=lambda x: (x[0], x[1]))[:8]:
            attempts += 1
            if attempts > 32:
                return best
            sub = _solve_bottom_window(profile, Family(beta.canonical(), p0 * fam_bot.copies),
                                       fam1, u0, epsilon, rot_sign, breaks,
                                       chain, theta0, depth + 1)
            if sub is None:
                continue
            beta_realized = sub.segments[0].bottom.cls
            gamma_low = fam_bot.cls
            p_r, q_r = express_in_basis(gamma_low, beta_realized, nu0)
            if p_r < 0:
                gamma_low = -gamma_low
                p_r, q_r = -p_r, -q_r
            if q_r == 0:
                continue  # bottom parallel to the reduction basis; no box needed
            seg0 = PlanSegment(
                "box", (lo, u0), Family(gamma_low, fam_bot.copies),
                Family(beta_realized, p0 * fam_bot.copies),
                binding=nu0, binding_level=s0, p=p_r, q=q_r, flipped=True)
            sub.segments.insert(0, seg0)
            try:
                sub.validate(start=lo)
            except ValueError:
                sub.segments.pop(0)
                continue
            if _plan_cost(sub) <= ACCEPT_COST:
                return sub
            best = _better(best, sub)
    return best


def _try_anchor(profile, fam_bot: Family, fam1: Family, lo: float,
                epsilon: float, breaks: list[float], chain: _ChainChoice,
                sigma, ps, qs, copies, b1: HomClass, g0: HomClass, s1: float,
                N: int, theta0: float) -> Optional[SectionPlan]:
    r = fam_bot.copies
    s = copies[0]
    sigma1 = sigma[0]
    h = 0.02 * (epsilon - lo)
    b2 = N * b1 + g0
    found = _oriented_level(profile, b2, (s1 + h, epsilon - h))
    if found is None:
        return None
    b2_signed, s2 = found
    if b2_signed != b2:
        return None  # the level realizes -b2; wrong side of the cone
    x1, y1 = express_in_basis(sigma1, b1, g0)
    p_led, q_led = s * x1, s * y1
    ledger = ledger_decompose(p_led, q_led, r, N)
    c1 = ledger.c1
    total_mid = r * g0 + c1 * b1
    if total_mid.is_zero():
        return None
    d, gamma_mid = primitive_part(total_mid)
    # transversality of the rewritten family between the anchors
    det_min = check_determinant_criterion(r, p_led, q_led, N, profile,
                                          (s1, s2), basis=(g0, b1))
    if det_min <= 0:
        return None
    if _margin(profile, gamma_mid, (s1, s2)) <= MIN_MARGIN:
        return None
    if _margin(profile, sigma1, (s2, breaks[1])) <= MIN_MARGIN:
        return None
    eps_prime = 0.5 * (s1 + s2)

    segments: list[PlanSegment] = []
    fam_mid = Family(gamma_mid, d)
    fam_sig1 = Family(sigma1, s)
    # box A on [lo, eps'] with binding b1 at s1
    if c1 == 0:
        segments.append(PlanSegment("product", (lo, eps_prime), fam_bot, fam_bot))
        fam_mid = fam_bot
    else:
        p_a, q_a = express_in_basis(gamma_mid, g0, b1)
        segments.append(PlanSegment(
            "box", (lo, eps_prime), Family(g0, r), fam_mid,
            binding=b1, binding_level=s1, p=p_a, q=q_a, flipped=False))
    # box B on [eps', epsilon] with binding b2 at s2, basis side on top
    if gamma_mid.canonical() == sigma1.canonical():
        if d != s:
            return None
        segments.append(PlanSegment("product", (eps_prime, epsilon),
                                    fam_mid, fam_mid))
        fam_sig1 = fam_mid
    else:
        p_b, q_b = express_in_basis(gamma_mid, sigma1, b2)
        if abs(p_b) * d != s:
            return None
        segments.append(PlanSegment(
            "box", (eps_prime, epsilon), fam_mid, fam_sig1,
            binding=b2, binding_level=s2, p=p_b, q=q_b, flipped=True))
    # chain boxes upward
    n = len(chain.bindings)
    for i in range(n):
        w_lo, w_hi = breaks[i], breaks[i + 1]
        bottom = Family(sigma[i], copies[i])
        top = Family(sigma[i + 1], copies[i + 1])
        if qs[i] == 0:
            if bottom != top:
                return None
            segments.append(PlanSegment("product", (w_lo, w_hi), bottom, top))
        else:
            segments.append(PlanSegment(
                "box", (w_lo, w_hi), bottom, top, binding=chain.bindings[i],
                binding_level=chain.levels[i], p=ps[i], q=qs[i]))
    # the plan's stated boundary families use the signed classes we realized
    plan = SectionPlan(
        segments=segments, ledger=ledger, b1=b1, b2=b2, s1=s1, s2=s2,
        epsilon=epsilon, epsilon_prime=eps_prime,
        sigma=[Family(sigma[i], copies[i]) for i in range(n)],
        gamma0_primitive=g0, theta0=theta0)
    try:
        plan.validate(start=lo)
    except ValueError:
        return None
    return plan


def assemble_mesh(plan: SectionPlan, profile: SlopeProfile,
                  res: MeshResolution) -> SectionMesh:
    """One welded mesh for the whole plan; every interface family sits at the
    uniform anchor positions, so neighbouring segments share their rings."""
    plan.validate()
    mesh = SectionMesh()
    rings = RingStore(mesh)
    for seg in plan.segments:
        if seg.kind == "product":
            anchors = uniform_anchors(seg.bottom.copies)
            from .boxes import _check_margin
            _check_margin(profile, seg.bottom.cls, seg.interval)
            product_cylinders(mesh, rings, profile, seg.bottom.cls, anchors,
                              seg.interval)
        else:
            spec = seg.box_spec()
            basis_fam = seg.top if seg.flipped else seg.bottom
            other_fam = seg.bottom if seg.flipped else seg.top
            helix_box(spec, profile, res, mesh=mesh, rings=rings,
                      basis_anchors=uniform_anchors(basis_fam.copies),
                      other_anchors=uniform_anchors(other_fam.copies),
                      tag_ends=False, validate=False)
    from .boxes import _tag_ring
    bot = plan.segments[0].bottom
    for idx, anchor in enumerate(uniform_anchors(bot.copies)):
        _tag_ring(mesh, rings, 0.0, bot.cls, anchor, "bottom", idx)
    top = plan.segments[-1].top
    for idx, anchor in enumerate(uniform_anchors(top.copies)):
        _tag_ring(mesh, rings, 1.0, top.cls, anchor, "top", idx)
    mesh.validate()
    return mesh
