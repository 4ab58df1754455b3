"""Ruled helix surfaces spanned between the binding axis and boundary paths.

Each path lambda_i(s) = (y(s), r(s), theta(s)) in cylindrical coordinates
about the axis {x=1/2, t=1/2} spans the ruled sheet

    phi_i(s, rho) = ((1-rho)*g(s) + rho*y(s),  rho*r(s),  theta(s)),

where g is the identity or the reversal according to the path's y direction,
so the rho=0 edge sweeps the axis once per sheet and the rho=1 edge is the
path itself.  Sheets are triangulated on an (s, rho) grid, welded along their
shared radial edges and along coincident vertical slits, and the quotient
boundary decomposes into one top loop, |p| bottom loops and a single binding
loop of multiplicity |q|.
"""

from __future__ import annotations

import math
from fractions import Fraction

from ..homology import HomClass
from ..mesh import BoundaryLoop, MeshResolution, SectionMesh
from .paths import BoundaryPath, successor_map, vertical_twin_pairs


def _theta_raw(x: float, t: float) -> float:
    return math.atan2(x - 0.5, t - 0.5)


class _SampledPath:
    """A path refined to mesh rows.

    Subdivision of each straight segment is driven by its winding-angle span
    and by its fiber displacement (steps must stay well under half a period
    for minimum-image arithmetic downstream).  ``fiber_scale`` accounts for a
    later unimodular change of fiber coordinates: steps are kept small enough
    that the mapped mesh still moves less than an eighth of a period per row.
    """

    def __init__(self, path: BoundaryPath, s_per_pi: int, fiber_scale: int = 1):
        self.path = path
        thetas = path.unwrapped_thetas()
        verts = path.vertices
        svals = path.s_params
        rows_s: list[float] = [float(svals[0])]
        rows_xyt: list[tuple[float, float, float]] = [tuple(map(float, verts[0]))]
        corner_rows: list[int] = [0]
        self.segment_row_ranges: list[tuple[int, int]] = []
        for k in range(len(verts) - 1):
            a, b = verts[k], verts[k + 1]
            dth = abs(thetas[k + 1] - thetas[k])
            # the -1e-9 keeps twin slits (exact quarter turns) at equal counts
            n_sub = max(
                1,
                math.ceil(dth / math.pi * s_per_pi - 1e-9),
                math.ceil(8 * fiber_scale * abs(float(b[0] - a[0]))),
                math.ceil(8 * fiber_scale * abs(float(b[1] - a[1]))),
            )
            first_row = len(rows_s) - 1
            for j in range(1, n_sub + 1):
                w = Fraction(j, n_sub)
                s = svals[k] + (svals[k + 1] - svals[k]) * w
                pt = tuple(float(a[i] + (b[i] - a[i]) * w) for i in range(3))
                rows_s.append(float(s))
                rows_xyt.append(pt)
            corner_rows.append(len(rows_s) - 1)
            self.segment_row_ranges.append((first_row, len(rows_s) - 1))
        self.s = rows_s
        self.xyt = rows_xyt
        self.corner_rows = corner_rows
        self.n_rows = len(rows_s)
        self.cyl: list[tuple[float, float, float]] = []
        prev_theta = None
        for (x, y, t) in rows_xyt:
            r = math.hypot(x - 0.5, t - 0.5)
            th = _theta_raw(x, t)
            if prev_theta is not None:
                th += 2 * math.pi * round((prev_theta - th) / (2 * math.pi))
            prev_theta = th
            self.cyl.append((y, r, th))

    def g(self, s: float) -> float:
        return s if self.path.y_direction > 0 else 1.0 - s


def helix_surface(paths: list[BoundaryPath], res: MeshResolution,
                  fiber_scale: int = 1) -> SectionMesh:
    """Triangulated union of the ruled sheets over the given paths.

    The mesh lives in cube coordinates with fiber faces identified; boundary
    loops are tagged and canonically oriented.  ``fiber_scale`` refines the
    sampling for meshes that will be pushed through a unimodular fiber map.
    """
    if res.s_per_pi < 16:
        raise ValueError("need at least 16 path samples per pi of winding")
    if res.rho < 8:
        raise ValueError("need at least 8 radial rings")
    sampled = [_SampledPath(p, res.s_per_pi, fiber_scale) for p in paths]
    for sp in sampled:
        for _, r, _ in sp.cyl:
            if r <= 1e-12:
                raise ValueError("path reaches the binding axis")
        sign = sp.path.theta_sign
        for a, b in zip(sp.cyl, sp.cyl[1:]):
            if sign * (b[2] - a[2]) <= 0:
                raise ValueError("winding angle not monotone at sampling resolution")

    succ = successor_map(paths)
    twins = vertical_twin_pairs(paths)

    mesh = SectionMesh()
    n_rho = res.rho
    ids: list[list[list[int]]] = []
    for sp in sampled:
        sheet = []
        for k in range(sp.n_rows):
            y_p, r_p, th = sp.cyl[k]
            s = sp.s[k]
            row = []
            for j in range(n_rho + 1):
                rho = j / n_rho
                y = (1 - rho) * sp.g(s) + rho * y_p
                rr = rho * r_p
                x = 0.5 + rr * math.sin(th)
                t = 0.5 + rr * math.cos(th)
                row.append(mesh.add_vertex(x, y, t))
            sheet.append(row)
        ids.append(sheet)

    # Radial welds: last row of sheet i is the first row of its successor.
    remap: dict[int, int] = {}

    def union(a: int, b: int) -> None:
        ra, rb = _resolve(remap, a), _resolve(remap, b)
        if ra != rb:
            remap[max(ra, rb)] = min(ra, rb)

    for i in range(len(sampled)):
        for a, b in zip(ids[i][-1], ids[succ[i]][0]):
            union(a, b)

    # Slit welds: coincident vertical boundary runs, outer column only.
    for (pi_, ki), (pj, kj) in twins:
        rows_i = _rows_of_segment(sampled[pi_], ki)
        rows_j = _rows_of_segment(sampled[pj], kj)
        if len(rows_i) != len(rows_j):
            raise ValueError("slit twins sampled at different resolutions")
        for a, b in zip(rows_i, reversed(rows_j)):
            union(ids[pi_][a][n_rho], ids[pj][b][n_rho])

    def rid(i: int, k: int, j: int) -> int:
        return _resolve(remap, ids[i][k][j])

    for i, sp in enumerate(sampled):
        for k in range(sp.n_rows - 1):
            for j in range(n_rho):
                v00 = rid(i, k, j)
                v10 = rid(i, k + 1, j)
                v11 = rid(i, k + 1, j + 1)
                v01 = rid(i, k, j + 1)
                mesh.add_triangle(v00, v10, v11)
                mesh.add_triangle(v00, v11, v01)

    # Creases: radial columns at path corners and at the sheet hand-offs, and
    # the welded slit columns.
    for i, sp in enumerate(sampled):
        for k in sp.corner_rows:
            for j in range(n_rho):
                mesh.add_corner_edge(rid(i, k, j), rid(i, k, j + 1))
    for (pi_, ki), _ in twins:
        rows_i = _rows_of_segment(sampled[pi_], ki)
        for a, b in zip(rows_i, rows_i[1:]):
            mesh.add_corner_edge(rid(pi_, a, n_rho), rid(pi_, b, n_rho))

    _tag_boundaries(mesh, sampled, ids, remap, succ, n_rho)
    _compact(mesh)
    mesh.validate()
    return mesh


def _rows_of_segment(sp: _SampledPath, seg_index: int) -> list[int]:
    lo, hi = sp.segment_row_ranges[seg_index]
    return list(range(lo, hi + 1))


def _resolve(remap: dict[int, int], v: int) -> int:
    while v in remap:
        v = remap[v]
    return v


def _canonical_loop(mesh: SectionMesh, loop: list[int]) -> list[int]:
    w = mesh.loop_winding(loop)
    if w.a < 0 or (w.a == 0 and w.b < 0):
        return loop[::-1]
    return loop


def _tag_boundaries(mesh, sampled, ids, remap, succ, n_rho) -> None:
    def rid(i, k, j):
        return _resolve(remap, ids[i][k][j])

    # Binding loop: rho=0 rows chained in hand-off order; the last row of each
    # sheet is already identified with the next sheet's first row.
    order = [0]
    while succ[order[-1]] != 0:
        order.append(succ[order[-1]])
    binding: list[int] = []
    for i in order:
        for k in range(sampled[i].n_rows - 1):
            binding.append(rid(i, k, 0))
    wind = mesh.loop_winding(binding)
    mult = max(abs(wind.a), abs(wind.b))
    mesh.boundary_loops.append(BoundaryLoop(
        "binding", _canonical_loop(mesh, binding), HomClass(0, 1), 0.5,
        multiplicity=mult))

    binding_edges = set()
    n = len(binding)
    for idx in range(n):
        e = (binding[idx], binding[(idx + 1) % n])
        binding_edges.add((min(e), max(e)))

    counts = mesh.edge_use_counts()
    outer = [e for e, c in counts.items() if c == 1 and e not in binding_edges]
    for loop in _walk_loops(outer):
        level = 1.0 if sum(mesh.vertices[v][2] for v in loop) / len(loop) > 0.5 else 0.0
        kind = "top" if level == 1.0 else "bottom"
        wind = mesh.loop_winding(loop).canonical()
        mesh.boundary_loops.append(BoundaryLoop(
            kind, _canonical_loop(mesh, loop), wind, level))
    bottoms = sorted(mesh.loops_of_kind("bottom"),
                     key=lambda l: min(mesh.vertices[v][1] for v in l.vertices))
    for idx, loop in enumerate(bottoms):
        loop.copy_index = idx


def _walk_loops(edges: list[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    unused = {(min(e), max(e)) for e in edges}
    loops = []
    while unused:
        a, b = min(unused)
        unused.discard((a, b))
        cycle = [a, b]
        while True:
            nxt = None
            for cand in sorted(adj[cycle[-1]]):
                key = (min(cycle[-1], cand), max(cycle[-1], cand))
                if key in unused:
                    nxt = cand
                    break
            if nxt is None:
                break
            unused.discard((min(cycle[-1], nxt), max(cycle[-1], nxt)))
            if nxt == cycle[0]:
                break
            cycle.append(nxt)
        loops.append(cycle)
    return loops


def _compact(mesh: SectionMesh) -> None:
    """Drop vertices orphaned by welding and reindex everything."""
    used: set[int] = set()
    for tri in mesh.triangles:
        used.update(tri)
    for loop in mesh.boundary_loops:
        used.update(loop.vertices)
    for e in mesh.corner_edges:
        used.update(e)
    new_ids = {old: new for new, old in enumerate(sorted(used))}
    mesh.vertices = [mesh.vertices[old] for old in sorted(used)]
    mesh.triangles = [(new_ids[a], new_ids[b], new_ids[c])
                      for a, b, c in mesh.triangles]
    for loop in mesh.boundary_loops:
        loop.vertices = [new_ids[v] for v in loop.vertices]
    mesh.corner_edges = {(min(new_ids[a], new_ids[b]), max(new_ids[a], new_ids[b]))
                         for a, b in mesh.corner_edges}
