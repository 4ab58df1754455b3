"""Piecewise-linear boundary paths on the cube for helix surfaces.

Setting: the cube [0,1]^3 with coordinates (x, y, t), fiber faces identified
(x mod 1, y mod 1), flow along +y, binding axis {x = 1/2, t = 1/2}.  For a
coprime pair (p, q) the target top curve is the line of class (p, q) through
(0, 0) on the face t=1; it meets that face in p+q-1 segments (p, q > 0).

Each path is a chain of straight segments on the cube boundary whose (x, t)
trace stays on the boundary square, so the winding angle about the axis is
strictly monotone along it.  |q| paths together consume all top-face
segments; bridges over the side and bottom faces connect consecutive
segments, and the union closes up in the quotient.

All vertex coordinates are exact rationals; the combinatorics (path hand-off,
slit twins, face membership) is decided by exact comparisons, never floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

Vertex = tuple[Fraction, Fraction, Fraction]

FACE_WIDTH = Fraction(1, 50)  # s-width allotted to each bridge run
HALF = Fraction(1, 2)


def _theta_raw(x: float, t: float) -> float:
    """Winding angle about the axis; monotone increasing along q>0 paths."""
    return math.atan2(x - 0.5, t - 0.5)


@dataclass(frozen=True)
class BoundaryPath:
    """One lambda path: exact vertices, strictly increasing s, winding sign.

    ``s_params`` run from 0 to 1; ``theta_sign`` is +1 when the unwrapped
    angle increases along the path.  ``y_direction`` is +1 when y runs from 0
    to 1 along the path (it runs monotonically one way or the other).
    """

    vertices: tuple[Vertex, ...]
    s_params: tuple[Fraction, ...]
    theta_sign: int
    y_direction: int

    def __post_init__(self) -> None:
        if len(self.vertices) != len(self.s_params):
            raise ValueError("one s parameter per vertex required")
        for a, b in zip(self.s_params, self.s_params[1:]):
            if not a < b:
                raise ValueError("s parameters must be strictly increasing")
        for v in self.vertices:
            if not _on_cube_boundary(v):
                raise ValueError(f"vertex {v} is not on the cube boundary")

    def segments(self) -> Iterator[tuple[Vertex, Vertex, Fraction, Fraction]]:
        for i in range(len(self.vertices) - 1):
            yield (self.vertices[i], self.vertices[i + 1],
                   self.s_params[i], self.s_params[i + 1])

    def unwrapped_thetas(self) -> list[float]:
        """Angle at each vertex, unwrapped along the path."""
        out = []
        prev = None
        for x, _, t in self.vertices:
            raw = _theta_raw(float(x), float(t))
            if prev is None:
                out.append(raw)
            else:
                k = round((prev - raw) / (2 * math.pi))
                out.append(raw + 2 * math.pi * k)
            prev = out[-1]
        return out

    def total_turn(self) -> float:
        th = self.unwrapped_thetas()
        return th[-1] - th[0]

    def min_radius(self) -> float:
        return min(math.hypot(float(x) - 0.5, float(t) - 0.5)
                   for x, _, t in self.vertices)

    def start(self) -> Vertex:
        return self.vertices[0]

    def end(self) -> Vertex:
        return self.vertices[-1]


def _on_cube_boundary(v: Vertex) -> bool:
    x, y, t = v
    inside = all(0 <= c <= 1 for c in v)
    on_face = any(c in (0, 1) for c in v)
    return inside and on_face


def _top_face_trace(p: int, q: int) -> list[tuple[Fraction, Fraction, Fraction, Fraction]]:
    """The p+q-1 segments of the (p, q) line through (0,0) in the unit square,
    as (x0, y0, x1, y1), ordered along the line; p, q > 0 coprime."""
    breaks = sorted({Fraction(k, p) for k in range(p)} |
                    {Fraction(m, q) for m in range(q)} | {Fraction(1)})
    segs = []
    for u0, u1 in zip(breaks, breaks[1:]):
        x0, y0 = (u0 * p) % 1, (u0 * q) % 1
        x1, y1 = u1 * p - (u0 * p - x0), u1 * q - (u0 * q - y0)
        segs.append((x0, y0, x1, y1))
    return segs


def _segment_from(p: int, q: int, x0: Fraction, y0: Fraction) -> tuple[Fraction, Fraction]:
    """Exit point of the (p, q)-line leaving (x0, y0) inside the unit square."""
    u = min(Fraction(1 - x0, p), Fraction(1 - y0, q))
    return x0 + u * p, y0 + u * q


def _build_positive(p: int, q: int) -> list[list[Vertex]]:
    """The recipe for p, q > 0: returns raw vertex chains, one per path."""
    one = Fraction(1)
    zero = Fraction(0)
    h_points = sorted({(Fraction(m * p, q) % 1) for m in range(q)})
    assert h_points[0] == 0 and len(h_points) == q

    chains: list[list[Vertex]] = []
    corner_used = False
    for idx, xs in enumerate(h_points):
        if idx == 0:
            # First path: bridge from the bottom face onto the left edge, then
            # climb to the top face at (0, 0, 1).
            chain: list[Vertex] = [(HALF, zero, zero), (zero, zero, zero),
                                   (zero, zero, one)]
            cur = (zero, zero)
        else:
            chain = [(xs, zero, one)]
            cur = (xs, zero)
        while True:
            x1, y1 = _segment_from(p, q, cur[0], cur[1])
            chain.append((x1, y1, one))
            if y1 == 1 and x1 < 1:
                break  # ends on the far side of the top face
            if x1 == 1 and y1 == 1:
                # Terminal bridge back down to the axis level of the start.
                chain.append((one, one, zero))
                chain.append((HALF, one, zero))
                assert not corner_used
                corner_used = True
                break
            assert x1 == 1 and y1 < 1
            chain.append((one, y1, zero))
            chain.append((zero, y1, zero))
            chain.append((zero, y1, one))
            cur = (zero, y1)
        chains.append(chain)
    assert corner_used
    return chains


def _transform_chains(chains: list[list[Vertex]], flip_x: bool, flip_y: bool,
                      reverse: bool) -> list[list[Vertex]]:
    out = []
    for chain in chains:
        c = [((1 - x) if flip_x else x, (1 - y) if flip_y else y, t)
             for x, y, t in chain]
        if reverse:
            c = c[::-1]
        out.append(c)
    return out


def _assign_s(chain: list[Vertex]) -> list[Fraction]:
    """s values at the chain vertices: bridge runs get FACE_WIDTH of s each,
    the y-moving segments share the rest proportionally to |dy|."""
    n = len(chain)
    moves = []
    for a, b in zip(chain, chain[1:]):
        moves.append(abs(b[1] - a[1]))
    total_dy = sum(moves)
    assert total_dy == 1
    # Identify bridge runs: maximal blocks of consecutive zero-dy segments.
    runs = 0
    i = 0
    while i < n - 1:
        if moves[i] == 0:
            runs += 1
            while i < n - 1 and moves[i] == 0:
                i += 1
        else:
            i += 1
    width = FACE_WIDTH
    if runs and runs * width > HALF:
        width = HALF / runs
    y_scale = 1 - runs * width

    s = [Fraction(0)]
    i = 0
    while i < n - 1:
        if moves[i] == 0:
            j = i
            while j < n - 1 and moves[j] == 0:
                j += 1
            steps = j - i
            for k in range(1, steps + 1):
                s.append(s[i] + width * Fraction(k, steps))
            i = j
        else:
            s.append(s[-1] + y_scale * moves[i])
            i += 1
    assert s[-1] == 1, s[-1]
    return s


def build_lambda_paths(p: int, q: int) -> list[BoundaryPath]:
    """The |q| boundary paths for the coprime pair (p, q), p and q nonzero.

    Their union crosses the top face in |p|+|q|-1 segments of the (p, q) line
    family, crosses the bottom face in |p| loops parallel to the x-circle,
    and each path winds monotonically about the axis with the sign of q.
    """
    if q == 0:
        raise ValueError("product case, no helix needed")
    if p == 0:
        raise ValueError("class parallel to the binding, no helix needed")
    if math.gcd(abs(p), abs(q)) != 1:
        raise ValueError("non-primitive class; use copies")

    chains = _build_positive(abs(p), abs(q))
    flip_x = p < 0
    flip_y = q < 0
    # Flips that touch x reverse the winding; traversal reversal restores the
    # required sign (the winding sign must follow q).
    theta_after_flips = -1 if flip_x else 1
    reverse = theta_after_flips != (1 if q > 0 else -1)
    chains = _transform_chains(chains, flip_x, flip_y, reverse)

    paths = []
    for chain in chains:
        s = _assign_s(chain)
        ydir = 1 if chain[-1][1] > chain[0][1] else -1
        paths.append(BoundaryPath(tuple(chain), tuple(s),
                                  theta_sign=1 if q > 0 else -1,
                                  y_direction=ydir))
    _check_monotone(paths)
    return paths


def _check_monotone(paths: list[BoundaryPath]) -> None:
    for path in paths:
        th = path.unwrapped_thetas()
        for a, b in zip(th, th[1:]):
            if path.theta_sign * (b - a) <= 0:
                raise ValueError("winding angle not strictly monotone along path")
        if path.min_radius() <= 0:
            raise ValueError("path touches the binding axis")


def top_segment_count(paths: list[BoundaryPath]) -> int:
    """Number of top-face (t = 1) y-moving segments across all paths."""
    count = 0
    for path in paths:
        for a, b, _, _ in path.segments():
            if a[2] == 1 and b[2] == 1 and a[1] != b[1]:
                count += 1
    return count


def successor_map(paths: list[BoundaryPath]) -> dict[int, int]:
    """Which path's start is the quotient image of each path's end.

    End and start match when their (x mod 1, t) agree exactly and their y
    coordinates agree mod 1.  The result is a permutation with one cycle.
    """
    succ: dict[int, int] = {}
    for i, path in enumerate(paths):
        xe, ye, te = path.end()
        for j, other in enumerate(paths):
            xs, ys, ts = other.start()
            if (xe % 1, te) == (xs % 1, ts) and (ye - ys) % 1 == 0:
                succ[i] = j
                break
        else:
            raise ValueError(f"path {i} has no quotient successor")
    # must be a permutation forming a single cycle
    if sorted(succ.values()) != list(range(len(paths))):
        raise ValueError("path hand-off is not a permutation")
    seen = {0}
    k = succ[0]
    while k != 0:
        seen.add(k)
        k = succ[k]
    if len(seen) != len(paths):
        raise ValueError("path hand-off does not form a single cycle")
    return succ


def vertical_twin_pairs(paths: list[BoundaryPath]) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Pairs of full-height vertical segments identified in the quotient.

    Each vertical run at x in {0, 1} with constant y has a twin at the other
    x value with the same y mod 1; the ruled surface's outer edges along the
    two twins coincide in T^2 x I and are welded.  Returns pairs of
    (path index, segment index).
    """
    verts: list[tuple[int, int, Fraction, Fraction, int]] = []
    for i, path in enumerate(paths):
        for k, (a, b, _, _) in enumerate(path.segments()):
            if a[0] == b[0] and a[0] in (0, 1) and a[1] == b[1] and a[2] != b[2]:
                verts.append((i, k, a[0], a[1], 1 if b[2] > a[2] else -1))
    pairs = []
    used = set()
    for n, (i, k, x, y, _) in enumerate(verts):
        if (i, k) in used:
            continue
        for m in range(n + 1, len(verts)):
            j, l, x2, y2, _ = verts[m]
            if (j, l) in used:
                continue
            if x2 != x and (y2 - y) % 1 == 0:
                pairs.append(((i, k), (j, l)))
                used.update([(i, k), (j, l)])
                break
        else:
            raise ValueError("unpaired vertical boundary segment")
    return pairs
