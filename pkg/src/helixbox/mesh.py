"""Triangle meshes for immersed surfaces in T^2 x I.

Vertices store (x, y, t) with the fiber coordinates reduced mod 1; all
geometry on the fiber torus therefore uses minimum-image differences, which
is valid because triangles are always small compared to the fundamental
domain.  Boundary loops are tagged (binding orbit / bottom / top) and carry
their homology class as a winding pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .homology import HomClass


@dataclass(frozen=True)
class MeshResolution:
    """Sampling density: path samples per pi of winding angle, and radial rings."""

    s_per_pi: int = 16
    rho: int = 8

    def __post_init__(self) -> None:
        if self.s_per_pi < 1 or self.rho < 2:
            raise ValueError("resolution too coarse")

    @classmethod
    def parse(cls, text: str) -> "MeshResolution":
        s, _, r = text.partition("x")
        return cls(int(s), int(r))


@dataclass
class BoundaryLoop:
    """A closed boundary polyline with its semantic tag.

    ``vertices`` is a closed cycle of vertex ids (the edge from the last back
    to the first is implied).  ``cls`` is the winding pair of the loop,
    canonically oriented (first nonzero coordinate positive).
    """

    kind: str  # "binding" | "bottom" | "top"
    vertices: list[int]
    cls: HomClass
    level: float
    multiplicity: int = 1
    copy_index: int = 0

    def edges(self) -> Iterable[tuple[int, int]]:
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]


def wrap_delta(d: float) -> float:
    """Minimum-image representative of a fiber-coordinate difference."""
    return d - round(d)


class SectionMesh:
    """Immersed triangulated surface in T^2 x I with tagged boundary."""

    def __init__(self) -> None:
        self.vertices: list[tuple[float, float, float]] = []
        self.triangles: list[tuple[int, int, int]] = []
        self.boundary_loops: list[BoundaryLoop] = []
        self.corner_edges: set[tuple[int, int]] = set()

    # -- construction --------------------------------------------------------

    def add_vertex(self, x: float, y: float, t: float) -> int:
        self.vertices.append((x % 1.0, y % 1.0, t))
        return len(self.vertices) - 1

    def add_triangle(self, i: int, j: int, k: int) -> None:
        if i == j or j == k or i == k:
            raise ValueError("degenerate triangle")
        self.triangles.append((i, j, k))

    def add_corner_edge(self, i: int, j: int) -> None:
        self.corner_edges.add((min(i, j), max(i, j)))

    def merge(self, other: "SectionMesh") -> dict[int, int]:
        """Append another mesh; returns the vertex-id translation map."""
        offset = len(self.vertices)
        self.vertices.extend(other.vertices)
        remap = {i: i + offset for i in range(len(other.vertices))}
        self.triangles.extend((a + offset, b + offset, c + offset)
                              for a, b, c in other.triangles)
        for loop in other.boundary_loops:
            self.boundary_loops.append(BoundaryLoop(
                loop.kind, [v + offset for v in loop.vertices], loop.cls,
                loop.level, loop.multiplicity, loop.copy_index))
        self.corner_edges.update((a + offset, b + offset)
                                 for a, b in other.corner_edges)
        return remap

    # -- geometry --------------------------------------------------------------

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    def edge_vector(self, i: int, j: int) -> tuple[float, float, float]:
        xi, yi, ti = self.vertices[i]
        xj, yj, tj = self.vertices[j]
        return (wrap_delta(xj - xi), wrap_delta(yj - yi), tj - ti)

    def triangle_mean_t(self, tri: tuple[int, int, int]) -> float:
        return sum(self.vertices[v][2] for v in tri) / 3.0

    def loop_winding(self, loop_vertices: list[int]) -> HomClass:
        """Winding numbers of a closed polyline, by minimum-image summation."""
        wx = 0.0
        wy = 0.0
        n = len(loop_vertices)
        for i in range(n):
            a = loop_vertices[i]
            b = loop_vertices[(i + 1) % n]
            dx, dy, _ = self.edge_vector(a, b)
            wx += dx
            wy += dy
        return HomClass(round(wx), round(wy))

    def euler_characteristic(self) -> int:
        edges = set()
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                edges.add((min(u, v), max(u, v)))
        return len(self.vertices) - len(edges) + len(self.triangles)

    # -- validation ---------------------------------------------------------------

    def edge_use_counts(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                key = (min(u, v), max(u, v))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def boundary_edge_set(self) -> set[tuple[int, int]]:
        out: set[tuple[int, int]] = set()
        for loop in self.boundary_loops:
            for u, v in loop.edges():
                out.add((min(u, v), max(u, v)))
        return out

    def validate(self) -> None:
        """Interior edges are shared by exactly 2 triangles traversing them in
        opposite directions (orientability), boundary edges by 1, and every
        tagged loop's winding matches its recorded class."""
        counts = self.edge_use_counts()
        boundary = self.boundary_edge_set()
        directed: dict[tuple[int, int], int] = {}
        for a, b, c in self.triangles:
            for u, v in ((a, b), (b, c), (c, a)):
                directed[(u, v)] = directed.get((u, v), 0) + 1
        for edge, n in counts.items():
            if edge in boundary:
                if n != 1:
                    raise ValueError(f"boundary edge {edge} used by {n} triangles")
            elif n != 2:
                raise ValueError(f"interior edge {edge} used by {n} triangles")
            else:
                u, v = edge
                if directed.get((u, v), 0) != 1 or directed.get((v, u), 0) != 1:
                    raise ValueError(f"inconsistent orientation across edge {edge}")
        for edge in boundary:
            if edge not in counts:
                raise ValueError(f"tagged boundary edge {edge} not in any triangle")
        for loop in self.boundary_loops:
            w = self.loop_winding(loop.vertices)
            expect = loop.cls if loop.kind != "binding" else loop.multiplicity * loop.cls
            if w.canonical() != expect.canonical():
                raise ValueError(
                    f"{loop.kind} loop winding {w.as_tuple()} does not match "
                    f"tag {expect.as_tuple()}")

    def loops_of_kind(self, kind: str) -> list[BoundaryLoop]:
        return [l for l in self.boundary_loops if l.kind == kind]


def extract_boundary_loops(mesh: SectionMesh) -> list[list[int]]:
    """Walk edges used by exactly one triangle into closed vertex cycles."""
    counts = mesh.edge_use_counts()
    boundary_edges = [e for e, n in counts.items() if n == 1]
    adj: dict[int, list[int]] = {}
    for u, v in boundary_edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    unused = {tuple(sorted(e)) for e in boundary_edges}
    loops = []
    while unused:
        start_edge = min(unused)
        unused.discard(start_edge)
        a, b = start_edge
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
