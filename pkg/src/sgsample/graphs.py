"""Graph approximations and their Laplacians.

Two families per fractal:

* vertex graphs (``build_beta`` for SG, ``build_zeta`` for SG3): vertices are
  the triangle corners of the level-m approximation, deduplicated exactly on
  the integer lattice; edges are the triangle sides.
* cell graphs (``build_gamma`` for SG, ``build_xi`` for SG3): one vertex per
  upward cell, an edge whenever two cells share a corner point.

A module-level tower caches, per fractal and level, the integer corner
coordinates of every cell plus the derived index structures (vertex ids,
cell-to-corner maps, midpoint ids, refinement embeddings).  Everything

downstream (extension, averaging, quadrature) works on these arrays.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse

from . import geometry
from .errors import SizeCapExceeded
from .geometry import SG, SG3, Fractal

DENSE_CAP = 500


# ---------------------------------------------------------------------------
# refinement tower
# ---------------------------------------------------------------------------


class _VertexLevel:
    """Deduplicated vertex structure of one vertex-graph level."""

    def __init__(self, keys_sorted, id_of_sorted, coords_int, c2c):
        self.keys_sorted = keys_sorted      # packed lattice keys, ascending
        self.id_of_sorted = id_of_sorted    # sorted position -> vertex id
        self.coords_int = coords_int        # (N, 2) in first-encounter order
        self.c2c = c2c                      # (ncells, 3) vertex ids per cell
        self.n_vertices = len(keys_sorted)

    def ids_for_keys(self, keys):
        pos = np.searchsorted(self.keys_sorted, keys)
        if np.any(pos >= len(self.keys_sorted)) or np.any(
            self.keys_sorted[pos] != keys
        ):
            raise KeyError("lattice point is not a vertex at this level")
        return self.id_of_sorted[pos]


class _Tower:
    """Per-fractal cache of corner coordinates and index structures."""

    def __init__(self, fractal: Fractal):
        self.fractal = fractal
        anchors = np.asarray(fractal.anchors, dtype=np.int64)
        # corners[m]: (k**m, 3, 2) integer corner coords over denominator 4*s**m
        self._corners = [anchors[:3][None, :, :].copy()]
        self._vertex_levels = {}
        self._emb = {}
        self._mid = {}
        self._cell_edges = {}
        self._cell_partner = {}
        self._lock = threading.RLock()

    # -- corner coordinates -------------------------------------------------

    def ensure(self, m: int):
        with self._lock:
            s = self.fractal.scale
            anchors = np.asarray(self.fractal.anchors, dtype=np.int64)
            corners3 = anchors[:3][None, :, :]
            while len(self._corners) <= m:
                old = self._corners[-1]
                n = old.shape[0]
                k = self.fractal.branching
                new = np.empty((k * n, 3, 2), dtype=np.int64)
                for i in range(k):
                    # child i of cell w: F_w o F_i; corner c at the finer level
                    new[i * n : (i + 1) * n] = (
                        corners3 + (s - 1) * anchors[i][None, None, :] + s * (old - corners3)
                    )
                self._corners.append(new)

    def corners_int(self, m: int) -> np.ndarray:
        self.ensure(m)
        return self._corners[m]

    def _pack(self, m: int, pq) -> np.ndarray:
        mult = 2 * self.fractal.scale**m + 1
        return pq[..., 0] * mult + pq[..., 1]

    # -- vertex structure -----------------------------------------------------

    def vertex_level(self, m: int) -> _VertexLevel:
        with self._lock:
            if m not in self._vertex_levels:
                corners = self.corners_int(m)
                flat = self._pack(m, corners.reshape(-1, 2))
                uniq, first, inv = np.unique(flat, return_index=True, return_inverse=True)
                perm = np.argsort(first, kind="stable")
                id_of_sorted = np.empty(len(uniq), dtype=np.int64)
                id_of_sorted[perm] = np.arange(len(uniq))
                coords = corners.reshape(-1, 2)[first[perm]]
                c2c = id_of_sorted[inv].reshape(-1, 3)
                self._vertex_levels[m] = _VertexLevel(uniq, id_of_sorted, coords, c2c)
            return self._vertex_levels[m]

    def embedding(self, m: int) -> np.ndarray:
        """Vertex ids at level m+1 of the level-m vertices (values persist)."""
        with self._lock:
            if m not in self._emb:
                s = self.fractal.scale
                lv, lv1 = self.vertex_level(m), self.vertex_level(m + 1)
                self._emb[m] = lv1.ids_for_keys(self._pack(m + 1, s * lv.coords_int))
            return self._emb[m]

    def midpoint_ids(self, m: int) -> np.ndarray:
        """Level-(m+1) vertex ids of each level-m cell's three edge midpoints.

        Column order: midpoints of corner pairs (0,1), (0,2), (1,2).  SG only
        (side-halving refinement).
        """
        if self.fractal.scale != 2:
            raise ValueError("midpoint refinement is specific to side-halving")
        with self._lock:
            if m not in self._mid:
                corners = self.corners_int(m)
                mids = corners[:, (0, 0, 1), :] + corners[:, (1, 2, 2), :]
                lv1 = self.vertex_level(m + 1)
                self._mid[m] = lv1.ids_for_keys(self._pack(m + 1, mids))
            return self._mid[m]

    def boundary_vertex_ids(self, m: int) -> np.ndarray:
        anchors = np.asarray(self.fractal.anchors[:3], dtype=np.int64)
        lv = self.vertex_level(m)
        return lv.ids_for_keys(self._pack(m, anchors * self.fractal.scale**m))

    # -- cell structure -----------------------------------------------------

    def cell_corner_keys(self, m: int) -> np.ndarray:
        return self._pack(m, self.corners_int(m))

    def cell_edges(self, m: int) -> np.ndarray:
        """Cell-graph edges at level m: cells sharing a corner point."""
        with self._lock:
            if m not in self._cell_edges:
                flat = self.cell_corner_keys(m).reshape(-1)
                order = np.argsort(flat, kind="stable")
                sk = flat[order]
                cells = order // 3
                same = sk[:-1] == sk[1:]
                pairs = [np.stack([cells[:-1][same], cells[1:][same]], axis=1)]
                # corner points shared by three cells add the third pair
                triple = same[:-1] & same[1:]
                if np.any(triple):
                    pairs.append(
                        np.stack([cells[:-2][triple], cells[2:][triple]], axis=1)
                    )
                edges = np.concatenate(pairs, axis=0)
                edges = np.sort(edges, axis=1)
                edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
                self._cell_edges[m] = edges
            return self._cell_edges[m]

    def cell_partner(self, m: int) -> np.ndarray:
        """For SG: partner[cell, c] = the other cell sharing corner c, else -1."""
        if self.fractal.branching != 3:
            raise ValueError("corner partners are unique only for SG cells")
        with self._lock:
            if m not in self._cell_partner:
                flat = self.cell_corner_keys(m).reshape(-1)
                order = np.argsort(flat, kind="stable")
                sk = flat[order]
                same = sk[:-1] == sk[1:]
                partner = np.full(flat.shape[0], -1, dtype=np.int64)
                a, b = order[:-1][same], order[1:][same]
                partner[a] = b // 3
                partner[b] = a // 3
                self._cell_partner[m] = partner.reshape(-1, 3)
            return self._cell_partner[m]


@lru_cache(maxsize=None)
def _tower_by_name(name: str) -> _Tower:
    return _Tower(geometry.FRACTALS[name])


def get_tower(fractal: Fractal) -> _Tower:
    return _tower_by_name(fractal.name)


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------


class Graph:
    """A finite approximation graph (vertex kind or cell kind).

    Immutable after construction; heavyweight fields are materialized lazily
    from the shared tower.
    """

    def __init__(self, fractal: Fractal, kind: str, level: int):
        if kind not in ("vertex", "cell"):
            raise ValueError(f"unknown graph kind {kind!r}")
        if level < 0:
            raise ValueError("level must be >= 0")
        self.fractal = fractal
        self.kind = kind
        self.level = level
        self._tower = get_tower(fractal)
        self._cache = {}

    # -- basic counts --------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.fractal.branching**self.level

    @property
    def n_vertices(self) -> int:
        if self.kind == "cell":
            return self.n_cells
        return self._tower.vertex_level(self.level).n_vertices

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    # -- structure -----------------------------------------------------------

    @property
    def edges(self) -> np.ndarray:
        if self.kind == "cell":
            return self._tower.cell_edges(self.level)

        def build():
            c2c = self._tower.vertex_level(self.level).c2c
            e = np.stack(
                [c2c[:, (0, 0, 1)].reshape(-1), c2c[:, (1, 2, 2)].reshape(-1)], axis=1
            )
            e = np.sort(e, axis=1)
            e = np.unique(e, axis=0)
            return e

        return self._cached("edges", build)

    @property
    def boundary(self) -> np.ndarray:
        def build():
            flags = np.zeros(self.n_vertices, dtype=bool)
            if self.kind == "vertex":
                flags[self._tower.boundary_vertex_ids(self.level)] = True
            else:
                k = self.fractal.branching
                step = (k**self.level - 1) // (k - 1)
                for i in range(3):
                    flags[i * step] = True
            return flags

        return self._cached("boundary", build)

    @property
    def words(self):
        """Cell words in lexicographic order (cell graphs only)."""
        if self.kind != "cell":
            raise ValueError("vertex graphs are not indexed by words")
        return self._cached(
            "words", lambda: geometry.enumerate_cells(self.fractal, self.level)
        )

    @property
    def coords(self) -> np.ndarray:
        """Planar float coordinates: vertices, or cell centroids for cells."""

        def build():
            if self.kind == "vertex":
                ints = self._tower.vertex_level(self.level).coords_int
                return geometry.lattice_to_xy(self.fractal, self.level, ints)
            ints = self._tower.corners_int(self.level).mean(axis=1)
            return geometry.lattice_to_xy(self.fractal, self.level, ints)

        return self._cached("coords", build)

    @property
    def cells_corners(self) -> np.ndarray:
        """(n_cells, 3) vertex ids of each cell's corners (vertex graphs)."""
        if self.kind != "vertex":
            raise ValueError("corner membership lives on vertex graphs")
        return self._tower.vertex_level(self.level).c2c

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def child_indices(self) -> np.ndarray:
        """(n_cells, k) indices of each cell's children at level+1."""
        if self.kind != "cell":
            raise ValueError("children are defined for cell graphs")
        k = self.fractal.branching
        base = np.arange(self.n_cells)
        return np.stack([i * self.n_cells + base for i in range(k)], axis=1)

    def parent_indices(self) -> np.ndarray:
        """Parent cell index at level-1 for every cell (level >= 1)."""
        if self.kind != "cell" or self.level < 1:
            raise ValueError("parents require a cell graph of level >= 1")
        return np.arange(self.n_cells) % (self.fractal.branching ** (self.level - 1))

    def to_json_dict(self) -> dict:
        verts = []
        if self.kind == "cell":
            for i, w in enumerate(self.words):
                verts.append(
                    {"id": i, "word": list(w), "boundary": bool(self.boundary[i])}
                )
        else:
            for i, (x, y) in enumerate(self.coords):
                verts.append(
                    {
                        "id": i,
                        "coords": [float(x), float(y)],
                        "boundary": bool(self.boundary[i]),
                    }
                )
        return {
            "kind": f"{self.kind}-graph",
            "fractal": self.fractal.name,
            "level": self.level,
            "vertices": verts,
            "edges": [[int(a), int(b)] for a, b in self.edges],
        }

    def __repr__(self):
        return (
            f"Graph({self.fractal.name}, {self.kind}, level={self.level}, "
            f"n={self.n_vertices})"
        )


def build_beta(m: int) -> Graph:
    """Level-m vertex graph of SG; (3**(m+1)+3)/2 vertices."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Graph(SG, "vertex", m)


def build_gamma(m: int) -> Graph:
    """Level-m cell graph of SG on the 3**m lexicographic words."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Graph(SG, "cell", m)


def build_zeta(m: int) -> Graph:
    """Level-m vertex graph of SG3 (kept upward triangles of side-3 subdivision)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Graph(SG3, "vertex", m)


def build_xi(m: int) -> Graph:
    """Level-m cell graph of SG3 on the 6**m words."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return Graph(SG3, "cell", m)


# ---------------------------------------------------------------------------
# hole cycles ("hexagons") of the SG cell graph
# ---------------------------------------------------------------------------


def _edge_path(pair, r, descending):
    """Digit words of the cells along one side of a hole, in path order.

    Cells touching an edge of the gasket at depth r-1 are the words over the
    edge's two digit letters; reading the last digit as the most significant
    bit orders them along the edge.
    """
    if r == 1:
        return [()]
    lo, hi = pair
    n = 2 ** (r - 1)
    ts = range(n - 1, -1, -1) if descending else range(n)
    return [tuple(hi if (t >> j) & 1 else lo for j in range(r - 1)) for t in ts]


def hexagon_cycles(m: int, fractal: Fractal = SG):
    """Cycles of Gamma_m cells around each removed upside-down triangle.

    One cycle per hole, i.e. per cell u with len(u) <= m-2; the cycle around
    the hole of u has 3 * 2**(m-len(u)-1) cells (six exactly at the finest
    participating scale).  Cells are listed in clockwise order in the plane
    embedding.  Returns a list of index lists into the level-m cell order.
    """
    if fractal is not SG:
        raise ValueError("hole cycles are implemented for SG cell graphs")
    if m < 2:
        return []
    cycles = []
    for k in range(m - 1):
        for u in geometry.enumerate_cells(SG, k):
            r = m - k
            cells = []
            # clockwise: top side (copy 1), right side (copy 2), left side (copy 0)
            for side, pair, descending in (
                (1, (0, 2), False),
                (2, (0, 1), True),
                (0, (1, 2), True),
            ):
                for x in _edge_path(pair, r, descending):
                    cells.append(x + (side,) + u)
            cycles.append([geometry.word_index(SG, w) for w in cells])
    return cycles


# ---------------------------------------------------------------------------
# Laplacians
# ---------------------------------------------------------------------------


class LaplacianOperator:
    """Graph Laplacian L = degree - adjacency under a boundary convention.

    plain: eigenproblem L u = lam u.
    neumann-weighted (vertex graphs): generalized problem L u = lam M u with
    vertex measure 1/2 on the three fractal corners and 1 elsewhere.
    """

    def __init__(self, graph: Graph, convention: str = "plain", renormalize: bool = False):
        if convention not in ("plain", "neumann"):
            raise ValueError(f"unknown convention {convention!r}")
        if convention == "neumann" and graph.kind != "vertex":
            raise ValueError("neumann weighting is defined on vertex graphs only")
        self.graph = graph
        self.convention = convention
        self.renormalization = 1.5 * 5.0**graph.level if renormalize else None
        self._matrix = None

    @property
    def matrix(self) -> scipy.sparse.csr_matrix:
        if self._matrix is None:
            n = self.graph.n_vertices
            e = self.graph.edges
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            data = -np.ones(len(rows))
            adj = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(n, n))
            deg = self.graph.degrees().astype(float)
            self._matrix = (scipy.sparse.diags(deg) + adj).tocsr()
        return self._matrix

    @property
    def mass(self) -> Optional[np.ndarray]:
        if self.convention == "plain":
            return None
        mass = np.ones(self.graph.n_vertices)
        mass[self.graph.boundary] = 0.5
        return mass

    def apply(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[0] != self.graph.n_vertices:
            raise ValueError("value vector does not match the graph")
        return self.matrix @ u

    def apply_renormalized(self, u) -> np.ndarray:
        """(3/2) 5**m * sum_{y~x} (u(y) - u(x)); equals -(3/2) 5**m (L u)."""
        scale = self.renormalization or 1.5 * 5.0**self.graph.level
        return -scale * self.apply(u)

    def residual(self, u, lam: float) -> float:
        """sup-norm eigen-equation residual, relative to the sup of u."""
        u = np.asarray(u, dtype=float)
        r = self.apply(u) - (lam * u if self.mass is None else lam * self.mass * u)
        denom = np.max(np.abs(u))
        return float(np.max(np.abs(r)) / denom) if denom > 0 else float(np.max(np.abs(r)))


def laplacian(graph: Graph, convention: str = "plain", renormalize: bool = False):
    return LaplacianOperator(graph, convention, renormalize)


def natural_operator(graph: Graph) -> LaplacianOperator:
    """Plain Laplacian on cell graphs, neumann-weighted on vertex graphs."""
    conv = "neumann" if graph.kind == "vertex" else "plain"
    return LaplacianOperator(graph, conv)


def dense_spectrum(op: LaplacianOperator, cap: int = DENSE_CAP):
    """Full spectrum, ascending, with eigenvectors orthonormal in the
    operator's natural inner product (M-weighted for neumann)."""
    n = op.graph.n_vertices
    if n > cap:
        raise SizeCapExceeded(f"dense solve on {n} vertices exceeds cap {cap}")
    dense = op.matrix.toarray()
    if op.mass is None:
        w, v = scipy.linalg.eigh(dense)
    else:
        w, v = scipy.linalg.eigh(dense, np.diag(op.mass))
    return w, v
