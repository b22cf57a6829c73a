"""Complete eigenbases of the approximation graphs.

The cell-graph basis is built recursively: extend every previous member by
both branches (the constant only by the minus branch), then add the members
born at the new level:

* eigenvalue 5: an alternating +/-1 "battery chain" around each hole cycle;
* eigenvalue 3: a fixed nine-cell pattern copied onto the three corner
  blocks (value 2 on the boundary cell), plus the same pattern doubled
  across every edge connecting two adjacent blocks (value 2 on both
  endpoint cells of the connecting edge).

Counts per level m: 2*3**(m-1) - 1 extended, (3**(m-1) - 1)/2 battery
chains, 3 boundary patterns and (3**(m-1) - 3)/2 edge patterns, totalling
3**m.  The vertex-graph Neumann basis comes from the dense generalized
solver instead; decimation lineage is attached afterwards by eigenvalue
matching.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geometry
from .decimation import (
    EigenFunction,
    Lineage,
    eigenvalue_up,
    extend_gamma_values,
    tag_lineage,
)
from .errors import ForbiddenEigenvalue
from .graphs import (
    Graph,
    build_beta,
    build_gamma,
    dense_spectrum,
    hexagon_cycles,
    natural_operator,
)
from .geometry import SG

RANK_TOL = 1e-8

# Nine-cell eigenvalue-3 pattern on a depth-2 block, keyed by relative word.
# Rotations put the value 2 on a different block corner; the pattern is
# symmetric under swapping the other two digits, so the rotation is
# well-defined.
_PATTERN3 = {
    (0, 0): 2.0,
    (1, 0): -1.0,
    (2, 0): -1.0,
    (0, 1): -1.0,
    (0, 2): -1.0,
    (2, 1): 1.0,
    (1, 2): 1.0,
    (1, 1): 0.0,
    (2, 2): 0.0,
}


def _pattern3(corner: int):
    """The nine-cell pattern with its value 2 at block corner ``corner``."""
    if corner == 0:
        return dict(_PATTERN3)
    swap = {0: corner, corner: 0}
    relabel = lambda d: swap.get(d, d)
    return {(relabel(a), relabel(b)): v for (a, b), v in _PATTERN3.items()}


@dataclass
class Basis:
    """A list of eigenfunctions on one graph with construction provenance."""

    graph: Graph
    members: list
    provenance: list

    def __len__(self):
        return len(self.members)

    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.members])

    def matrix(self) -> np.ndarray:
        """Member values as columns, canonical vertex order."""
        return np.stack([m.values for m in self.members], axis=1)

    def to_json_dict(self) -> dict:
        return {
            "fractal": self.graph.fractal.name,
            "kind": f"{self.graph.kind}-graph",
            "level": self.graph.level,
            "members": [
                {
                    "eigenvalue": float(m.eigenvalue),
                    "provenance": p,
                    "values": [float(v) for v in m.values],
                }
                for m, p in zip(self.members, self.provenance)
            ],
        }


def _place_pattern(values: np.ndarray, m: int, block_word: tuple, corner: int):
    """Write the eigenvalue-3 pattern into the depth-2 block at ``block_word``."""
    stride = 3 ** (m - 2)
    base = geometry.word_index(SG, block_word) if block_word else 0
    for rel, v in _pattern3(corner).items():
        if v != 0.0:
            values[geometry.word_index(SG, rel) * stride + base] = v


@lru_cache(maxsize=8)
def gamma_basis(m: int) -> Basis:
    """The complete 3**m eigenbasis of the level-m SG cell graph."""
    if m < 1:
        raise ValueError("m must be >= 1")
    members = [
        EigenFunction(build_gamma(1), np.ones(3), 0.0, Lineage(0.0, 1)),
        EigenFunction(build_gamma(1), np.array([2.0, -1.0, -1.0]), 3.0, Lineage(3.0, 1)),
        EigenFunction(build_gamma(1), np.array([-1.0, 2.0, -1.0]), 3.0, Lineage(3.0, 1)),
    ]
    provenance = ["base", "base", "base"]
    for n in range(2, m + 1):
        graph = build_gamma(n)
        new_members, new_prov = [], []
        for ef in members:
            branches = ("minus",) if ef.lineage.birth_value == 0.0 else ("minus", "plus")
            for br in branches:
                lam_next = eigenvalue_up(ef.eigenvalue, br, target="gamma")
                vals = extend_gamma_values(ef.values, n - 1, lam_next)
                new_members.append(
                    EigenFunction(graph, vals, lam_next, ef.lineage.extended(br))
                )
                new_prov.append("extended")
        for cycle in hexagon_cycles(n):
            start = int(np.argmin(cycle))
            ordered = cycle[start:] + cycle[:start]
            vals = np.zeros(graph.n_cells)
            sign = -1.0
            for idx in ordered:
                vals[idx] = sign
                sign = -sign
            new_members.append(EigenFunction(graph, vals, 5.0, Lineage(5.0, n)))
            new_prov.append("born-hexagon")
        for i in range(3):
            vals = np.zeros(graph.n_cells)
            _place_pattern(vals, n, (i,) * (n - 2), i)
            new_members.append(EigenFunction(graph, vals, 3.0, Lineage(3.0, n)))
            new_prov.append("born-boundary3")
        if n >= 3:
            tower = graph._tower
            partner = tower.cell_partner(n - 2)
            blocks = geometry.enumerate_cells(SG, n - 2)
            for a, b in tower.cell_edges(n - 2):
                ca = int(np.nonzero(partner[a] == b)[0][0])
                cb = int(np.nonzero(partner[b] == a)[0][0])
                vals = np.zeros(graph.n_cells)
                _place_pattern(vals, n, blocks[a], ca)
                _place_pattern(vals, n, blocks[b], cb)
                new_members.append(EigenFunction(graph, vals, 3.0, Lineage(3.0, n)))
                new_prov.append("born-edge3")
        members, provenance = new_members, new_prov
    return Basis(build_gamma(m), members, provenance)


@lru_cache(maxsize=8)
def beta_neumann_basis(m: int) -> Basis:
    """Full Neumann basis of the level-m SG vertex graph, (3**(m+1)+3)/2
    members, M-orthonormal, from the dense generalized solver."""
    graph = build_beta(m)
    op = natural_operator(graph)
    w, v = dense_spectrum(op)
    members = [
        EigenFunction(graph, v[:, k].copy(), float(w[k]), tag_lineage(w[k], m, "beta"))
        for k in range(len(w))
    ]
    return Basis(graph, members, ["dense-oracle"] * len(members))


def bandlimited_basis(m: int, six_tol: float = 1e-6) -> Basis:
    """The 3**m-member sub-basis excluding every eigenvalue-6 member."""
    full = beta_neumann_basis(m)
    keep = [k for k, ef in enumerate(full.members) if abs(ef.eigenvalue - 6.0) > six_tol]
    if len(keep) != 3**m:
        raise ValueError(
            f"expected {3**m} members after excluding eigenvalue 6, got {len(keep)}; "
            "boundary convention is inconsistent"
        )
    return Basis(
        full.graph,
        [full.members[k] for k in keep],
        [full.provenance[k] for k in keep],
    )


def verify_basis(basis: Basis, residual_tol: float = 1e-9, spectrum_tol: float = 1e-9) -> dict:
    """Residual, rank, and spectrum diagnostics against the dense oracle."""
    op = natural_operator(basis.graph)
    residuals = [op.residual(ef.values, ef.eigenvalue) for ef in basis.members]
    mat = basis.matrix()
    svals = np.linalg.svd(mat, compute_uv=False)
    rank = int(np.sum(svals > RANK_TOL * svals[0]))
    report = {
        "size": len(basis),
        "n_vertices": basis.graph.n_vertices,
        "residuals": residuals,
        "max_residual": max(residuals),
        "rank": rank,
        "full_rank": rank == len(basis),
        "provenance_counts": {
            p: basis.provenance.count(p) for p in sorted(set(basis.provenance))
        },
        "spectrum_max_diff": None,
        "spectrum_matches": None,
    }
    if len(basis) == basis.graph.n_vertices:
        w, _ = dense_spectrum(op)
        diff = np.max(np.abs(np.sort(basis.eigenvalues()) - w))
        report["spectrum_max_diff"] = float(diff)
        report["spectrum_matches"] = bool(diff <= spectrum_tol)
    report["residuals_ok"] = report["max_residual"] <= residual_tol
    report["ok"] = bool(
        report["residuals_ok"]
        and report["full_rank"]
        and report["spectrum_matches"] in (True, None)
    )
    return report
