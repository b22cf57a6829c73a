"""Spectral decimation between consecutive graph levels.

Eigenvalues of adjacent levels satisfy ``lam_m = lam_{m+1} * (5 - lam_{m+1})``
on both graph families of SG.  Going up, each eigenvalue splits into the two
quadratic roots ``(5 -/+ sqrt(25 - 4 lam)) / 2`` unless a root lands in the
family's forbidden set, where the extension formulas are singular:

* cell graphs: {3, 5};
* vertex graphs (local 3x3 solve): {2, 5}.

Extension on the cell graph is explicit.  A child cell v of parent X takes

    u(v) = (3 (4 - lam') u(X) + 3 u(W)) / ((3 - lam') (5 - lam'))

where W is the parent of v's one neighbor outside its sibling triangle, and

    u(v) = 3 u(X) / (3 - lam')

when v hugs a fractal corner and has no outside neighbor.  Extension on the
vertex graph solves, per cell and independently, the 3x3 system that the
eigen-equation imposes on the three new midpoint vertices; the system matrix
``(5 - lam') I - J`` has determinant ``(2 - lam')(5 - lam')**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ForbiddenEigenvalue,
    LevelMismatch,
    NegativeDiscriminant,
    SingularLocalSystem,
)
from .geometry import SG
from .graphs import Graph, get_tower, natural_operator

FORBIDDEN = {"gamma": (3.0, 5.0), "beta": (2.0, 5.0)}
FORBIDDEN_TOL = 1e-9
RELATION_TOL = 1e-9


def eigenvalue_down(lam_next: float) -> float:
    """Coarse eigenvalue below ``lam_next``: lam_next * (5 - lam_next)."""
    return lam_next * (5.0 - lam_next)


def eigenvalue_up(lam: float, branch: str, target: str = "gamma") -> float:
    """One quadratic root above ``lam``, rejecting the target's forbidden set."""
    if target not in FORBIDDEN:
        raise ValueError(f"unknown target family {target!r}")
    disc = 25.0 - 4.0 * lam
    if disc < 0:
        raise NegativeDiscriminant(f"25 - 4*{lam} < 0")
    root = math.sqrt(disc)
    if branch == "minus":
        lam_next = (5.0 - root) / 2.0
    elif branch == "plus":
        lam_next = (5.0 + root) / 2.0
    else:
        raise ValueError(f"branch must be 'minus' or 'plus', got {branch!r}")
    for bad in FORBIDDEN[target]:
        if abs(lam_next - bad) <= FORBIDDEN_TOL:
            raise ForbiddenEigenvalue(lam_next, target)
    return lam_next


@dataclass(frozen=True)
class Lineage:
    """Birth data and branch history identifying an eigenvalue across levels."""

    birth_value: float
    birth_level: int
    branches: tuple = ()

    @property
    def level(self) -> int:
        return self.birth_level + len(self.branches)

    def eigenvalues(self):
        """Realized eigenvalue at each level from birth to the current one."""
        out = [self.birth_value]
        lam = self.birth_value
        for br in self.branches:
            disc = 25.0 - 4.0 * lam
            if disc < 0:
                raise NegativeDiscriminant(str(lam))
            root = math.sqrt(disc)
            lam = (5.0 - root) / 2.0 if br == "minus" else (5.0 + root) / 2.0
            out.append(lam)
        return out

    def eigenvalue(self) -> float:
        return self.eigenvalues()[-1]

    def renormalized_sequence(self):
        """(3/2) 5**n lam_n for each level n from birth onward."""
        return [
            1.5 * 5.0 ** (self.birth_level + i) * lam
            for i, lam in enumerate(self.eigenvalues())
        ]

    def extended(self, branch: str) -> "Lineage":
        return Lineage(self.birth_value, self.birth_level, self.branches + (branch,))

    def validate(self, family: str = "gamma"):
        """Check the level relation and forbidden-set avoidance after birth."""
        lams = self.eigenvalues()
        for coarse, fine in zip(lams, lams[1:]):
            if abs(coarse - eigenvalue_down(fine)) > 1e-12 * max(1.0, abs(coarse)):
                raise ValueError("lineage violates the level relation")
            for bad in FORBIDDEN[family]:
                if abs(fine - bad) <= FORBIDDEN_TOL:
                    raise ForbiddenEigenvalue(fine, family)


@dataclass
class EigenFunction:
    """Graph eigenpair with optional decimation history."""

    graph: Graph
    values: np.ndarray
    eigenvalue: float
    lineage: Optional[Lineage] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.graph.n_vertices:
            raise LevelMismatch("value vector does not match the graph size")

    def residual(self) -> float:
        return natural_operator(self.graph).residual(self.values, self.eigenvalue)


def _family(graph: Graph) -> str:
    return "beta" if graph.kind == "vertex" else "gamma"


def _check_relation(lam_coarse: float, lam_next: float, family: str):
    if abs(eigenvalue_down(lam_next) - lam_coarse) > RELATION_TOL * max(1.0, abs(lam_coarse)):
        raise ValueError(
            f"{lam_next} is not a branch value over eigenvalue {lam_coarse}"
        )
    for bad in FORBIDDEN[family]:
        if abs(lam_next - bad) <= FORBIDDEN_TOL:
            if family == "beta":
                raise SingularLocalSystem(
                    f"local system determinant vanishes at eigenvalue {lam_next}"
                )
            raise ForbiddenEigenvalue(lam_next, family)


def extend_gamma_values(values: np.ndarray, level: int, lam_next: float) -> np.ndarray:
    """Raw cell-graph extension of SG cell values one level down."""
    tw = get_tower(SG)
    partner = tw.cell_partner(level)
    n = values.shape[0]
    den = (3.0 - lam_next) * (5.0 - lam_next)
    out_shape = (3 * n,) + values.shape[1:]
    out = np.empty(out_shape, dtype=float)
    for i in range(3):
        w = partner[:, i]
        interior = w >= 0
        block = out[i * n : (i + 1) * n]
        block[interior] = (
            3.0 * (4.0 - lam_next) * values[interior] + 3.0 * values[w[interior]]
        ) / den
        block[~interior] = 3.0 * values[~interior] / (3.0 - lam_next)
    # pin the parent-child mean identity exactly, then the residual test
    # re-checks the eigen-equation independently
    mean = (out[:n] + out[n : 2 * n] + out[2 * n :]) / 3.0
    corr = values - mean
    for i in range(3):
        out[i * n : (i + 1) * n] += corr
    return out


def extend_gamma(ef: EigenFunction, lam_next: float) -> EigenFunction:
    """Extend a cell-graph eigenfunction one level with eigenvalue ``lam_next``."""
    if ef.graph.kind != "cell":
        raise ValueError("extend_gamma expects a cell-graph eigenfunction")
    _check_relation(ef.eigenvalue, lam_next, "gamma")
    out = extend_gamma_values(ef.values, ef.graph.level, lam_next)
    fine = Graph(ef.graph.fractal, "cell", ef.graph.level + 1)
    lineage = None
    if ef.lineage is not None:
        br = _branch_of(ef.eigenvalue, lam_next)
        lineage = ef.lineage.extended(br)
    return EigenFunction(fine, out, lam_next, lineage)


def extend_beta_values(values: np.ndarray, level: int, lam_next: float) -> np.ndarray:
    """Raw vertex-graph extension of SG values one level down.

    Solves, per cell, A x = b with A = (5-lam)I - J for the three midpoint
    values; old vertices keep their values.
    """
    if abs(lam_next - 2.0) <= FORBIDDEN_TOL or abs(lam_next - 5.0) <= FORBIDDEN_TOL:
        raise SingularLocalSystem(
            f"local system determinant vanishes at eigenvalue {lam_next}"
        )
    tw = get_tower(SG)
    lv = tw.vertex_level(level)
    lv1 = tw.vertex_level(level + 1)
    emb = tw.embedding(level)
    mids = tw.midpoint_ids(level)
    out_shape = (lv1.n_vertices,) + values.shape[1:]
    out = np.empty(out_shape, dtype=float)
    out[emb] = values
    p = values[lv.c2c]  # (ncells, 3, ...)
    den = (2.0 - lam_next) * (5.0 - lam_next)
    a = 4.0 - lam_next
    out[mids[:, 0]] = (a * (p[:, 0] + p[:, 1]) + 2.0 * p[:, 2]) / den
    out[mids[:, 1]] = (a * (p[:, 0] + p[:, 2]) + 2.0 * p[:, 1]) / den
    out[mids[:, 2]] = (a * (p[:, 1] + p[:, 2]) + 2.0 * p[:, 0]) / den
    return out


def extend_beta(ef: EigenFunction, lam_next: float) -> EigenFunction:
    """Extend a vertex-graph (Neumann) eigenfunction one level."""
    if ef.graph.kind != "vertex":
        raise ValueError("extend_beta expects a vertex-graph eigenfunction")
    _check_relation(ef.eigenvalue, lam_next, "beta")
    out = extend_beta_values(ef.values, ef.graph.level, lam_next)
    fine = Graph(ef.graph.fractal, "vertex", ef.graph.level + 1)
    lineage = None
    if ef.lineage is not None:
        lineage = ef.lineage.extended(_branch_of(ef.eigenvalue, lam_next))
    return EigenFunction(fine, out, lam_next, lineage)


def _branch_of(lam_coarse: float, lam_next: float) -> str:
    return "minus" if lam_next <= 2.5 else "plus"


def average_down(values, fine_graph: Graph, coarse_graph: Optional[Graph] = None):
    """Average fine values up one level.

    Cell graphs: parent value = mean of its children.  Vertex graphs:
    restriction to the coarse vertices.
    """
    values = np.asarray(values, dtype=float)
    if fine_graph.level < 1:
        raise LevelMismatch("cannot average below level 0")
    if coarse_graph is not None and (
        coarse_graph.level != fine_graph.level - 1
        or coarse_graph.kind != fine_graph.kind
        or coarse_graph.fractal is not fine_graph.fractal
    ):
        raise LevelMismatch("graphs are not a refinement pair")
    if values.shape[0] != fine_graph.n_vertices:
        raise LevelMismatch("values do not match the fine graph")
    if fine_graph.kind == "cell":
        k = fine_graph.fractal.branching
        n = fine_graph.n_vertices // k
        return values.reshape((k, n) + values.shape[1:]).mean(axis=0)
    emb = get_tower(fine_graph.fractal).embedding(fine_graph.level - 1)
    return values[emb]


@dataclass
class Continuation:
    """Result of an iterated extension: the fine eigenfunction, its lineage,
    and the renormalized eigenvalue at every level walked through."""

    eigenfunction: EigenFunction
    lineage: Lineage
    renormalized: list = field(default_factory=list)


def continue_to_level(ef: EigenFunction, target_level: int, policy="all-minus") -> Continuation:
    """Iterated extension up to ``target_level`` with recorded lineage.

    ``policy`` is 'all-minus' or an explicit sequence of branch names, one
    per level step.
    """
    steps = target_level - ef.graph.level
    if steps < 0:
        raise LevelMismatch("target level is above the starting level")
    if policy == "all-minus":
        branches = ["minus"] * steps
    else:
        branches = list(policy)
        if len(branches) != steps:
            raise ValueError("branch sequence length must match the level gap")
    family = _family(ef.graph)
    lineage = ef.lineage or Lineage(ef.eigenvalue, ef.graph.level)
    current = EigenFunction(ef.graph, ef.values, ef.eigenvalue, lineage)
    renorm = [1.5 * 5.0**current.graph.level * current.eigenvalue]
    extend = extend_beta if family == "beta" else extend_gamma
    for br in branches:
        lam_next = eigenvalue_up(current.eigenvalue, br, target=family)
        current = extend(current, lam_next)
        renorm.append(1.5 * 5.0**current.graph.level * current.eigenvalue)
    return Continuation(current, current.lineage, renorm)


def minus_chain(lam: float, steps: int, target: str = "beta"):
    """Eigenvalues along the all-minus continuation, one per level step."""
    out = []
    for _ in range(steps):
        lam = eigenvalue_up(lam, "minus", target=target)
        out.append(lam)
    return out


def tag_lineage(lam: float, level: int, family: str, tol: float = 1e-6) -> Optional[Lineage]:
    """Reconstruct the decimation ancestry of an eigenvalue, if it has one.

    Walks the value down while it could still be a continuation; a value in
    the family's forbidden set, or one whose coarse image leaves [0, 6],
    must have been born at its level.
    """
    lam_b, b = float(lam), level
    branches = []
    while b > 1:
        if any(abs(lam_b - bad) <= tol for bad in FORBIDDEN[family]):
            break
        down = eigenvalue_down(lam_b)
        if down < -tol or down > 6.0 + tol:
            break
        branches.append("minus" if lam_b <= 2.5 else "plus")
        lam_b, b = down, b - 1
    branches.reverse()
    birth = lam_b
    # snap births to their exact small set when within tolerance
    for exact in (0.0, 3.0, 5.0, 6.0):
        if abs(birth - exact) <= tol:
            birth = exact
            break
    else:
        if b > 1:
            return None
    return Lineage(birth, b, tuple(branches))
