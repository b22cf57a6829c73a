"""Cell averages, bandlimited reconstruction, and sampling-function statistics.

Two average maps act on a function known on the level-n vertex graph: the
discrete average A (mean of a cell's three corner values) and the continuous
average B (measure-normalized integral, ``3**m * integral over the cell``,
estimated as the equal-weight mean of the level-M discrete averages inside
the cell).  For an eigenfunction continued with the all-minus branch policy
the two are proportional, B = c(lam) A; the constants are measured
numerically and cross-checked across cells.

Reconstruction solves the square system mapping bandlimited coefficients to
cell averages; delta targets produce the sampling functions whose sup norm
and scaled squared integral the statistics tables report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .decimation import extend_beta_values, minus_chain
from .eigenbasis import Basis, bandlimited_basis
from .errors import ContractViolation, LevelMismatch
from .geometry import SG
from .graphs import get_tower

DEFAULT_QUAD_OFFSET = 8
GROUP_TOL = 1e-6
_EVAL_CACHE_MAX_VERTICES = 100_000


# ---------------------------------------------------------------------------
# averages
# ---------------------------------------------------------------------------


def _cell_corner_ids(n: int, m: int) -> np.ndarray:
    """Vertex ids in the level-n vertex graph of every level-m cell's corners."""
    if m > n:
        raise LevelMismatch("cell level exceeds the value level")
    tw = get_tower(SG)
    scaled = tw.corners_int(m) * SG.scale ** (n - m)
    return tw.vertex_level(n).ids_for_keys(tw._pack(n, scaled))


def cell_averages(values: np.ndarray, value_level: int, cell_level: int) -> np.ndarray:
    """Discrete averages of every level-``cell_level`` cell, vectorized."""
    ids = _cell_corner_ids(value_level, cell_level)
    values = np.asarray(values, dtype=float)
    return (values[ids[:, 0]] + values[ids[:, 1]] + values[ids[:, 2]]) / 3.0


def discrete_average(values: np.ndarray, value_level: int, word: Sequence[int]) -> float:
    """Mean of the three corner values of one cell."""
    word = SG.check_word(word)
    avgs = cell_averages(values, value_level, len(word))
    return float(avgs[geometry.word_index(SG, word)])


def _coarsen_cell_values(avgs: np.ndarray, steps: int) -> np.ndarray:
    """Iterated three-children mean; equals the measure-weighted descendant mean."""
    out = avgs
    for _ in range(steps):
        out = out.reshape((3, -1) + out.shape[1:]).mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# grouped continuation of the bandlimited basis
# ---------------------------------------------------------------------------


def _eigen_groups(eigenvalues: np.ndarray, tol: float = GROUP_TOL):
    """Cluster member indices by eigenvalue (the continuation is shared)."""
    order = np.argsort(eigenvalues, kind="stable")
    groups = []
    current = [order[0]]
    for idx in order[1:]:
        if eigenvalues[idx] - eigenvalues[current[-1]] <= tol:
            current.append(idx)
        else:
            groups.append(current)
            current = [idx]
    groups.append(current)
    return [
        (float(np.mean(eigenvalues[g])), np.asarray(g, dtype=np.int64)) for g in groups
    ]


def _stream_blocks(basis: Basis, target_level: int):
    """Continue the basis group-by-group under the all-minus policy.

    Yields (member_indices, block_prev, block_final): member columns at
    levels target_level-1 and target_level.  Blocks are discarded by the
    caller after accumulation, keeping memory at one group at a time.
    """
    m = basis.graph.level
    if target_level < m + 1:
        raise LevelMismatch("quadrature level must exceed the base level")
    eigs = basis.eigenvalues()
    mat = basis.matrix()
    for lam, idx in _eigen_groups(eigs):
        block = mat[:, idx]
        prev = block
        for step, lam_next in enumerate(minus_chain(lam, target_level - m, target="beta")):
            prev = block
            block = extend_beta_values(block, m + step, lam_next)
        yield idx, prev, block


# ---------------------------------------------------------------------------
# B/A proportionality constants
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def b_over_a_constants(m: int, quad_level: int) -> tuple:
    """Per-member constants c with B = c * A on the bandlimited basis.

    Measured as the ratio on the cell with the largest |A|, with a
    cross-check over all cells carrying at least 10% of that magnitude.
    """
    basis = bandlimited_basis(m)
    ga = _average_matrix_a(m)
    out = np.empty(len(basis))
    for idx, _, block in _stream_blocks(basis, quad_level):
        fine = cell_averages(block, quad_level, quad_level)
        bvec = _coarsen_cell_values(fine, quad_level - m)
        for col, k in enumerate(idx):
            a = ga[:, k]
            b = bvec[:, col]
            pivot = int(np.argmax(np.abs(a)))
            c = b[pivot] / a[pivot]
            strong = np.abs(a) >= 0.1 * np.abs(a[pivot])
            err = np.max(np.abs(b[strong] - c * a[strong]))
            if err > 1e-8 * max(1.0, abs(b[pivot])):
                raise ContractViolation(
                    f"B/A ratio varies across cells for member {k} at level {m}: {err}"
                )
            out[k] = c
    return tuple(out)


@lru_cache(maxsize=32)
def _average_matrix_a(m: int) -> np.ndarray:
    basis = bandlimited_basis(m)
    return cell_averages(basis.matrix(), m, m)


@lru_cache(maxsize=32)
def _average_matrix(m: int, normalization: str, quad_level: int) -> np.ndarray:
    ga = _average_matrix_a(m)
    if normalization == "A":
        return ga
    if normalization == "B":
        c = np.asarray(b_over_a_constants(m, quad_level))
        return ga * c[None, :]
    raise ValueError(f"normalization must be 'A' or 'B', got {normalization!r}")


# ---------------------------------------------------------------------------
# bandlimited functions
# ---------------------------------------------------------------------------


class BandlimitedFunction:
    """Coefficients over the level-m bandlimited basis, lazily evaluable."""

    def __init__(self, m: int, coefficients):
        self.m = m
        self.coefficients = np.asarray(coefficients, dtype=float)
        if self.coefficients.shape != (3**m,):
            raise ValueError("coefficient vector must have length 3**m")
        self.basis = bandlimited_basis(m)
        self._values = {}

    def values_at(self, level: int) -> np.ndarray:
        """Vertex values on the level-``level`` vertex graph (all-minus
        continuation of every basis member)."""
        if level < self.m:
            raise LevelMismatch("cannot evaluate above the native level")
        if level == self.m:
            return self.basis.matrix() @ self.coefficients
        if level in self._values:
            return self._values[level]
        acc = None
        for idx, _, block in _stream_blocks(self.basis, level):
            part = block @ self.coefficients[idx]
            acc = part if acc is None else acc + part
        if acc.shape[0] <= _EVAL_CACHE_MAX_VERTICES:
            self._values[level] = acc
        return acc

    def discrete_averages(self, cell_level: Optional[int] = None) -> np.ndarray:
        """A-averages on the level-``cell_level`` cells (default: native level)."""
        cell_level = self.m if cell_level is None else cell_level
        level = max(cell_level, self.m)
        return cell_averages(self.values_at(level), level, cell_level)

    def continuous_averages(self, cell_level: int, quad_level: int):
        """B-average estimates for all cells plus the depth convergence gap."""
        if quad_level < max(cell_level, self.m) + 1:
            raise LevelMismatch("quadrature level too shallow")
        fine = cell_averages(self.values_at(quad_level), quad_level, quad_level)
        b = _coarsen_cell_values(fine, quad_level - cell_level)
        fine_prev = cell_averages(
            self.values_at(quad_level - 1), quad_level - 1, quad_level - 1
        )
        b_prev = _coarsen_cell_values(fine_prev, quad_level - 1 - cell_level)
        return b, float(np.max(np.abs(b - b_prev)))

    def integral(self, quad_level: Optional[int] = None) -> float:
        """Estimate of the total integral over the gasket."""
        quad_level = quad_level or self.m + DEFAULT_QUAD_OFFSET
        fine = cell_averages(self.values_at(quad_level), quad_level, quad_level)
        return float(fine.mean())


def continuous_average(
    f: BandlimitedFunction, word: Sequence[int], quad_level: Optional[int] = None
):
    """B-average of ``f`` on one cell: measure-weighted mean of the level-M
    discrete averages inside it.  Returns (value, convergence gap)."""
    word = SG.check_word(word)
    cell_level = len(word)
    quad_level = quad_level or max(cell_level, f.m) + DEFAULT_QUAD_OFFSET
    b, gap = f.continuous_averages(cell_level, quad_level)
    return float(b[geometry.word_index(SG, word)]), gap


def reconstruct(
    targets, normalization: str = "B", quad_level: Optional[int] = None
) -> BandlimitedFunction:
    """Solve for the bandlimited function with the given cell averages."""
    targets = np.asarray(targets, dtype=float)
    m = round(math.log(targets.shape[0], 3))
    if 3**m != targets.shape[0]:
        raise ValueError("target vector length must be a power of 3")
    quad_level = quad_level or m + DEFAULT_QUAD_OFFSET
    g = _average_matrix(m, normalization, quad_level)
    try:
        coeffs = np.linalg.solve(g, targets)
    except np.linalg.LinAlgError as exc:  # would contradict unique reconstruction
        raise ContractViolation(f"average matrix at level {m} is singular") from exc
    return BandlimitedFunction(m, coeffs)


# ---------------------------------------------------------------------------
# sampling functions and their statistics
# ---------------------------------------------------------------------------


@dataclass
class SamplingStats:
    """Sup norm and scaled squared integral of one sampling function."""

    word: tuple
    m: int
    normalization: str
    sup_norm: float
    scaled_l2: float
    quad_level: int
    sup_gap: float
    l2_gap: float

    @property
    def gap(self) -> float:
        """Largest quadrature-depth convergence gap among the two statistics."""
        return max(self.sup_gap, self.l2_gap)


def _batch_stats(m: int, coeff_matrix: np.ndarray, quad_level: int):
    """Sup and scaled-l2 statistics for many coefficient columns at once."""
    basis = bandlimited_basis(m)
    acc_prev = None
    acc = None
    for idx, prev, block in _stream_blocks(basis, quad_level):
        p = prev @ coeff_matrix[idx]
        b = block @ coeff_matrix[idx]
        acc_prev = p if acc_prev is None else acc_prev + p
        acc = b if acc is None else acc + b

    def stats(values, level):
        sup = np.max(np.abs(values), axis=0)
        avgs = cell_averages(values, level, level)
        l2 = 3.0 ** (m - level) * np.sum(avgs * avgs, axis=0)
        return sup, l2

    sup_prev, l2_prev = stats(acc_prev, quad_level - 1)
    sup, l2 = stats(acc, quad_level)
    return sup, l2, np.abs(sup - sup_prev), np.abs(l2 - l2_prev)


def sampling_stats(
    words, normalization: str = "B", quad_level: Optional[int] = None
):
    """Sampling functions and statistics for several level-m words, batched."""
    words = [SG.check_word(w) for w in words]
    if not words:
        return []
    m = len(words[0])
    if any(len(w) != m for w in words):
        raise ValueError("all words must share one level")
    quad_level = quad_level or m + DEFAULT_QUAD_OFFSET
    g = _average_matrix(m, normalization, quad_level)
    targets = np.zeros((3**m, len(words)))
    for col, w in enumerate(words):
        targets[geometry.word_index(SG, w), col] = 1.0
    coeffs = np.linalg.solve(g, targets)
    sup, l2, sup_gap, l2_gap = _batch_stats(m, coeffs, quad_level)
    out = []
    for col, w in enumerate(words):
        fn = BandlimitedFunction(m, coeffs[:, col])
        out.append(
            (
                fn,
                SamplingStats(
                    w,
                    m,
                    normalization,
                    float(sup[col]),
                    float(l2[col]),
                    quad_level,
                    float(sup_gap[col]),
                    float(l2_gap[col]),
                ),
            )
        )
    return out


def sampling_function(
    word, normalization: str = "B", quad_level: Optional[int] = None
):
    """The bandlimited function whose cell averages are a delta at ``word``."""
    [(fn, stats)] = sampling_stats([word], normalization, quad_level)
    return fn, stats


def table1(
    max_level: int = 4,
    normalization: str = "B",
    quad_offset: int = DEFAULT_QUAD_OFFSET,
):
    """Sampling statistics for one representative word per symmetry orbit,
    levels 1..max_level (22 rows for levels 1-4)."""
    if max_level > 4:
        raise ValueError("statistics tables are desk-scale: max_level <= 4")
    rows = []
    for m in range(1, max_level + 1):
        reps = geometry.orbit_representatives(m)
        for _, stats in sampling_stats(reps, normalization, m + quad_offset):
            rows.append(stats)
    return rows
