"""Cell addresses, contraction maps, and exact lattice coordinates.

A length-m word ``w = (w_1, ..., w_m)`` addresses the composed contraction
``F_w = F_{w_m} o ... o F_{w_1}`` (digits applied innermost-first), so the
children of a cell prepend a digit.  All triangle corners live on the exact
integer lattice with denominator ``4 * s**m`` (``s`` the reciprocal
contraction ratio, 2 or 3); shared vertices therefore collide exactly and
deduplication needs no floating-point tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations, product
from typing import Iterable, Sequence

import numpy as np

SQRT3 = math.sqrt(3.0)

Word = tuple  # digit tuples; alphabet size depends on the fractal


@dataclass(frozen=True)
class Fractal:
    """Iterated-function-system descriptor.

    ``anchors`` are the fixed points of the contraction maps as integer
    pairs ``(p, q)`` meaning the point ``(p/4, q*sqrt(3)/4)``.  The first
    three anchors are always the fractal corners q0 (left), q1 (top),
    q2 (right).
    """

    name: str
    branching: int
    scale: int
    anchors: tuple

    def check_word(self, word: Sequence[int]) -> tuple:
        w = tuple(int(d) for d in word)
        for d in w:
            if not 0 <= d < self.branching:
                raise ValueError(
                    f"digit {d} out of range for {self.name} (alphabet {self.branching})"
                )
        return w

    def corner_points(self):
        """The three fractal corners as float coordinates."""
        return tuple((a / 4.0, b * SQRT3 / 4.0) for a, b in self.anchors[:3])


#: Sierpinski gasket: three ratio-1/2 maps toward the triangle corners.
SG = Fractal("SG", 3, 2, ((0, 0), (2, 2), (4, 0)))

#: Side-3 variant: six ratio-1/3 maps; fixed points are the three corners
#: plus the three edge midpoints (digit order: q0, q1, q2, m01, m02, m12).
SG3 = Fractal("SG3", 6, 3, ((0, 0), (2, 2), (4, 0), (1, 1), (2, 0), (3, 1)))

FRACTALS = {"SG": SG, "SG3": SG3}


def ifs_apply(fractal: Fractal, word: Sequence[int], point):
    """Apply the composed contraction of ``word`` to a planar point.

    The empty word is the identity.  Digits act innermost-first, i.e. the
    first digit's map is applied to ``point`` before the others.
    """
    w = fractal.check_word(word)
    s = float(fractal.scale)
    x, y = float(point[0]), float(point[1])
    corners = [(a / 4.0, b * SQRT3 / 4.0) for a, b in fractal.anchors]
    for d in w:
        qx, qy = corners[d]
        x = (x + (s - 1.0) * qx) / s
        y = (y + (s - 1.0) * qy) / s
    return (x, y)


def cell_corners_int(fractal: Fractal, word: Sequence[int]) -> np.ndarray:
    """Integer lattice coordinates of a cell's three corners.

    Returns shape (3, 2); entries are over denominator ``4 * s**m`` where
    ``m = len(word)``.  Corner ``c`` is the image of fractal corner ``q_c``.
    """
    w = fractal.check_word(word)
    s = fractal.scale
    anchors = np.asarray(fractal.anchors, dtype=np.int64)
    shift = np.zeros(2, dtype=np.int64)
    weight = 1
    for d in w:
        shift += (s - 1) * weight * anchors[d]
        weight *= s
    return anchors[:3] + shift[None, :]


def lattice_to_xy(fractal: Fractal, level: int, pq) -> np.ndarray:
    """Convert integer lattice coordinates at ``level`` to floats."""
    denom = 4.0 * fractal.scale**level
    pq = np.asarray(pq, dtype=np.float64)
    out = np.empty_like(pq)
    out[..., 0] = pq[..., 0] / denom
    out[..., 1] = pq[..., 1] * SQRT3 / denom
    return out


def cell_corners(fractal: Fractal, word: Sequence[int]):
    """Float coordinates of a cell's three corners (images of q0, q1, q2)."""
    ints = cell_corners_int(fractal, word)
    xy = lattice_to_xy(fractal, len(tuple(word)), ints)
    return tuple((float(x), float(y)) for x, y in xy)


def enumerate_cells(fractal: Fractal, m: int):
    """All level-m words in lexicographic order (the canonical cell order)."""
    if m < 0:
        raise ValueError("level must be >= 0")
    return [tuple(w) for w in product(range(fractal.branching), repeat=m)]


def word_index(fractal: Fractal, word: Sequence[int]) -> int:
    """Position of ``word`` in the lexicographic enumeration of its level."""
    w = fractal.check_word(word)
    idx = 0
    for d in w:
        idx = idx * fractal.branching + d
    return idx


def cell_children(word: Sequence[int]):
    """Child words one level down; children prepend a digit."""
    w = tuple(word)
    return [(i,) + w for i in range(3)]


def cell_parent(word: Sequence[int]):
    if len(word) == 0:
        raise ValueError("the empty word has no parent")
    return tuple(word)[1:]


def digit_array(fractal: Fractal, m: int) -> np.ndarray:
    """Digits of every level-m word as an (k**m, m) array, lexicographic."""
    k = fractal.branching
    n = k**m
    out = np.empty((n, m), dtype=np.int8)
    idx = np.arange(n)
    for j in range(m - 1, -1, -1):
        out[:, j] = idx % k
        idx //= k
    return out


# ---------------------------------------------------------------------------
# symmetry-orbit helpers (alphabet-3 words: the dihedral group acts by
# relabeling digits, because each symmetry permutes the three corner maps)
# ---------------------------------------------------------------------------


def canonical_word(word: Sequence[int]) -> tuple:
    """Orbit representative: relabel digits in order of first appearance."""
    relabel = {}
    out = []
    for d in word:
        if d not in relabel:
            relabel[d] = len(relabel)
        out.append(relabel[d])
    return tuple(out)


def word_orbit(word: Sequence[int]):
    """Distinct images of ``word`` under all digit permutations of {0,1,2}."""
    w = tuple(word)
    return sorted({tuple(perm[d] for d in w) for perm in permutations(range(3))})


def orbit_representatives(m: int):
    """Canonical level-m words, one per symmetry orbit, lexicographic."""
    reps = sorted({canonical_word(w) for w in product(range(3), repeat=m)})
    return reps
