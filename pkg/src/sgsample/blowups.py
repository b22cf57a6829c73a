"""Sampling on expanding blowups of the gasket.

Stage j of a blowup sequence (i_1, i_2, ...) views the gasket K inside the
expanded copy K_(j) = F_{i_1}^{-1} ... F_{i_j}^{-1} K.  The stage-j sampler
for a level-m cell F_w K reduces, through the coordinate change, to the
ordinary sampling function of the level-(m+j) cell addressed by the word
``w + (i_1, ..., i_j)`` (appending a digit composes the map on the outside).
Its constant component is 3**-(m+j): every other basis member integrates to
zero, and the sampler's integral equals the measure of its target cell.

Whether two of the digits 0, 1, 2 occur infinitely often is a property of
the full infinite sequence and cannot be checked on the finite prefix the
code holds; results carry a disclaimer to that effect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import SizeCapExceeded
from .geometry import SG
from .sampling import BandlimitedFunction, SamplingStats, sampling_function

#: deepest level the dense bandlimited basis supports
STAGE_CAP_LEVEL = 5

PREFIX_DISCLAIMER = (
    "finite prefix: the infinite-occurrence condition on the sequence "
    "is assumed, not checked"
)


def _check_sequence(sequence: Sequence[int], stage: int):
    seq = tuple(int(d) for d in sequence)
    for d in seq:
        if d not in (0, 1, 2):
            raise ValueError(f"blowup digits must be 0, 1, or 2, got {d}")
    if len(seq) < stage:
        raise ValueError(f"sequence prefix of length {len(seq)} < stage {stage}")
    return seq


@dataclass
class BlowupSampler:
    """Stage-j sampler for a base cell, represented intrinsically by the
    deeper sampling function on K plus the coordinate-change bookkeeping."""

    base_word: tuple
    sequence: tuple
    stage: int
    extended_word: tuple
    phi: BandlimitedFunction
    stats: SamplingStats
    constant_term: float
    disclaimer: str = PREFIX_DISCLAIMER

    def lift_word(self, word: Sequence[int], from_stage: int, to_stage: int) -> tuple:
        """Address bookkeeping for the nested copies: the cell ``word`` of
        K_(from_stage) seen as a cell of K_(to_stage)."""
        if not 0 <= from_stage <= to_stage <= len(self.sequence):
            raise ValueError("stages out of range for the stored prefix")
        return tuple(word) + self.sequence[from_stage:to_stage]


def blowup_sampler(
    word: Sequence[int],
    sequence: Sequence[int],
    stage: int,
    normalization: str = "B",
    quad_level: Optional[int] = None,
) -> BlowupSampler:
    """Construct the stage-``stage`` sampler for the cell of ``word``."""
    w = SG.check_word(word)
    seq = _check_sequence(sequence, stage)
    m = len(w)
    if m + stage > STAGE_CAP_LEVEL:
        raise SizeCapExceeded(
            f"stage {stage} needs a level-{m + stage} basis; cap is {STAGE_CAP_LEVEL}"
        )
    extended = w + seq[:stage]
    phi, stats = sampling_function(extended, normalization, quad_level)
    return BlowupSampler(
        base_word=w,
        sequence=seq,
        stage=stage,
        extended_word=extended,
        phi=phi,
        stats=stats,
        constant_term=3.0 ** -(m + stage),
    )


def conjecture_metrics(
    word: Sequence[int],
    sequence: Sequence[int],
    stages: int,
    normalization: str = "B",
    quad_level: Optional[int] = None,
):
    """Per-stage sup and integral metrics for stages 0..stages.

    ``scaled_l2`` is the bound the squared-integral conjecture is about;
    ``raw_integral`` is the same quantity in blowup coordinates,
    3**j * integral over K of phi_j squared = 3**-m * scaled_l2.
    """
    w = SG.check_word(word)
    m = len(w)
    out = []
    for j in range(stages + 1):
        sampler = blowup_sampler(word, sequence, j, normalization, quad_level)
        out.append(
            {
                "stage": j,
                "word": sampler.extended_word,
                "sup": sampler.stats.sup_norm,
                "scaled_l2": sampler.stats.scaled_l2,
                "raw_integral": 3.0**-m * sampler.stats.scaled_l2,
                "constant_term": sampler.constant_term,
                "quad_level": sampler.stats.quad_level,
                "gap": sampler.stats.gap,
            }
        )
    return out
