"""Lossy-compression distortion curve and its ACK/NACK bookkeeping.

A sensing block of ``block_bits`` bits compressed at integer level k out of
``levels`` occupies (k/levels)*block_bits bits.  Level 0 discards the block at
the floor penalty, level ``levels`` sends it uncompressed at zero distortion,
and in between the curve  scale * ((k/levels)^(-exponent) - 1)  is strictly
decreasing and convex.

When a packet carries a backlog of q blocks (one new plus q-1 previously
failed ones), every block is compressed at the same level and the whole
payload is channel-coded jointly, so the coding rate is q*k*block_bits /
(levels*slot_bits).  A delivery then recoups the floor penalties already
charged for the q-1 earlier failures, which is why the ACK-adjusted value may
go negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import outage_probability

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class DistortionModel:
    exponent: float = 0.35     # curve exponent, in (0, 1)
    scale: float = 19.9        # curve scale, same unit as the floor
    levels: int = 30           # number of compression levels (m)
    d_floor: float = 100.0     # penalty for a lost or discarded block
    block_bits: int = 500      # uncompressed block size
    slot_bits: int = 1000      # channel uses available per slot

    def __post_init__(self) -> None:
        if not 0 < self.exponent < 1:
            raise ValueError("distortion.exponent must lie in (0, 1)")
        if not self.scale > 0:
            raise ValueError("distortion.scale must be positive")
        if self.levels < 2:
            raise ValueError("distortion.levels must be at least 2")
        if not self.d_floor > 0:
            raise ValueError("distortion.d_floor must be positive")
        if self.block_bits <= 0 or self.slot_bits <= 0:
            raise ValueError("block_bits and slot_bits must be positive")
        if self.block_bits > self.slot_bits:
            raise ValueError("block_bits must not exceed slot_bits")
        if source_distortion(self, 1) >= self.d_floor:
            raise ValueError(
                "distortion at level 1 must stay below d_floor; the curve "
                "would not be decreasing at level 0")

    def max_level(self, backlog: int) -> int:
        """Largest usable level when ``backlog`` blocks share one slot."""
        return self.levels // backlog


def source_distortion(model: DistortionModel, level: int) -> float:
    """Distortion introduced by compressing one block at ``level``."""
    if not 0 <= level <= model.levels:
        raise ValueError(f"level must be in 0..{model.levels}")
    if level == 0:
        return model.d_floor
    # scale * ((k/m)^-a - 1), via expm1 so level == levels gives exactly 0
    return model.scale * math.expm1(-model.exponent * math.log(level / model.levels))


def coding_rate(model: DistortionModel, backlog: int, level: int) -> float:
    """Joint coding rate for ``backlog`` blocks compressed at ``level``.

    The ratio is formed from exact integer products before the single float
    division, avoiding cancellation for small rates.
    """
    return (backlog * level * model.block_bits) / (model.levels * model.slot_bits)


def ack_distortion(model: DistortionModel, backlog: int, level: int) -> float:
    """Distortion booked on a successful delivery of ``backlog`` blocks.

    The q delivered blocks contribute q*D(level), minus the q-1 floor
    penalties previously charged when those blocks failed.  Negative values
    are legitimate: they credit back penalties.
    """
    if backlog < 1:
        raise ValueError("backlog must be at least 1")
    if not 1 <= level <= model.max_level(backlog):
        raise ValueError(
            f"level must be in 1..{model.max_level(backlog)} for backlog {backlog}")
    return backlog * source_distortion(model, level) - (backlog - 1) * model.d_floor


def expected_receiver_distortion(model: DistortionModel, gamma_bar: float,
                                 backlog: int, level: int) -> float:
    """Expected distortion of a backlog-q packet sent at ``level``.

    Averages the success branch (q blocks at the source distortion) and the
    outage branch (q floor penalties); level 0 means the packet is discarded
    outright.
    """
    if backlog < 1:
        raise ValueError("backlog must be at least 1")
    if not 0 <= level <= model.max_level(backlog):
        raise ValueError(
            f"level must be in 0..{model.max_level(backlog)} for backlog {backlog}")
    if level == 0:
        return backlog * model.d_floor
    p_out = outage_probability(coding_rate(model, backlog, level), gamma_bar)
    d_src = source_distortion(model, level)
    return backlog * d_src * (1.0 - p_out) + backlog * model.d_floor * p_out
