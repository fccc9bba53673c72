"""Rule-based "slow aim" aimbots: move a fixed fraction of the way to the target each frame."""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class HeuristicParams:
    activation_range: float  # half-width of the square field of view, degrees
    move_fraction: float
    noise_scale: float = 0.2

    def __post_init__(self):
        if self.activation_range <= 0:
            raise ValueError("activation_range must be positive")
        if not 0 < self.move_fraction <= 1:
            raise ValueError("move_fraction must be in (0, 1]")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")


LIGHT = HeuristicParams(activation_range=5.0, move_fraction=0.4)
STRONG = HeuristicParams(activation_range=15.0, move_fraction=0.6)
PRESETS = {"light": LIGHT, "strong": STRONG}


def in_box(offset, half_width: float) -> bool:
    """Square field-of-view test; the boundary counts as inside."""
    if offset is None:
        return False
    return abs(offset[0]) <= half_width and abs(offset[1]) <= half_width


def heuristic_step(offset, params: HeuristicParams, rng: random.Random | None):
    """Return the (dyaw, dpitch) move toward ``offset``, or None when the bot stays inactive.

    Per axis the move is d = move_fraction * offset plus N(0, noise_scale * |d|) noise. Passing
    ``rng=None`` disables noise.
    """
    if not in_box(offset, params.activation_range):
        return None
    out = []
    for o in offset:
        d = params.move_fraction * o
        if rng is not None and d != 0.0:
            d += rng.gauss(0.0, params.noise_scale * abs(d))
        out.append(d)
    return out[0], out[1]
