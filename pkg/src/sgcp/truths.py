"""Catalog of ground-truth intensities for simulation studies.

Each truth is strictly positive on [0,1]^d and tagged with its Sobolev-type
smoothness: trigonometric polynomials are infinitely smooth (``math.inf``),
while the lacunary series member has coefficients decaying just fast enough
for smoothness 2 and no more. Smoothness fixes the benchmark's theoretical
rate exponent ``beta / (2 beta + d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .point_process import Grid, IntensityField


@dataclass(frozen=True)
class TruthSpec:
    """A named intensity with known dimension and smoothness."""

    name: str
    dim: int
    smoothness: float
    fn: Callable[[np.ndarray], np.ndarray]

    def field(self, resolution: int) -> IntensityField:
        grid = Grid(self.dim, resolution)
        return IntensityField(grid, self.fn(grid.nodes()))

    @property
    def rate_exponent(self) -> float:
        """Theoretical contraction exponent beta / (2 beta + d)."""
        if math.isinf(self.smoothness):
            return 0.5
        return self.smoothness / (2.0 * self.smoothness + self.dim)


def _sin1d(pts: np.ndarray) -> np.ndarray:
    return 2.0 + np.sin(2.0 * math.pi * pts[:, 0])


def _sin2d(pts: np.ndarray) -> np.ndarray:
    return 2.0 + np.sin(2.0 * math.pi * pts[:, 0]) * np.sin(2.0 * math.pi * pts[:, 1])


_SERIES_K = np.arange(1, 65, dtype=np.float64)
_SERIES_COEF = _SERIES_K ** -2.5
_SERIES_PHASE = 0.7 * _SERIES_K


def _series_beta2(pts: np.ndarray) -> np.ndarray:
    args = 2.0 * math.pi * pts[:, 0:1] * _SERIES_K[None, :] + _SERIES_PHASE[None, :]
    return 2.0 + np.sin(args) @ _SERIES_COEF


def _const4(pts: np.ndarray) -> np.ndarray:
    return np.full(pts.shape[0], 4.0)


TRUTHS = {
    "sin1d": TruthSpec("sin1d", 1, math.inf, _sin1d),
    "sin2d": TruthSpec("sin2d", 2, math.inf, _sin2d),
    "series-beta2": TruthSpec("series-beta2", 1, 2.0, _series_beta2),
    "const4": TruthSpec("const4", 1, math.inf, _const4),
}


def get_truth(name: str) -> TruthSpec:
    try:
        return TRUTHS[name]
    except KeyError:
        raise ValueError(
            f"unknown truth {name!r}; available: {', '.join(sorted(TRUTHS))}") from None
