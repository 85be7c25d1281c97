"""Search-space definition and unit-hypercube rescaling."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class SearchSpace:
    """Continuous box bounds plus categorical cardinalities.

    All internal optimization happens in [0,1]^d; raw coordinates are mapped
    per-dimension by an affine rescaling.
    """

    continuous: Tuple[Tuple[float, float], ...]
    categorical: Tuple[int, ...] = ()

    def __post_init__(self):
        cont = tuple((float(lo), float(hi)) for lo, hi in self.continuous)
        object.__setattr__(self, "continuous", cont)
        object.__setattr__(self, "categorical", tuple(int(c) for c in self.categorical))
        for lo, hi in cont:
            if not lo < hi:
                raise ValueError(f"bounds ({lo}, {hi}) must satisfy lower < upper")
        for c in self.categorical:
            if c < 2:
                raise ValueError("categorical cardinalities must be >= 2")

    @property
    def dim(self) -> int:
        return len(self.continuous)

    @property
    def n_categorical(self) -> int:
        return len(self.categorical)

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.continuous])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.continuous])

    def to_unit(self, x) -> np.ndarray:
        """Raw coordinates -> [0,1]^d."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.lower, self.upper
        if x.shape[-1] != self.dim:
            raise ValueError("point dimension does not match space")
        if np.any(x < lo) or np.any(x > hi):
            raise ValueError("point lies outside the search-space bounds")
        return (x - lo) / (hi - lo)

    def from_unit(self, u) -> np.ndarray:
        """[0,1]^d -> raw coordinates; 0 and 1 map to the bounds exactly."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape[-1] != self.dim:
            raise ValueError("point dimension does not match space")
        if np.any(u < 0) or np.any(u > 1):
            raise ValueError("unit point lies outside [0,1]^d")
        lo, hi = self.lower, self.upper
        return lo + u * (hi - lo)
