"""Periodic Fourier lattices.

A lattice fixes the discretization of the torus: dimension (1 or 2), a
power-of-two mode count per axis, and a per-axis period scale lambda. Grid
points live on [0, 2*pi*lambda) per axis and the physical frequency of the
integer mode k is k/lambda, so dyadic band arithmetic is done on physical
frequencies and is independent of the torus size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = ["TorusLattice", "make_lattice"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TorusLattice:
    """Uniform grid on a 1-D or 2-D torus with FFT-ordered integer modes."""

    dim: int
    modes_per_axis: int
    period_scale: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        m = self.modes_per_axis
        if not isinstance(m, (int, np.integer)) or not _is_power_of_two(int(m)) or m < 8:
            raise ValueError(f"modes_per_axis must be a power of two >= 8, got {m!r}")
        object.__setattr__(self, "modes_per_axis", int(m))
        scale = self.period_scale
        if scale is None:
            scale = (1.0,) * self.dim
        elif isinstance(scale, (int, float, np.floating)):
            scale = (float(scale),) * self.dim
        else:
            scale = tuple(float(s) for s in scale)
        if len(scale) != self.dim:
            raise ValueError(f"period_scale needs {self.dim} entries, got {len(scale)}")
        if any(not np.isfinite(s) or s <= 0.0 for s in scale):
            raise ValueError(f"period_scale entries must be positive, got {scale}")
        object.__setattr__(self, "period_scale", scale)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.modes_per_axis,) * self.dim

    @property
    def mode_count(self) -> int:
        return self.modes_per_axis**self.dim

    @property
    def nyquist(self) -> float:
        """Smallest per-axis physical Nyquist frequency, M / (2 lambda)."""
        return min(self.modes_per_axis / (2.0 * s) for s in self.period_scale)

    def modes(self, axis: int = 0) -> np.ndarray:
        """Integer modes along an axis in FFT order: 0..M/2-1, -M/2..-1."""
        self._check_axis(axis)
        m = self.modes_per_axis
        return np.fft.fftfreq(m, d=1.0 / m).astype(np.int64)

    def frequencies(self, axis: int = 0) -> np.ndarray:
        """Physical frequencies k/lambda along an axis, FFT order."""
        self._check_axis(axis)
        return self.modes(axis) / self.period_scale[axis]

    def frequency_grids(self) -> tuple[np.ndarray, ...]:
        """Physical frequency arrays broadcastable to the coefficient shape."""
        grids = np.meshgrid(
            *(self.frequencies(ax) for ax in range(self.dim)),
            indexing="ij",
            sparse=True,
        )
        return tuple(grids)

    def abs_frequency(self) -> np.ndarray:
        """Euclidean |xi| on the full coefficient shape."""
        grids = self.frequency_grids()
        out = np.zeros(self.shape)
        for g in grids:
            out = out + g**2
        return np.sqrt(out)

    def grid(self, axis: int = 0) -> np.ndarray:
        """Spatial sample points 2*pi*lambda*j/M along an axis."""
        self._check_axis(axis)
        m = self.modes_per_axis
        return 2.0 * np.pi * self.period_scale[axis] * np.arange(m) / m

    def spatial_grids(self) -> tuple[np.ndarray, ...]:
        grids = np.meshgrid(
            *(self.grid(ax) for ax in range(self.dim)), indexing="ij", sparse=True
        )
        return tuple(grids)

    def with_modes(self, modes_per_axis: int) -> "TorusLattice":
        """Same torus, different resolution (used for zero-padded products)."""
        return TorusLattice(self.dim, modes_per_axis, self.period_scale)

    def _check_axis(self, axis: int) -> None:
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for dim {self.dim}")

    def __repr__(self) -> str:  # concise, scales matter in logs
        return (
            f"TorusLattice(dim={self.dim}, modes_per_axis={self.modes_per_axis}, "
            f"period_scale={self.period_scale})"
        )


@lru_cache(maxsize=64)
def _cached_lattice(dim: int, modes_per_axis: int, period_scale: tuple) -> TorusLattice:
    return TorusLattice(dim, modes_per_axis, period_scale)


def make_lattice(dim: int, modes_per_axis: int, period_scale=1.0) -> TorusLattice:
    """Construct (and cache) a lattice; scalar period_scale is broadcast."""
    if isinstance(period_scale, (int, float, np.floating)):
        scale = (float(period_scale),) * dim
    else:
        scale = tuple(float(s) for s in period_scale)
    return _cached_lattice(dim, int(modes_per_axis), scale)
