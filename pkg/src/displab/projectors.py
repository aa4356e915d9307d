"""Frequency-band projectors and the separated product.

Bands are defined on physical frequencies |xi| = |k|/lambda:

    sharp_dyadic   N = 1: |xi| in [0, 2);  N >= 2: |xi| in [N, 2N)
    smooth_dyadic  same core band, C^inf shoulders (see below)
    interval       per-axis half-open boxes [lo, hi), optionally mirrored
    separation     a pair filter | |xi1| - |xi2| | > lambda, used by
                   separated_product; it has no single-field symbol

The sharp dyadic family is an exact partition of unity on any lattice. The
smooth family uses a fixed profile with value 1 on the band core [N, 2N),
a rise on [N/2, N) and a fall on [2N, 4N) built so that the whole family
sums to exactly SMOOTH_PARTITION_CONSTANT (= 2) on modes between the bottom
and top transition zones; symbol/2 is a partition of unity there. The value
2 is forced: plateaus of width one octave at every dyadic scale overlap
pairwise, so a nonnegative family of this shape cannot sum to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import FourierField, hermitian_reversal
from .lattice import TorusLattice, make_lattice

__all__ = [
    "BandProjector",
    "project",
    "slice_band",
    "separated_product",
    "dyadic_bands",
    "AliasingError",
    "SMOOTH_PARTITION_CONSTANT",
]

SMOOTH_PARTITION_CONSTANT = 2.0


class AliasingError(ValueError):
    """Product modes left the representable range and padding was disabled."""


def _is_dyadic(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0


# -- smooth profile -------------------------------------------------------


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C^inf step: 0 for t <= 0, 1 for t >= 1, exp(-1/t) blend between."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


def _shell_symbol(r: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Smooth shell: 1 on [lo, hi), rising on [lo/2, lo), falling on [hi, 2hi).

    The rise argument is s(2r/lo - 1) and the fall is 1 - s(r/hi - 1); for the
    dyadic family (lo = N, hi = 2N) the rise of scale 2N evaluates the step at
    the bit-identical argument as the fall of scale N/2, so the telescoped sum
    is exactly constant, not merely close.
    """
    r = np.asarray(r, dtype=np.float64)
    rise = _smooth_step(2.0 * r / lo - 1.0)
    fall = 1.0 - _smooth_step(r / hi - 1.0)
    return np.minimum(rise, fall)


def _lowpass_symbol(r: np.ndarray, hi: float) -> np.ndarray:
    """1 on [0, hi), falling to 0 on [hi, 2hi)."""
    return 1.0 - _smooth_step(np.asarray(r, dtype=np.float64) / hi - 1.0)


# -- projector type -------------------------------------------------------


@dataclass(frozen=True)
class BandProjector:
    """A Fourier multiplier selecting (or weighting) a frequency region."""

    kind: str
    band: int = 0
    bounds: tuple = ()
    mirrored: bool = False
    threshold: float = 0.0
    within_band: int = 0

    # factories ----------------------------------------------------------

    @classmethod
    def sharp_dyadic(cls, band: int) -> "BandProjector":
        if not _is_dyadic(band):
            raise ValueError(f"dyadic band must be a power of two >= 1, got {band!r}")
        return cls("sharp_dyadic", band=int(band))

    @classmethod
    def smooth_dyadic(cls, band: int) -> "BandProjector":
        if not _is_dyadic(band):
            raise ValueError(f"dyadic band must be a power of two >= 1, got {band!r}")
        return cls("smooth_dyadic", band=int(band))

    @classmethod
    def interval(cls, bounds, mirrored: bool = False, within_band: int = 0) -> "BandProjector":
        bounds = tuple(
            (float(lo), float(hi)) for lo, hi in (np.atleast_2d(np.asarray(bounds, dtype=float)))
        )
        for lo, hi in bounds:
            if not lo < hi:
                raise ValueError(f"interval bounds must satisfy lo < hi, got [{lo}, {hi})")
        return cls("interval", bounds=bounds, mirrored=mirrored, within_band=int(within_band))

    @classmethod
    def separation(cls, threshold: float) -> "BandProjector":
        threshold = float(threshold)
        if threshold < 0.0:
            raise ValueError(f"separation threshold must be >= 0, got {threshold}")
        return cls("separation", threshold=threshold)

    @classmethod
    def smooth_shell(cls, lo: float, hi: float) -> "BandProjector":
        """Internal helper kind: smooth plateau [lo, hi), used for fattened bands."""
        if not 0.0 < lo < hi:
            raise ValueError(f"shell needs 0 < lo < hi, got ({lo}, {hi})")
        return cls("smooth_shell", bounds=((float(lo), float(hi)),))

    # evaluation ----------------------------------------------------------

    def symbol(self, lattice: TorusLattice) -> np.ndarray:
        return _symbol_cached(self, lattice)

    def mask(self, lattice: TorusLattice) -> np.ndarray:
        """Support of the symbol (boolean)."""
        return self.symbol(lattice) != 0.0

    def apply(self, field: FourierField) -> FourierField:
        return project(field, self)

    def _compute_symbol(self, lattice: TorusLattice) -> np.ndarray:
        kind = self.kind
        if kind in ("sharp_dyadic", "smooth_dyadic"):
            n = self.band
            if n > lattice.nyquist:
                raise ValueError(
                    f"dyadic band {n} exceeds the lattice Nyquist {lattice.nyquist:g}"
                )
            r = lattice.abs_frequency()
            if kind == "sharp_dyadic":
                lo = 0.0 if n == 1 else float(n)
                return ((r >= lo) & (r < 2.0 * n)).astype(np.float64)
            if n == 1:
                return _lowpass_symbol(r, 2.0)
            return _shell_symbol(r, float(n), 2.0 * n)
        if kind == "smooth_shell":
            (lo, hi), = self.bounds
            return _shell_symbol(lattice.abs_frequency(), lo, hi)
        if kind == "interval":
            if len(self.bounds) != lattice.dim:
                raise ValueError(
                    f"interval has {len(self.bounds)} axis bounds, lattice is {lattice.dim}-D"
                )
            keep = np.ones(lattice.shape, dtype=bool)
            grids = lattice.frequency_grids()
            for (lo, hi), g in zip(self.bounds, grids):
                axis_keep = (g >= lo) & (g < hi)
                if self.mirrored:
                    axis_keep = (-g >= lo) & (-g < hi)
                keep = keep & axis_keep
            if self.within_band:
                n = self.within_band
                r = lattice.abs_frequency()
                lo_b = 0.0 if n == 1 else float(n)
                keep = keep & (r >= lo_b) & (r < 2.0 * n)
            return keep.astype(np.float64)
        if kind == "separation":
            raise ValueError("separation projectors filter mode pairs; use separated_product")
        raise ValueError(f"unknown projector kind {kind!r}")


@lru_cache(maxsize=512)
def _symbol_cached(proj: BandProjector, lattice: TorusLattice) -> np.ndarray:
    sym = proj._compute_symbol(lattice)
    sym.flags.writeable = False
    return sym


def project(field: FourierField, projector: BandProjector) -> FourierField:
    """Apply a band projector. Realness survives symbols symmetric in k -> -k."""
    sym = projector.symbol(field.lattice)
    symmetric = bool(np.array_equal(sym, hermitian_reversal(sym)))
    return field.apply_symbol(sym, preserves_real=symmetric)


def dyadic_bands(lattice: TorusLattice) -> list[int]:
    """All dyadic N with a nonempty band on the lattice; their projectors
    sum to the identity exactly."""
    out = [1]
    n = 2
    while n <= lattice.nyquist:
        out.append(n)
        n *= 2
    return out


def slice_band(band: int, fraction: float, dim: int = 1) -> list[BandProjector]:
    """Split the sharp dyadic band into interval projectors of per-axis width
    ceil(fraction * band).

    1-D: per-sign runs of width w covering [N, 2N) and its mirror image
    (-2N, -N], pairwise disjoint, union exactly the band. 2-D: boxes of side
    w tiling [-2N, 2N)^2, each intersected with the band annulus (pieces that
    miss the annulus have empty symbols on any lattice).
    """
    if not _is_dyadic(band):
        raise ValueError(f"band must be a power of two >= 1, got {band!r}")
    n = int(band)
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"fraction must lie in (0, 1/2], got {fraction}")
    if n * fraction < 1.0:
        raise ValueError(f"band {n} * fraction {fraction} < 1 gives empty slice widths")
    w = math.ceil(fraction * n)
    edges = [float(n + i * w) for i in range(math.ceil(n / w))] + [2.0 * n]
    edges = [e for e in edges if e <= 2.0 * n]
    if dim == 1:
        out = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            out.append(BandProjector.interval(((lo, hi),)))
            out.append(BandProjector.interval(((lo, hi),), mirrored=True))
        return out
    if dim == 2:
        out = []
        corners = np.arange(-2 * n, 2 * n, w, dtype=float)
        for ax0 in corners:
            for ax1 in corners:
                out.append(
                    BandProjector.interval(
                        ((ax0, min(ax0 + w, 2.0 * n)), (ax1, min(ax1 + w, 2.0 * n))),
                        within_band=n,
                    )
                )
        return out
    raise ValueError(f"dim must be 1 or 2, got {dim}")


def separated_product(
    u1: FourierField,
    u2: FourierField,
    separation,
    pad: bool = True,
) -> FourierField:
    """Pointwise product restricted to frequency pairs with
    | |xi1| - |xi2| | strictly greater than the separation threshold.

    Computed by direct convolution over the nonzero coefficient pairs
    (O(n1*n2); correctness over speed). With pad=True the result lives on
    the doubled lattice, where no product mode can alias; with pad=False an
    out-of-range output mode raises AliasingError.

    1-D only. In 2-D, modulus separation has no canonical product
    counterpart here; build the regions with interval projectors instead.
    """
    if u1.lattice != u2.lattice:
        raise ValueError("separated_product needs both fields on one lattice")
    lat = u1.lattice
    if lat.dim != 1:
        raise NotImplementedError(
            "separated_product is 1-D; compose interval projectors for 2-D regions"
        )
    if isinstance(separation, BandProjector):
        if separation.kind != "separation":
            raise ValueError(f"expected a separation projector, got kind {separation.kind!r}")
        lam = separation.threshold
    else:
        lam = float(separation)
        if lam < 0.0:
            raise ValueError(f"separation threshold must be >= 0, got {lam}")

    m = lat.modes_per_axis
    modes = lat.modes(0)
    scale = lat.period_scale[0]
    i1 = np.nonzero(u1.coeffs)[0]
    i2 = np.nonzero(u2.coeffs)[0]
    out_lat = lat.with_modes(2 * m) if pad else lat
    m_out = out_lat.modes_per_axis
    buf = np.zeros(m_out, dtype=np.complex128)
    if i1.size and i2.size:
        k1 = modes[i1]
        k2 = modes[i2]
        keep = np.abs(np.abs(k1[:, None]) - np.abs(k2[None, :])) / scale > lam
        vals = (u1.coeffs[i1][:, None] * u2.coeffs[i2][None, :]) * keep
        ksum = k1[:, None] + k2[None, :]
        if not pad:
            live = keep & (vals != 0)
            bad = live & ((ksum < -m // 2) | (ksum >= m // 2))
            if bad.any():
                raise AliasingError(
                    "product modes exceed the lattice Nyquist; pass pad=True"
                )
        idx = (ksum % m_out).ravel()
        flat = vals.ravel()
        buf = (
            np.bincount(idx, weights=flat.real, minlength=m_out)
            + 1j * np.bincount(idx, weights=flat.imag, minlength=m_out)
        )
    real_ok = bool(np.array_equal(buf, np.conj(hermitian_reversal(buf))))
    return FourierField(out_lat, buf, real_symmetric=real_ok, mean_zero=bool(buf[0] == 0))
