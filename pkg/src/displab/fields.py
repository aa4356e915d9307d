"""Fourier-side fields on a torus lattice.

Coefficients are stored in FFT order. The transform pair is normalized so
that Plancherel is exact in the discrete setting:

    synthesize(c)[j] = sum_k c(k) exp(i k x_j / lambda)   (= M^d * ifft_n)
    analyze(f)       = fft_n(f) / M^d

hence a single mode with unit coefficient has unit L^2 norm and
||u||_{L^2} = sqrt(sum |c(k)|^2) = rms of the grid samples.

Fields are immutable. The real_symmetric flag certifies exact Hermitian
symmetry c(-k) == conj(c(k)) (bit equality, checked at construction); the
mean_zero flag certifies c(0) == 0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import TorusLattice, make_lattice

__all__ = [
    "FourierField",
    "synthesize",
    "analyze",
    "derivative",
    "hilbert_transform",
    "random_field",
    "hermitian_reversal",
    "save_field",
    "load_field",
]

_SNAPSHOT_MAGIC = "displab-field 1"


def hermitian_reversal(coeffs: np.ndarray) -> np.ndarray:
    """Return the array r with r[k] = coeffs[-k mod M] along every axis."""
    out = np.flip(coeffs)
    for ax in range(out.ndim):
        out = np.roll(out, 1, axis=ax)
    return out


def _is_hermitian(coeffs: np.ndarray) -> bool:
    return np.array_equal(coeffs, np.conj(hermitian_reversal(coeffs)))


@dataclass(frozen=True, eq=False)
class FourierField:
    """Immutable coefficient array tied to a lattice, plus exact flags."""

    lattice: TorusLattice
    coeffs: np.ndarray
    real_symmetric: bool = False
    mean_zero: bool = False

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs)
        if c.shape != self.lattice.shape:
            raise ValueError(
                f"coefficient shape {c.shape} does not match lattice {self.lattice.shape}"
            )
        c = np.ascontiguousarray(c, dtype=np.complex128).copy()
        if self.real_symmetric and not _is_hermitian(c):
            raise ValueError("real_symmetric set but coefficients are not exactly Hermitian")
        if self.mean_zero and c.flat[0] != 0:
            raise ValueError("mean_zero set but the mean coefficient is nonzero")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, lattice: TorusLattice) -> "FourierField":
        return cls(lattice, np.zeros(lattice.shape), real_symmetric=True, mean_zero=True)

    @classmethod
    def single_mode(cls, lattice: TorusLattice, mode, coeff=1.0) -> "FourierField":
        """Field with one nonzero coefficient at the given integer mode."""
        c = np.zeros(lattice.shape, dtype=np.complex128)
        idx = tuple(int(m) % lattice.modes_per_axis for m in np.atleast_1d(mode))
        if len(idx) != lattice.dim:
            raise ValueError(f"mode needs {lattice.dim} components")
        c[idx] = coeff
        return cls(lattice, c, mean_zero=(c.flat[0] == 0))

    @classmethod
    def from_samples(cls, lattice: TorusLattice, samples: np.ndarray) -> "FourierField":
        return analyze(lattice, samples)

    # -- basics --------------------------------------------------------

    @property
    def norm(self) -> float:
        """L^2 norm, sqrt of the coefficient energy."""
        return float(np.linalg.norm(self.coeffs))

    @property
    def mean(self) -> complex:
        return complex(self.coeffs.flat[0])

    def with_coeffs(self, coeffs, real_symmetric=False, mean_zero=False) -> "FourierField":
        return FourierField(self.lattice, coeffs, real_symmetric, mean_zero)

    def apply_symbol(self, symbol: np.ndarray, preserves_real: bool = False) -> "FourierField":
        """Multiply coefficients by a Fourier symbol evaluated in FFT order."""
        out = self.coeffs * symbol
        mean_zero = bool(out.flat[0] == 0)
        return FourierField(
            self.lattice, out, self.real_symmetric and preserves_real, mean_zero
        )

    def synthesize(self) -> np.ndarray:
        return synthesize(self)

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check_same_lattice(other)
        return FourierField(
            self.lattice,
            self.coeffs + other.coeffs,
            self.real_symmetric and other.real_symmetric,
            self.mean_zero and other.mean_zero,
        )

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check_same_lattice(other)
        return FourierField(
            self.lattice,
            self.coeffs - other.coeffs,
            self.real_symmetric and other.real_symmetric,
            self.mean_zero and other.mean_zero,
        )

    def __mul__(self, scalar) -> "FourierField":
        z = complex(scalar)
        real_ok = self.real_symmetric and z.imag == 0.0
        return FourierField(self.lattice, self.coeffs * z, real_ok, self.mean_zero)

    __rmul__ = __mul__

    def _check_same_lattice(self, other: "FourierField") -> None:
        if other.lattice != self.lattice:
            raise ValueError("fields live on different lattices")


def synthesize(field: FourierField) -> np.ndarray:
    """Grid samples of the field; real dtype when the field certifies realness."""
    m = field.lattice.mode_count
    samples = np.fft.ifftn(field.coeffs) * m
    if field.real_symmetric:
        return samples.real.copy()
    return samples


def analyze(lattice: TorusLattice, samples: np.ndarray) -> FourierField:
    """Inverse of synthesize.

    Real-valued samples get their coefficients Hermitian-symmetrized (a
    roundoff-level correction) so the real_symmetric flag is exact.
    """
    samples = np.asarray(samples)
    if samples.shape != lattice.shape:
        raise ValueError(f"sample shape {samples.shape} does not match lattice {lattice.shape}")
    coeffs = np.fft.fftn(samples) / lattice.mode_count
    real_input = np.isrealobj(samples)
    if real_input:
        coeffs = 0.5 * (coeffs + np.conj(hermitian_reversal(coeffs)))
    return FourierField(
        lattice, coeffs, real_symmetric=real_input, mean_zero=bool(coeffs.flat[0] == 0)
    )


def derivative(field: FourierField, axis: int = 0) -> FourierField:
    """Spectral d/dx_axis. The unpaired Nyquist mode is zeroed so that
    differentiation maps real fields to real fields exactly."""
    lat = field.lattice
    lat._check_axis(axis)
    freqs = lat.frequencies(axis)
    symbol1d = 1j * freqs
    symbol1d[lat.modes_per_axis // 2] = 0.0  # unpaired mode has no conjugate partner
    shape = [1] * lat.dim
    shape[axis] = lat.modes_per_axis
    out = field.apply_symbol(symbol1d.reshape(shape), preserves_real=True)
    # a derivative always kills the mean
    return FourierField(lat, out.coeffs, out.real_symmetric, mean_zero=True)


def hilbert_transform(field: FourierField) -> FourierField:
    """Periodic Hilbert transform, symbol -i*sgn(xi) with sgn(0) = 0.

    1-D only. The Nyquist mode is zeroed (same reason as in derivative), so
    H(H(u)) = -(u - mean(u)) holds exactly on fields that avoid it.
    """
    lat = field.lattice
    if lat.dim != 1:
        raise ValueError("hilbert_transform is defined for 1-D lattices only")
    symbol = -1j * np.sign(lat.frequencies(0))
    symbol[lat.modes_per_axis // 2] = 0.0
    out = field.apply_symbol(symbol, preserves_real=True)
    return FourierField(lat, out.coeffs, out.real_symmetric, mean_zero=True)


def _band_mask(lattice: TorusLattice, band) -> np.ndarray:
    """Accept a boolean mask or anything with .mask(lattice) (a projector)."""
    if hasattr(band, "mask"):
        mask = band.mask(lattice)
        mask = np.asarray(mask) != 0
    else:
        mask = np.asarray(band, dtype=bool)
    if mask.shape != lattice.shape:
        raise ValueError(f"band mask shape {mask.shape} does not match lattice {lattice.shape}")
    return mask


def random_field(
    lattice: TorusLattice,
    band,
    seed,
    real_symmetric: bool = False,
    mean_zero: bool = True,
    unit_norm: bool = True,
) -> FourierField:
    """Gaussian random field supported on a band.

    Coefficients on the band are independent standard complex Gaussians
    (variance 1 split evenly between the parts). The same seed produces a
    bit-identical field. seed may be an int or a numpy SeedSequence.
    """
    mask = _band_mask(lattice, band)
    if not mask.any():
        raise ValueError("band is empty on this lattice")
    rng = np.random.default_rng(seed)
    n = int(mask.sum())
    draws = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    coeffs = np.zeros(lattice.shape, dtype=np.complex128)
    coeffs[mask] = draws
    if real_symmetric:
        coeffs = 0.5 * (coeffs + np.conj(hermitian_reversal(coeffs)))
        # the unpaired Nyquist mode cannot be symmetrized against a partner
        nyq = lattice.modes_per_axis // 2
        sl = [slice(None)] * lattice.dim
        for ax in range(lattice.dim):
            sl_ax = list(sl)
            sl_ax[ax] = nyq
            coeffs[tuple(sl_ax)] = np.real(coeffs[tuple(sl_ax)])
        coeffs[~mask] = 0.0
        # masking can break exact symmetry only if the band itself is asymmetric
        if not _is_hermitian(coeffs):
            raise ValueError("real_symmetric draw requires a band symmetric under k -> -k")
    if mean_zero:
        coeffs.flat[0] = 0.0
        if not coeffs.any():
            raise ValueError("band contains only the mean mode; nothing left to draw")
    if unit_norm:
        coeffs /= np.linalg.norm(coeffs)
    return FourierField(
        lattice,
        coeffs,
        real_symmetric=real_symmetric,
        mean_zero=mean_zero or bool(coeffs.flat[0] == 0),
    )


# -- snapshot format ----------------------------------------------------
#
# Line-oriented, self-describing, plain text:
#
#   displab-field 1
#   dim 2
#   modes_per_axis 16
#   period_scale 1 1.25
#   real_symmetric 1
#   mean_zero 0
#   coeffs 256
#   <re> <im>        (row-major FFT order, one coefficient per line)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_field(field: FourierField, path) -> None:
    lat = field.lattice
    lines = [
        _SNAPSHOT_MAGIC,
        f"dim {lat.dim}",
        f"modes_per_axis {lat.modes_per_axis}",
        "period_scale " + " ".join(_fmt(s) for s in lat.period_scale),
        f"real_symmetric {int(field.real_symmetric)}",
        f"mean_zero {int(field.mean_zero)}",
        f"coeffs {lat.mode_count}",
    ]
    flat = field.coeffs.reshape(-1)
    lines.extend(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in flat)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field(path) -> FourierField:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic line)")

    header: dict[str, str] = {}
    body_start = None
    for i, ln in enumerate(lines[1:], start=1):
        key, _, rest = ln.partition(" ")
        header[key] = rest
        if key == "coeffs":
            body_start = i + 1
            break
    required = ("dim", "modes_per_axis", "period_scale", "real_symmetric", "mean_zero", "coeffs")
    missing = [k for k in required if k not in header]
    if missing:
        raise ValueError(f"{path}: snapshot header missing {missing}")

    dim = int(header["dim"])
    m = int(header["modes_per_axis"])
    scale = tuple(float(s) for s in header["period_scale"].split())
    count = int(header["coeffs"])
    lat = make_lattice(dim, m, scale)
    if count != lat.mode_count:
        raise ValueError(f"{path}: expected {lat.mode_count} coefficients, header says {count}")
    body = lines[body_start : body_start + count]
    if len(body) != count:
        raise ValueError(f"{path}: expected {count} coefficient lines, found {len(body)}")
    data = np.array([[float(a), float(b)] for a, b in (ln.split() for ln in body)])
    coeffs = (data[:, 0] + 1j * data[:, 1]).reshape(lat.shape)
    return FourierField(
        lat,
        coeffs,
        real_symmetric=bool(int(header["real_symmetric"])),
        mean_zero=bool(int(header["mean_zero"])),
    )
