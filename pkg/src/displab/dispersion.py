"""Dispersion relations and the free propagator.

A DispersionSpec holds a phase symbol phi on physical frequencies together
with its group velocity and order alpha (|grad phi| ~ N^(alpha-1) on the
dyadic band N, up to the spec's declared constant). The free flow is the
unitary multiplier exp(i t phi(xi)).

Built-ins, addressable by the config names in parentheses:

    schrodinger ("schrodinger")       phi = -|xi|^2          alpha = 2, 1-D/2-D
    fractional  ("fractional:a")      phi = -xi |xi|^(a-1)   alpha = a, 1-D
    airy        ("airy")              phi = xi^3             alpha = 3, 1-D
    zk          ("zk")                phi = k1^3 + 3 k1 k2^2 alpha = 3, 2-D
    symmetrized ("zk-sym")            phi = k1^3 + k2^3      alpha = 3, 2-D

At a = 2 the fractional symbol is the Benjamin-Ono linear part: exp(i t phi)
solves d_t u + H d_xx u = 0. The zk symbol is not of sum type; the
symmetrized variant is its image under the shear A(k') = mu (k1'+k2',
k1'-k2'), mu = 4^(-1/3), which maps cubes onto it exactly. The natural grid
for the symmetrized symbol, A^-1(Z^2), is an ordinary lattice with per-axis
period scale 2^(1/3) (tests confirm 2 mu A^-1 k is integer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fields import FourierField, hermitian_reversal
from .lattice import TorusLattice, make_lattice

__all__ = [
    "DispersionSpec",
    "EuclideanWindow",
    "window",
    "propagate",
    "order_check",
    "zk_symmetrize_check",
    "get_spec",
    "builtin_spec_names",
    "ZK_SYMMETRIZER_MU",
    "ZK_SYM_PERIOD_SCALE",
]

ZK_SYMMETRIZER_MU = 4.0 ** (-1.0 / 3.0)
# period scale whose physical frequencies are exactly the symmetrized grid
ZK_SYM_PERIOD_SCALE = 2.0 ** (1.0 / 3.0)


@dataclass(frozen=True)
class DispersionSpec:
    """Phase symbol, group velocity, and the band-scaling metadata."""

    name: str
    alpha: float
    dim: int  # 0 means the symbol works in 1-D and 2-D
    sum_type: bool
    odd_symbol: bool
    order_constant: float
    _phase: Callable
    _velocity: Callable

    def phase(self, grids: Sequence[np.ndarray]) -> np.ndarray:
        """phi evaluated on (broadcastable) physical frequency grids."""
        return self._phase(*grids)

    def group_velocity(self, grids: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
        out = self._velocity(*grids)
        return out if isinstance(out, tuple) else (out,)

    def accepts_dim(self, dim: int) -> bool:
        return self.dim == 0 or self.dim == dim

    def check_lattice(self, lattice: TorusLattice) -> None:
        if not self.accepts_dim(lattice.dim):
            raise ValueError(f"spec {self.name!r} is {self.dim}-D, lattice is {lattice.dim}-D")

    def __repr__(self) -> str:
        return f"DispersionSpec({self.name!r}, alpha={self.alpha})"


def _schrodinger_phase(*grids):
    out = 0.0
    for g in grids:
        out = out - g * g
    return out


def _fractional(a: float):
    def phase(g):
        return -g * np.abs(g) ** (a - 1.0)

    def velocity(g):
        return (-a * np.abs(g) ** (a - 1.0),)

    return phase, velocity


_SCHRODINGER = DispersionSpec(
    "schrodinger",
    alpha=2.0,
    dim=0,
    sum_type=True,
    odd_symbol=False,
    order_constant=4.0,
    _phase=_schrodinger_phase,
    _velocity=lambda *grids: tuple(-2.0 * g for g in grids),
)

_AIRY = DispersionSpec(
    "airy",
    alpha=3.0,
    dim=1,
    sum_type=True,
    odd_symbol=True,
    order_constant=16.0,
    _phase=lambda g: g**3,
    _velocity=lambda g: (3.0 * g**2,),
)

_ZK = DispersionSpec(
    "zk",
    alpha=3.0,
    dim=2,
    sum_type=False,
    odd_symbol=True,
    order_constant=32.0,
    _phase=lambda g1, g2: g1**3 + 3.0 * g1 * g2**2,
    _velocity=lambda g1, g2: (3.0 * g1**2 + 3.0 * g2**2, 6.0 * g1 * g2),
)

_ZK_SYM = DispersionSpec(
    "zk-sym",
    alpha=3.0,
    dim=2,
    sum_type=True,
    odd_symbol=True,
    order_constant=16.0,
    _phase=lambda g1, g2: g1**3 + g2**3,
    _velocity=lambda g1, g2: (3.0 * g1**2, 3.0 * g2**2),
)


def _fractional_spec(a: float) -> DispersionSpec:
    if not 1.0 < a <= 3.0:
        raise ValueError(f"fractional order must lie in (1, 3], got {a}")
    phase, velocity = _fractional(a)
    return DispersionSpec(
        f"fractional:{a:g}",
        alpha=float(a),
        dim=1,
        sum_type=True,
        odd_symbol=True,
        order_constant=4.0 if a <= 2.0 else 16.0,
        _phase=phase,
        _velocity=velocity,
    )


def builtin_spec_names() -> list[str]:
    return ["schrodinger", "fractional:a", "airy", "zk", "zk-sym"]


def get_spec(name: str) -> DispersionSpec:
    """Resolve a config name ('schrodinger', 'fractional:2.5', 'airy', 'zk',
    'zk-sym') to a DispersionSpec."""
    name = str(name).strip()
    if name == "schrodinger":
        return _SCHRODINGER
    if name == "airy":
        return _AIRY
    if name == "zk":
        return _ZK
    if name == "zk-sym":
        return _ZK_SYM
    if name.startswith("fractional:"):
        try:
            a = float(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad fractional order in spec name {name!r}") from None
        return _fractional_spec(a)
    raise ValueError(f"unknown dispersion spec {name!r}; known: {builtin_spec_names()}")


# -- shorttime window -----------------------------------------------------


@dataclass(frozen=True)
class EuclideanWindow:
    """Time window [0, delta] with delta = band^-(alpha-1)."""

    band: int
    alpha: float
    delta: float


def window(spec: DispersionSpec, band: int) -> EuclideanWindow:
    if band < 1:
        raise ValueError(f"band must be >= 1, got {band}")
    a = spec.alpha
    if float(a).is_integer():
        # integer exponent: exact power of two, so delta * band^(alpha-1) == 1
        delta = 1.0 / float(int(band) ** (int(a) - 1))
    else:
        delta = float(band) ** -(a - 1.0)
    return EuclideanWindow(band=int(band), alpha=a, delta=delta)


# -- free propagator ------------------------------------------------------


def propagate(field: FourierField, spec: DispersionSpec, t: float) -> FourierField:
    """Apply exp(i t phi). Unitary; realness survives odd symbols."""
    spec.check_lattice(field.lattice)
    phi = spec.phase(field.lattice.frequency_grids())
    out = field.coeffs * np.exp(1j * float(t) * phi)
    real_ok = field.real_symmetric and spec.odd_symbol
    if real_ok:
        # mathematically exact for odd phi; enforce against libm asymmetry
        out = 0.5 * (out + np.conj(hermitian_reversal(out)))
    return FourierField(
        field.lattice, out, real_symmetric=real_ok, mean_zero=bool(out.flat[0] == 0)
    )


def phase_on(spec: DispersionSpec, lattice: TorusLattice) -> np.ndarray:
    """phi broadcast to the full coefficient shape (helper for the harnesses)."""
    spec.check_lattice(lattice)
    return np.broadcast_to(
        spec.phase(lattice.frequency_grids()), lattice.shape
    ).astype(np.float64, copy=True)


# -- audits ---------------------------------------------------------------


def order_check(
    spec: DispersionSpec,
    band: int,
    lattice: TorusLattice | None = None,
    dim: int | None = None,
) -> tuple[float, float]:
    """Extremes of |grad phi| / band^(alpha-1) over the sharp band.

    Built-ins keep both extremes within [1/C, C] for the spec's declared
    constant C, for every dyadic band the lattice resolves.
    """
    if lattice is None:
        d = dim if dim is not None else (spec.dim or 1)
        m = 64
        while m < 8 * band:
            m *= 2
        lattice = make_lattice(d, m)
    spec.check_lattice(lattice)
    if band > lattice.nyquist:
        raise ValueError(f"band {band} exceeds lattice Nyquist {lattice.nyquist:g}")
    r = lattice.abs_frequency()
    lo = 0.0 if band == 1 else float(band)
    mask = (r >= lo) & (r < 2.0 * band)
    if band == 1:
        mask &= r > 0  # the zero mode has no meaningful group speed
    grids = lattice.frequency_grids()
    speed_sq = np.zeros(lattice.shape)
    for v in spec.group_velocity(grids):
        speed_sq = speed_sq + np.broadcast_to(v * v, lattice.shape)
    speeds = np.sqrt(speed_sq[mask])
    scale = float(band) ** (spec.alpha - 1.0)
    return float(speeds.min() / scale), float(speeds.max() / scale)


def zk_symmetrizer_matrix() -> np.ndarray:
    return ZK_SYMMETRIZER_MU * np.array([[1.0, 1.0], [1.0, -1.0]])


def zk_symmetrize_check(count: int = 10_000, seed: int = 0, extent: int = 200) -> float:
    """Max relative deviation over the symmetrization identities.

    Checks phi_zk(A k') == (k1')^3 + (k2')^3 on `count` random integer points
    and that 2 mu A^-1 k is an even-parity integer pair (the rescaled grid
    image of the integer lattice). Returns the worst relative deviation.
    """
    rng = np.random.default_rng(seed)
    kp = rng.integers(-extent, extent + 1, size=(count, 2)).astype(np.float64)
    a = zk_symmetrizer_matrix()
    # apply the shear elementwise: matmul FMA breaks the exact k1'=-k2'
    # cancellation and inflates the deviation on the rhs zero set
    g1 = ZK_SYMMETRIZER_MU * (kp[:, 0] + kp[:, 1])
    g2 = ZK_SYMMETRIZER_MU * (kp[:, 0] - kp[:, 1])
    lhs = _ZK.phase((g1, g2))
    rhs = kp[:, 0] ** 3 + kp[:, 1] ** 3
    dev_phase = np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs)))

    k = rng.integers(-extent, extent + 1, size=(count, 2)).astype(np.float64)
    back = np.linalg.solve(a, k.T).T * (2.0 * ZK_SYMMETRIZER_MU)
    nearest = np.round(back)
    dev_grid = np.max(np.abs(back - nearest) / np.maximum(1.0, np.abs(nearest)))
    parity = np.max(np.abs((nearest[:, 0] + nearest[:, 1]) % 2.0))
    det = abs(np.linalg.det(a))
    dev_det = abs(det - 2.0 * ZK_SYMMETRIZER_MU**2) / det
    return float(max(dev_phase, dev_grid, parity, dev_det))
