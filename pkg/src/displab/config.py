"""Strict TOML experiment configs: parse, validate, serialize, hash.

Parsing never stops at the first problem; every violation is collected
and reported together, with close-match suggestions for unknown keys.
Serialization emits the fully resolved config (defaults included), so
parse(serialize(parse(text))) == parse(text).
"""

from __future__ import annotations

import difflib
import hashlib
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ImportError:  # 3.10 has no stdlib TOML reader
    import tomli as tomllib

from .dispersion import get_spec

__all__ = [
    "ConfigError",
    "LatticeConfig",
    "EstimateConfig",
    "SolverConfig",
    "VnormConfig",
    "CommutatorConfig",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "config_hash",
    "EXPERIMENT_KINDS",
]

EXPERIMENT_KINDS = (
    "bilinear",
    "hhh",
    "linear-strichartz",
    "vnorm",
    "evolve",
    "flux",
    "commutator",
)

_SECTION_FOR_KIND = {
    "bilinear": "estimate",
    "hhh": "estimate",
    "linear-strichartz": "estimate",
    "vnorm": "vnorm",
    "evolve": "solver",
    "flux": "solver",
    "commutator": "commutator",
}


class ConfigError(ValueError):
    """All validation problems of one document, joined for display."""

    def __init__(self, problems):
        self.problems = tuple(problems)
        super().__init__(
            "invalid config:\n" + "\n".join("  - " + p for p in self.problems)
        )


@dataclass(frozen=True)
class LatticeConfig:
    dim: int = 1
    modes_per_axis: int = 256
    period_scale: tuple[float, ...] = (1.0,)

    @property
    def nyquist(self) -> float:
        return min(self.modes_per_axis / (2.0 * s) for s in self.period_scale)


@dataclass(frozen=True)
class EstimateConfig:
    spec: str = "schrodinger"
    n_bands: tuple[int, ...] = ()
    k_band: int = 1
    trials: int = 50
    quadrature_nodes: int = 0  # 0 means the band-dependent default
    ascent: bool = False
    restarts: int = 8
    separation: float = -1.0  # hhh only; negative means the N/4 default
    resolution: int = 0  # linear-strichartz grid refinement; 0 = lattice


@dataclass(frozen=True)
class SolverConfig:
    equation: str = "gbo"
    k: int = 2
    dt: float = 1e-4
    t_final: float = 1.0
    amplitude: float = 0.01
    profile: str = "random-band"
    band: int = 4
    modes: tuple[int, ...] = ()
    concentration: float = 3.0
    snapshot_every: int = 1
    flux_bands: tuple[int, ...] = ()  # flux kind only
    s: float = 0.0


@dataclass(frozen=True)
class VnormConfig:
    input_dir: str = ""
    p_values: tuple[float, ...] = (2.0,)
    s: float = -1.0  # negative: skip the energy ledger
    spec: str = ""  # with s >= 0: also the shorttime windowed norm
    bands: tuple[int, ...] = ()  # empty: every dyad of the path's lattice


@dataclass(frozen=True)
class CommutatorConfig:
    band: int = 64
    low_bands: tuple[int, ...] = (1, 2, 4, 8, 16)
    cutoff: str = "smooth"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out_dir: str = "out"
    lattice: LatticeConfig | None = None
    estimate: EstimateConfig | None = None
    solver: SolverConfig | None = None
    vnorm: VnormConfig | None = None
    commutator: CommutatorConfig | None = None


def _suggest(key: str, known) -> str:
    close = difflib.get_close_matches(key, list(known), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _check_keys(table: dict, known, where: str, problems: list) -> None:
    for key in table:
        if key not in known:
            problems.append(f"unknown key {key!r} in {where}{_suggest(key, known)}")


def _coerce(value, target, name: str, where: str, problems: list):
    """Check a raw TOML value against the field type; return the coerced
    value or None after recording the problem."""
    if target is bool:
        if isinstance(value, bool):
            return value
        problems.append(f"{where}.{name} must be a boolean, got {value!r}")
        return None
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            problems.append(f"{where}.{name} must be an integer, got {value!r}")
            return None
        return value
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{where}.{name} must be a number, got {value!r}")
            return None
        return float(value)
    if target is str:
        if not isinstance(value, str):
            problems.append(f"{where}.{name} must be a string, got {value!r}")
            return None
        return value
    raise AssertionError(f"unhandled field type {target}")


_ELEMENT_TYPES = {
    "n_bands": int,
    "modes": int,
    "flux_bands": int,
    "p_values": float,
    "low_bands": int,
    "bands": int,
    "period_scale": float,
}


def _fill_section(cls, table: dict, where: str, problems: list):
    """Instantiate a section dataclass from a TOML table, type-checked."""
    spec_fields = {f.name: f for f in fields(cls)}
    _check_keys(table, spec_fields, where, problems)
    kwargs = {}
    for name, f in spec_fields.items():
        if name not in table:
            continue
        raw = table[name]
        if f.type.startswith("tuple"):
            elem = _ELEMENT_TYPES[name]
            if not isinstance(raw, (list, tuple)):
                problems.append(f"{where}.{name} must be a list")
                continue
            items = []
            ok = True
            for i, v in enumerate(raw):
                c = _coerce(v, elem, f"{name}[{i}]", where, problems)
                if c is None:
                    ok = False
                    break
                items.append(c)
            if ok:
                kwargs[name] = tuple(items)
        else:
            c = _coerce(raw, {"int": int, "float": float, "str": str, "bool": bool}[f.type], name, where, problems)
            if c is not None:
                kwargs[name] = c
    # every section field has a default, so failed coercions just fall back
    return cls(**kwargs)


def _is_pow2(n: int) -> bool:
    return isinstance(n, int) and not isinstance(n, bool) and n >= 1 and (n & (n - 1)) == 0


def _validate_lattice(lc: LatticeConfig, problems: list) -> None:
    if lc.dim not in (1, 2):
        problems.append(f"lattice.dim must be 1 or 2, got {lc.dim}")
    if not (_is_pow2(lc.modes_per_axis) and lc.modes_per_axis >= 8):
        problems.append(
            f"lattice.modes_per_axis must be a power of two >= 8, got {lc.modes_per_axis}"
        )
    if not lc.period_scale or any(s <= 0 for s in lc.period_scale):
        problems.append("lattice.period_scale entries must be positive")
    elif lc.dim in (1, 2) and len(lc.period_scale) not in (1, lc.dim):
        problems.append(
            f"lattice.period_scale needs 1 or {lc.dim} entries, got {len(lc.period_scale)}"
        )


def _usable_lattice(lc: LatticeConfig | None) -> LatticeConfig | None:
    """The lattice, or None when its numbers cannot support a Nyquist limit.

    Cross-section checks must not crash on a lattice whose own problems are
    already in the report.
    """
    if lc is None:
        return None
    ok = (
        lc.dim in (1, 2)
        and _is_pow2(lc.modes_per_axis)
        and lc.modes_per_axis >= 8
        and bool(lc.period_scale)
        and all(s > 0 for s in lc.period_scale)
    )
    return lc if ok else None


def _validate_band_list(bands, lattice: LatticeConfig | None, label: str, problems: list) -> None:
    lattice = _usable_lattice(lattice)
    if not bands:
        problems.append(f"{label} must be a nonempty list of dyadic bands")
        return
    for n in bands:
        if not _is_pow2(n):
            problems.append(f"{label} entries must be powers of two >= 1, got {n}")
        elif lattice is not None and 2 * n > lattice.nyquist:
            problems.append(
                f"{label} band {n} is not resolved: 2N = {2 * n} exceeds the "
                f"lattice Nyquist {lattice.nyquist:g}"
            )


def _validate_estimate(cfg: ExperimentConfig, problems: list) -> None:
    est = cfg.estimate
    try:
        get_spec(est.spec)
    except ValueError as e:
        problems.append(f"estimate.spec: {e}")
    _validate_band_list(est.n_bands, cfg.lattice, "estimate.n_bands", problems)
    if cfg.kind == "bilinear":
        if not _is_pow2(est.k_band):
            problems.append(f"estimate.k_band must be a power of two >= 1, got {est.k_band}")
        else:
            for n in est.n_bands:
                if _is_pow2(n) and 4 * est.k_band > n:
                    problems.append(
                        f"estimate.k_band {est.k_band} must sit well below band {n} "
                        f"(4K <= N)"
                    )
    if est.trials < 1:
        problems.append(f"estimate.trials must be >= 1, got {est.trials}")
    if est.restarts < 0:
        problems.append(f"estimate.restarts must be >= 0, got {est.restarts}")
    if est.quadrature_nodes and (est.quadrature_nodes < 9 or est.quadrature_nodes % 2 == 0):
        problems.append(
            f"estimate.quadrature_nodes must be odd and >= 9 (or 0 for the "
            f"default), got {est.quadrature_nodes}"
        )
    if est.resolution < 0:
        problems.append(f"estimate.resolution must be >= 0, got {est.resolution}")


def _validate_solver(cfg: ExperimentConfig, problems: list) -> None:
    sol = cfg.solver
    if sol.equation not in ("gbo", "zk", "zk-sym"):
        problems.append(
            f"solver.equation must be gbo, zk, or zk-sym, got {sol.equation!r}"
        )
    else:
        want_dim = 1 if sol.equation == "gbo" else 2
        if cfg.lattice is not None and cfg.lattice.dim != want_dim:
            problems.append(
                f"solver.equation {sol.equation} needs a {want_dim}-D lattice, "
                f"config has dim {cfg.lattice.dim}"
            )
    if sol.k < 2:
        problems.append(f"solver.k must be >= 2, got {sol.k}")
    if sol.equation != "gbo" and sol.k != 2:
        problems.append("solver.k applies to gbo only; zk nonlinearity is quadratic")
    if sol.dt <= 0:
        problems.append(f"solver.dt must be positive, got {sol.dt}")
    if sol.t_final < 0:
        problems.append(f"solver.t_final must be nonnegative, got {sol.t_final}")
    if sol.amplitude <= 0:
        problems.append(f"solver.amplitude must be positive, got {sol.amplitude}")
    if sol.snapshot_every < 1:
        problems.append(f"solver.snapshot_every must be >= 1, got {sol.snapshot_every}")
    if sol.profile not in ("random-band", "cosine", "bump"):
        problems.append(
            f"solver.profile must be random-band, cosine, or bump, got {sol.profile!r}"
        )
    if sol.profile == "random-band":
        _validate_band_list((sol.band,), cfg.lattice, "solver.band", problems)
    if sol.profile == "cosine" and not sol.modes:
        problems.append("solver.modes must be a nonempty list for the cosine profile")
    if cfg.kind == "flux":
        _validate_band_list(sol.flux_bands, cfg.lattice, "solver.flux_bands", problems)


def _validate_vnorm(cfg: ExperimentConfig, problems: list) -> None:
    vn = cfg.vnorm
    if not vn.input_dir:
        problems.append("vnorm.input_dir is required (a saved snapshot directory)")
    for p in vn.p_values:
        if p < 1.0:
            problems.append(f"vnorm.p_values entries must be >= 1, got {p}")
    if vn.spec:
        try:
            get_spec(vn.spec)
        except ValueError as e:
            problems.append(f"vnorm.spec: {e}")
        if vn.s < 0:
            problems.append("vnorm.spec also needs vnorm.s >= 0 (windowed norm weight)")
    if vn.bands:
        _validate_band_list(vn.bands, None, "vnorm.bands", problems)


def _validate_commutator(cfg: ExperimentConfig, problems: list) -> None:
    com = cfg.commutator
    if not _is_pow2(com.band):
        problems.append(f"commutator.band must be a power of two, got {com.band}")
    _validate_band_list(com.low_bands, None, "commutator.low_bands", problems)
    for k in com.low_bands:
        if _is_pow2(k) and _is_pow2(com.band) and 4 * k > com.band:
            problems.append(
                f"commutator.low_bands entry {k} must satisfy 4K <= N = {com.band}"
            )
    if com.cutoff not in ("sharp", "smooth"):
        problems.append(f"commutator.cutoff must be sharp or smooth, got {com.cutoff!r}")
    lat = _usable_lattice(cfg.lattice)
    if lat is not None and _is_pow2(com.band):
        if 2 * com.band > lat.nyquist:
            problems.append(
                f"commutator.band {com.band} is not resolved: 2N = {2 * com.band} "
                f"exceeds the lattice Nyquist {lat.nyquist:g}"
            )


_TOP_KEYS = ("kind", "seed", "out_dir", "lattice", "estimate", "solver", "vnorm", "commutator")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment document.

    Raises ConfigError carrying every problem found, not only the first.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"not valid TOML: {e}"]) from None

    problems: list[str] = []
    _check_keys(doc, _TOP_KEYS, "the top level", problems)

    kind = doc.get("kind")
    if kind is None:
        problems.append("kind is required" + f" (one of {', '.join(EXPERIMENT_KINDS)})")
    elif kind not in EXPERIMENT_KINDS:
        problems.append(
            f"unknown kind {kind!r}{_suggest(str(kind), EXPERIMENT_KINDS)}"
        )

    seed = doc.get("seed")
    if seed is None:
        problems.append("seed required (an explicit integer; no entropy defaults)")
    elif isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append(f"seed must be a nonnegative integer, got {seed!r}")

    out_dir = doc.get("out_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        problems.append(f"out_dir must be a nonempty string, got {out_dir!r}")
        out_dir = "out"

    sections = {}
    for name, cls in (
        ("lattice", LatticeConfig),
        ("estimate", EstimateConfig),
        ("solver", SolverConfig),
        ("vnorm", VnormConfig),
        ("commutator", CommutatorConfig),
    ):
        if name in doc:
            if not isinstance(doc[name], dict):
                problems.append(f"[{name}] must be a table")
            else:
                sections[name] = _fill_section(cls, doc[name], f"[{name}]", problems)

    if isinstance(kind, str) and kind in EXPERIMENT_KINDS:
        needed = _SECTION_FOR_KIND[kind]
        if needed not in sections:
            # estimate sweeps have usable defaults except the band list, so
            # the missing-section report stays actionable
            sections[needed] = {
                "estimate": EstimateConfig,
                "solver": SolverConfig,
                "vnorm": VnormConfig,
                "commutator": CommutatorConfig,
            }[needed]()
        for name in ("estimate", "solver", "vnorm", "commutator"):
            if name in sections and name != needed:
                problems.append(f"[{name}] is not used by kind {kind!r}")
        if kind in ("evolve", "flux") and "lattice" not in sections:
            problems.append(f"[lattice] is required for kind {kind!r}")
        if kind == "commutator" and "lattice" not in sections:
            problems.append("[lattice] is required for kind 'commutator'")
        if kind == "vnorm" and "lattice" in sections:
            problems.append("[lattice] is not used by kind 'vnorm' (the path fixes it)")

    cfg = ExperimentConfig(
        kind=kind if isinstance(kind, str) else "",
        seed=seed if isinstance(seed, int) and not isinstance(seed, bool) else 0,
        out_dir=out_dir,
        lattice=sections.get("lattice"),
        estimate=sections.get("estimate"),
        solver=sections.get("solver"),
        vnorm=sections.get("vnorm"),
        commutator=sections.get("commutator"),
    )

    # validate whatever sections are present, even under a bad kind, so one
    # report carries everything fixable
    if cfg.lattice is not None:
        _validate_lattice(cfg.lattice, problems)
    if cfg.estimate is not None:
        _validate_estimate(cfg, problems)
    if cfg.solver is not None:
        _validate_solver(cfg, problems)
    if cfg.vnorm is not None:
        _validate_vnorm(cfg, problems)
    if cfg.commutator is not None:
        _validate_commutator(cfg, problems)

    if problems:
        raise ConfigError(problems)
    return cfg


# -- serialization -----------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        r = repr(v)
        # TOML floats need a dot or exponent marker
        return r if ("." in r or "e" in r or "inf" in r or "nan" in r) else r + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, tuple):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Resolved-config TOML; parses back to an equal ExperimentConfig."""
    lines = [
        f"kind = {_toml_value(cfg.kind)}",
        f"seed = {_toml_value(cfg.seed)}",
        f"out_dir = {_toml_value(cfg.out_dir)}",
    ]
    for name in ("lattice", "estimate", "solver", "vnorm", "commutator"):
        section = getattr(cfg, name)
        if section is None:
            continue
        lines.append("")
        lines.append(f"[{name}]")
        for f in fields(section):
            lines.append(f"{f.name} = {_toml_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()
