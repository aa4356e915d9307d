"""Command line front end: validated configs in, deterministic tables out.

Every run writes the resolved config, a manifest (config hash, library
versions, wall time), and one or more CSV tables with %.17g floats.
Rerunning the same config reproduces the tables byte for byte; only the
manifest's timestamp and wall time move.

Exit codes: 0 success, 2 config problem, 3 runtime failure, 4 blow-up.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .bilinear import (
    QuadratureRule,
    extremizer_ascent,
    fit_loglog_slope,
    hhh_separated_ratio,
    linear_strichartz_norm,
    monte_carlo_ratio,
    _resolve_lattice,
)
from .config import (
    EXPERIMENT_KINDS,
    ConfigError,
    ExperimentConfig,
    config_hash,
    parse_config,
    serialize_config,
)
from .dispersion import get_spec, window
from .fields import random_field
from .lattice import make_lattice
from .projectors import BandProjector, project
from .solver import (
    BlowUpError,
    commutator_residual,
    conservation_diagnostics,
    equation,
    evolve,
    flux_decompose,
    initial_profile,
)
from .variation import e_s_norm, load_path, save_path, shorttime_v2, v_p_norm

__all__ = ["main", "run", "emit_plotdata"]


def _g17(x) -> str:
    return format(float(x), ".17g")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _g17(v)


def _write_table(path: str, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_plotdata(points, path: str) -> None:
    """log2(band) against log2(max ratio), closed by a fitted-slope row.

    points: (band, ratio) pairs. A single point gets slope n/a; an empty
    report is an error, not an empty file.
    """
    pts = sorted((int(n), float(r)) for n, r in points)
    if not pts:
        raise ValueError("empty report: no points to plot")
    for n, r in pts:
        if n < 1 or r <= 0.0:
            raise ValueError(f"cannot take logs of point ({n}, {r})")
    lines = ["log2_band,log2_max_ratio"]
    for n, r in pts:
        lines.append(f"{_g17(math.log2(n))},{_g17(math.log2(r))}")
    if len(pts) >= 2:
        slope = fit_loglog_slope([n for n, _ in pts], [r for _, r in pts])
        lines.append(f"slope,{_g17(slope)}")
    else:
        lines.append("slope,n/a")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _config_lattice(cfg: ExperimentConfig):
    lc = cfg.lattice
    if lc is None:
        return None
    scale = lc.period_scale[0] if len(lc.period_scale) == 1 else lc.period_scale
    return make_lattice(lc.dim, lc.modes_per_axis, scale)


def _rule_for(spec, band: int, node_count: int) -> QuadratureRule | None:
    if not node_count:
        return None
    return QuadratureRule(window(spec, band).delta, node_count)


def _trial_sequence(seed: int, counter: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(counter,))


# -- kind runners -----------------------------------------------------------
# each returns a list of file names written under out_dir


def _run_bilinear(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    est = cfg.estimate
    spec = get_spec(est.spec)
    lat = _config_lattice(cfg)
    trial_rows = []
    summary_rows = []
    points = []
    for n in sorted(est.n_bands):
        rule = _rule_for(spec, n, est.quadrature_nodes)
        rep = monte_carlo_ratio(
            spec, n, est.k_band, est.trials, cfg.seed, rule,
            lattice=lat, threads=threads,
        )
        ascent_cell = "n/a"
        best = rep.max_ratio
        if est.ascent:
            asc = extremizer_ascent(
                spec, n, est.k_band,
                restarts=est.restarts, seed=cfg.seed, quadrature=rule, lattice=lat,
            )
            ascent_cell = _g17(asc.ratio)
            best = max(best, asc.ratio)
        for i, r in enumerate(rep.ratios):
            trial_rows.append((est.spec, n, est.k_band, i, r))
        summary_rows.append(
            (est.spec, n, est.k_band, rep.trials, rep.max_ratio,
             rep.theoretical_factor, rep.normalized_constant, ascent_cell, best)
        )
        points.append((n, best))
    _write_table(
        os.path.join(out, "trials.csv"),
        ("spec", "n_band", "k_band", "trial", "ratio"),
        trial_rows,
    )
    _write_table(
        os.path.join(out, "summary.csv"),
        ("spec", "n_band", "k_band", "trials", "max_ratio",
         "theoretical_factor", "normalized_constant", "ascent_ratio", "best_ratio"),
        summary_rows,
    )
    emit_plotdata(points, os.path.join(out, "plotdata.csv"))
    return ["trials.csv", "summary.csv", "plotdata.csv"]


def _run_hhh(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    est = cfg.estimate
    spec = get_spec(est.spec)
    lat = _config_lattice(cfg)
    sep = None if est.separation < 0 else est.separation
    trial_rows = []
    summary_rows = []
    points = []
    for n in sorted(est.n_bands):
        rule = _rule_for(spec, n, est.quadrature_nodes)
        rep = hhh_separated_ratio(
            spec, n, est.trials, cfg.seed, rule, separation=sep, lattice=lat,
        )
        sep_used = float(n) / 4.0 if sep is None else sep
        for i, r in enumerate(rep.ratios):
            trial_rows.append((est.spec, n, sep_used, i, r))
        summary_rows.append(
            (est.spec, n, sep_used, rep.trials, rep.max_ratio,
             rep.theoretical_factor, rep.normalized_constant)
        )
        points.append((n, rep.max_ratio))
    _write_table(
        os.path.join(out, "trials.csv"),
        ("spec", "n_band", "separation", "trial", "ratio"),
        trial_rows,
    )
    _write_table(
        os.path.join(out, "summary.csv"),
        ("spec", "n_band", "separation", "trials", "max_ratio",
         "theoretical_factor", "normalized_constant"),
        summary_rows,
    )
    emit_plotdata(points, os.path.join(out, "plotdata.csv"))
    return ["trials.csv", "summary.csv", "plotdata.csv"]


def _run_linear_strichartz(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    est = cfg.estimate
    spec = get_spec(est.spec)
    trial_rows = []
    summary_rows = []
    points = []
    for n in sorted(est.n_bands):
        lat = _resolve_lattice(spec, n, dim=None, lattice=_config_lattice(cfg))
        win = window(spec, n)
        rule = _rule_for(spec, n, est.quadrature_nodes)
        band = BandProjector.sharp_dyadic(n)
        values = []
        for r in range(est.trials):
            u = random_field(lat, band, seed=_trial_sequence(cfg.seed, r))
            values.append(
                linear_strichartz_norm(u, spec, win, rule, est.resolution or None)
            )
        for i, v in enumerate(values):
            trial_rows.append((est.spec, n, i, v))
        summary_rows.append((est.spec, n, est.trials, max(values)))
        points.append((n, max(values)))
    _write_table(
        os.path.join(out, "trials.csv"),
        ("spec", "n_band", "trial", "value"),
        trial_rows,
    )
    _write_table(
        os.path.join(out, "summary.csv"),
        ("spec", "n_band", "trials", "max_value"),
        summary_rows,
    )
    emit_plotdata(points, os.path.join(out, "plotdata.csv"))
    return ["trials.csv", "summary.csv", "plotdata.csv"]


def _run_vnorm(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    vn = cfg.vnorm
    path = load_path(vn.input_dir)
    rows = [("v_p", p, v_p_norm(path, p)) for p in vn.p_values]
    written = ["norms.csv"]
    if vn.s >= 0:
        ledger = e_s_norm(path, vn.s)
        _write_table(
            os.path.join(out, "energy.csv"),
            ("band", "sup_band_mass", "weighted"),
            [
                (n, e, float(n) ** (2.0 * vn.s) * e)
                for n, e in zip(ledger.bands, ledger.entries)
            ],
        )
        written.append("energy.csv")
        rows.append(("e_s_total", vn.s, ledger.total))
        if vn.spec:
            val = shorttime_v2(path, get_spec(vn.spec), vn.s, vn.bands or None)
            rows.append(("shorttime_v2", vn.s, val))
    _write_table(
        os.path.join(out, "norms.csv"), ("quantity", "parameter", "value"), rows
    )
    return written


def _initial_field(cfg: ExperimentConfig):
    sol = cfg.solver
    lat = _config_lattice(cfg)
    return initial_profile(
        lat,
        sol.profile,
        amplitude=sol.amplitude,
        seed=cfg.seed,
        band=sol.band,
        modes=sol.modes or None,
        concentration=sol.concentration,
    )


def _run_evolve(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    sol = cfg.solver
    eq = equation(sol.equation, sol.k)
    u0 = _initial_field(cfg)
    path = evolve(u0, eq, sol.t_final, sol.dt, snapshot_every=sol.snapshot_every)
    save_path(path, os.path.join(out, "snapshots"))
    first = path.values[0].norm
    rows = [
        (t, u.norm, abs(u.mean), abs(u.norm - first) / first if first else 0.0)
        for t, u in zip(path.times, path.values)
    ]
    _write_table(
        os.path.join(out, "conservation.csv"),
        ("time", "l2_norm", "abs_mean", "rel_norm_drift"),
        rows,
    )
    diag = conservation_diagnostics(path)
    _write_table(
        os.path.join(out, "diagnostics.csv"),
        ("quantity", "value"),
        sorted(diag.items()),
    )
    return ["snapshots", "conservation.csv", "diagnostics.csv"]


def _run_flux(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    sol = cfg.solver
    eq = equation(sol.equation, sol.k)
    u0 = _initial_field(cfg)
    path = evolve(u0, eq, sol.t_final, sol.dt, snapshot_every=sol.snapshot_every)
    rows = []
    for band in sorted(sol.flux_bands):
        rec = flux_decompose(path, eq, band, sol.s)
        mismatch = abs(rec.total - rec.increment) / max(abs(rec.increment), 1e-300)
        rows.append(
            (band, sol.s, rec.high_low, rec.high_high_high, rec.high_high_low,
             rec.total, rec.increment, mismatch)
        )
    _write_table(
        os.path.join(out, "flux.csv"),
        ("band", "s", "high_low", "high_high_high", "high_high_low",
         "class_total", "increment", "rel_mismatch"),
        rows,
    )
    return ["flux.csv"]


def _broadband_field(lat, seed: int):
    # every mode except the unpaired Nyquist line, so real symmetrization
    # keeps full broadband support
    bounds = []
    for ax in range(lat.dim):
        step = 1.0 / lat.period_scale[ax]
        nyq = lat.modes_per_axis * step / 2.0
        bounds.append((-nyq + 0.5 * step, nyq))
    return random_field(lat, BandProjector.interval(bounds), seed=seed, real_symmetric=True)


def _run_commutator(cfg: ExperimentConfig, out: str, threads: int) -> list[str]:
    com = cfg.commutator
    lat = _config_lattice(cfg)
    u = _broadband_field(lat, cfg.seed)
    rows = []
    for low in sorted(com.low_bands):
        resid, ratio = commutator_residual(u, com.band, low, com.cutoff)
        rows.append((com.band, low, com.cutoff, resid.norm, ratio))
    _write_table(
        os.path.join(out, "commutator.csv"),
        ("band", "low_band", "cutoff", "residual_norm", "ratio"),
        rows,
    )
    return ["commutator.csv"]


_RUNNERS = {
    "bilinear": _run_bilinear,
    "hhh": _run_hhh,
    "linear-strichartz": _run_linear_strichartz,
    "vnorm": _run_vnorm,
    "evolve": _run_evolve,
    "flux": _run_flux,
    "commutator": _run_commutator,
}


def run(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> list[str]:
    """Execute one experiment; returns the file names written under out_dir."""
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    outputs = _RUNNERS[cfg.kind](cfg, out_dir, max(1, threads))
    with open(os.path.join(out_dir, "resolved-config.toml"), "w", newline="") as fh:
        fh.write(serialize_config(cfg))
    manifest = {
        "kind": cfg.kind,
        "config_hash": config_hash(cfg),
        "package_version": __version__,
        "python_version": platform.python_version(),
        "numpy_version": np.__version__,
        "outputs": sorted(outputs + ["resolved-config.toml"]),
        "wall_time_s": time.perf_counter() - started,
        "written_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", newline="") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outputs + ["resolved-config.toml", "manifest.json"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="displab",
        description="dispersive estimate experiments driven by TOML configs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default=None, help="output directory (default: config out_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        print(
            f"config kind {cfg.kind!r} does not match subcommand {args.command!r}",
            file=sys.stderr,
        )
        return 2
    if args.seed is not None:
        if args.seed < 0:
            print(f"seed must be nonnegative, got {args.seed}", file=sys.stderr)
            return 2
        cfg = replace(cfg, seed=args.seed)
    out_dir = args.out or cfg.out_dir
    try:
        run(cfg, out_dir, threads=args.threads)
    except BlowUpError as e:
        print(f"blow-up: norm {e.norm:.3e} at t = {e.time:.6g}", file=sys.stderr)
        return 4
    except Exception as e:  # runtime failures map to one exit code
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
