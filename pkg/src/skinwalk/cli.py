"""
Command-line front end.

    skinwalk {simulate|drift|figure|sweep|crossover|bands} [flags]

Parameter flags accept several values; each value is a number or a
``start:stop:count`` linear range. A flat JSON file passed with ``--config``
supplies defaults that explicit flags override. Exit codes: 0 success,
1 engine error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from skinwalk.errors import DegenerateSpectrumError, InvalidParameterError, SkinwalkError
from skinwalk.evolution import estimate_drift, evolve
from skinwalk.io import (
    band_rows,
    distribution_rows,
    rows_to_text,
    series_rows,
    trajectory_to_dict,
    write_rows,
    write_trajectory,
)
from skinwalk.spectral import (
    IncoherentRegime,
    closed_form_velocities,
    coherent_drift_spectral,
    crossover_gamma,
    incoherent_drift_spectral,
    quasienergy_bands,
)
from skinwalk.walk import DampingOrder, WalkParams

log = logging.getLogger("skinwalk")

AXES = ("gamma", "theta", "eta", "mu")
SCALARS = ("order", "steps", "half_width", "window", "out", "format", "jobs", "seed")
QUARTER_PI = math.pi / 4.0

FIGURES = {
    "fig2": {
        "points": [(g, e, 0.0, "none") for g in (0.4, 0.854, 0.93) for e in (0.0, 1.0)],
        "series": True,
        "curve": True,
    },
    "fig3": {
        "points": [(0.4, 0.0, m, "before") for m in (0.2, 0.6, 1.0)] + [(0.93, 0.0, 1.0, "before")],
        "series": False,
        "curve": False,
    },
    "fig4": {
        "points": [(g, 0.0, m, "after") for g in (0.4, 0.93) for m in (0.2, 0.6, 1.0)],
        "series": True,
        "curve": False,
    },
}
SNAPSHOT_STEPS = 8  # experimental scale, written as trajectory files
DRIFT_STEPS = 60  # asymptotic scale, feeds the drift summary


class ConfigError(Exception):
    """Invalid configuration or command line (exit code 2)."""


@dataclass
class RunConfig:
    """Resolved run configuration: parameter axes plus output options."""

    gamma: List[float] = field(default_factory=lambda: [0.0])
    theta: List[float] = field(default_factory=lambda: [QUARTER_PI])
    eta: List[float] = field(default_factory=lambda: [0.0])
    mu: List[float] = field(default_factory=lambda: [0.0])
    order: str = "none"
    steps: int = 8
    half_width: Optional[int] = None
    window: Optional[Tuple[int, int]] = None
    out: Optional[str] = None
    format: str = "csv"
    jobs: int = 1
    seed: Optional[int] = None  # reserved; the engine is deterministic

    def single(self) -> WalkParams:
        if any(len(getattr(self, axis)) != 1 for axis in AXES):
            raise ConfigError("simulate takes a single value per parameter")
        return make_params(self.gamma[0], self.theta[0], self.eta[0], self.mu[0], self.order, self.steps, self.half_width)

    def points(self) -> List[Tuple[float, float, float, float]]:
        return sorted(itertools.product(self.gamma, self.theta, self.eta, self.mu))


def make_params(gamma, theta, eta, mu, order, steps, half_width=None) -> WalkParams:
    try:
        return WalkParams(theta, gamma, eta, mu, DampingOrder(order), steps, half_width)
    except (InvalidParameterError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_axis(values: Sequence[Any], name: str) -> List[float]:
    """Expand numbers and ``start:stop:count`` ranges into a list of floats."""
    if isinstance(values, (int, float, str)):
        values = [values]
    out: List[float] = []
    for token in values:
        if isinstance(token, str) and token.count(":") == 2:
            start, stop, count = token.split(":")
            try:
                out.extend(np.linspace(float(start), float(stop), int(count)).tolist())
            except ValueError as exc:
                raise ConfigError(f"bad range {token!r} for {name}") from exc
            continue
        try:
            value = float(token)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {token!r} for {name}") from exc
        if not math.isfinite(value):
            raise ConfigError(f"{name} must be finite, got {token!r}")
        out.append(value)
    if not out:
        raise ConfigError(f"parameter list for {name} is empty")
    return out


def parse_window(text: Any) -> Optional[Tuple[int, int]]:
    if text is None:
        return None
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return int(text[0]), int(text[1])
    try:
        start, stop = str(text).split(":")
        return int(start), int(stop)
    except ValueError as exc:
        raise ConfigError(f"window must look like A:B, got {text!r}") from exc


def resolve_config(args: argparse.Namespace, defaults: Dict[str, Any]) -> RunConfig:
    merged: Dict[str, Any] = dict(defaults)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = set(data) - set(AXES) - set(SCALARS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    for key in AXES + SCALARS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value

    config = RunConfig()
    for axis in AXES:
        if axis in merged:
            setattr(config, axis, parse_axis(merged[axis], axis))
        for value in getattr(config, axis):
            if axis != "theta" and not 0.0 <= value <= 1.0:
                raise ConfigError(f"{axis} must lie in [0, 1], got {value}")
    config.order = str(merged.get("order", "none"))
    if config.order not in ("none", "before", "after"):
        raise ConfigError(f"order must be before or after, got {config.order!r}")
    try:
        config.steps = int(merged.get("steps", config.steps))
        config.jobs = int(merged.get("jobs", 1))
        if merged.get("half_width") is not None:
            config.half_width = int(merged["half_width"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if config.steps < 0 or config.jobs < 1:
        raise ConfigError("steps must be >= 0 and jobs >= 1")
    config.window = parse_window(merged.get("window"))
    config.out = merged.get("out")
    config.format = str(merged.get("format", "csv"))
    if config.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {config.format!r}")
    config.seed = merged.get("seed")
    return config


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> List:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _emit(rows, config: RunConfig, default_name: str, fieldnames=None) -> None:
    if config.out is None:
        sys.stdout.write(rows_to_text(rows, config.format, fieldnames))
        return
    path = Path(config.out)
    if path.is_dir():
        path = path / f"{default_name}.{config.format}"
    write_rows(rows, path, config.format, fieldnames)


# -- drift records ---------------------------------------------------------

def regime_of(params: WalkParams) -> str:
    if params.eta == 0 and params.mu == 0:
        return "coherent"
    if params.eta == 1:
        return IncoherentRegime.DEPHASED.value
    if params.mu == 1 and params.damping_order is DampingOrder.AFTER_LOSS:
        return IncoherentRegime.DAMPED_AFTER_LOSS.value
    if params.mu == 1 and params.damping_order is DampingOrder.BEFORE_LOSS:
        return IncoherentRegime.DAMPED_BEFORE_LOSS.value
    return "partial"


DRIFT_FIELDS = (
    "gamma", "theta", "eta", "mu", "order", "steps", "regime",
    "v_closed", "v_spectral", "v_realspace", "spectral_minus_closed", "realspace_minus_closed",
    "k_star", "branch", "window_start", "window_end", "fit_residual", "flags",
)


def drift_record(params: WalkParams, window: Optional[Tuple[int, int]] = None) -> Dict[str, Any]:
    """One drift record comparing closed form, spectral and real-space routes."""
    regime = regime_of(params)
    record: Dict[str, Any] = {
        "gamma": params.gamma,
        "theta": params.theta,
        "eta": params.eta,
        "mu": params.mu,
        "order": params.damping_order.value,
        "steps": params.steps,
        "regime": regime,
        "v_closed": None,
        "v_spectral": None,
        "k_star": None,
        "branch": None,
    }
    flags: List[str] = []
    report = None
    try:
        if regime == "coherent":
            report = coherent_drift_spectral(params.gamma, params.theta)
        elif regime != "partial":
            report = incoherent_drift_spectral(params.gamma, params.theta, regime)
    except DegenerateSpectrumError:
        flags.append("degenerate")
    if report is not None:
        flags.extend(report.flags)
        record.update(v_closed=report.v_closed, v_spectral=report.v_spectral, k_star=report.k_star, branch=report.branch)

    estimate = estimate_drift(evolve(params), window)
    record.update(
        v_realspace=estimate.velocity,
        window_start=estimate.window[0],
        window_end=estimate.window[1],
        fit_residual=estimate.residual,
    )
    v_closed = record["v_closed"]
    valid_closed = v_closed is not None and not math.isnan(v_closed)
    record["spectral_minus_closed"] = record["v_spectral"] - v_closed if valid_closed and record["v_spectral"] is not None else None
    record["realspace_minus_closed"] = estimate.velocity - v_closed if valid_closed else None
    record["flags"] = tuple(dict.fromkeys(flags))
    return record


def _drift_task(item) -> Dict[str, Any]:
    params, window = item
    return drift_record(params, window)


# -- commands ----------------------------------------------------------------

def cmd_simulate(config: RunConfig) -> None:
    params = config.single()
    traj = evolve(params)
    if config.out is None:
        if config.format == "json":
            json.dump(trajectory_to_dict(traj), sys.stdout, indent=1, sort_keys=True)
            sys.stdout.write("\n")
        else:
            sys.stdout.write(rows_to_text(series_rows(traj)))
        return
    for path in write_trajectory(traj, config.out, "trajectory", config.format):
        log.info("wrote %s", path)


def cmd_drift(config: RunConfig) -> None:
    items = [
        (make_params(g, t, e, m, config.order, config.steps, config.half_width), config.window)
        for g, t, e, m in config.points()
    ]
    rows = _parallel_map(_drift_task, items, config.jobs)
    _emit(rows, config, "drift", DRIFT_FIELDS)


def sweep_row(point: Tuple[float, float]) -> Dict[str, float]:
    gamma, theta = point
    forms = closed_form_velocities(gamma, theta)
    return {
        "gamma": gamma,
        "theta": theta,
        "v_c": forms.v_c,
        "v_inc": forms.v_inc,
        "v_c_minus_v_inc": forms.v_c - forms.v_inc,
    }


def cmd_sweep(config: RunConfig) -> None:
    points = sorted(itertools.product(config.gamma, config.theta))
    rows = _parallel_map(sweep_row, points, config.jobs)
    _emit(rows, config, "sweep")


def cmd_crossover(config: RunConfig) -> None:
    rows = []
    for theta in sorted(config.theta):
        try:
            gamma_star = crossover_gamma(theta)
        except InvalidParameterError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append({"theta": theta, "gamma_star": gamma_star, "found": gamma_star is not None})
    _emit(rows, config, "crossover")


def cmd_bands(config: RunConfig) -> None:
    if len(config.gamma) != 1 or len(config.theta) != 1:
        raise ConfigError("bands takes a single gamma and theta")
    ks = -math.pi + 2.0 * math.pi * np.arange(256) / 256
    try:
        table = quasienergy_bands(config.gamma[0], config.theta[0], ks)
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(band_rows(table), config, "bands")


def _figure_task(item):
    gamma, eta, mu, order, steps = item
    params = make_params(gamma, QUARTER_PI, eta, mu, order, steps)
    return evolve(params)


def cmd_figure(name: str, config: RunConfig) -> List[Path]:
    """
    Write the datasets behind one figure into ``config.out`` (default ``./<name>``).

    Layout: ``trajectories/`` holds the 8-step snapshots (CSV distributions,
    plus n(t) series where the figure shows them; or one JSON per point),
    ``drift_summary`` the 60-step fitted drifts, and for fig2 ``velocity_curve``
    the closed-form v(gamma) curves.
    """
    layout = FIGURES[name]
    out = Path(config.out or name)
    out.mkdir(parents=True, exist_ok=True)
    items = [(g, e, m, o, steps) for g, e, m, o in layout["points"] for steps in (SNAPSHOT_STEPS, DRIFT_STEPS)]
    trajectories = _parallel_map(_figure_task, items, config.jobs)

    written: List[Path] = []
    summary = []
    for (gamma, eta, mu, order, steps), traj in zip(items, trajectories):
        if steps == SNAPSHOT_STEPS:
            written += _write_snapshot(traj, out / "trajectories", f"gamma{gamma:g}_eta{eta:g}_mu{mu:g}_{order}", config.format, layout["series"])
            continue
        params = traj.params
        forms = closed_form_velocities(gamma, QUARTER_PI)
        regime = regime_of(params)
        v_closed = {
            "coherent": forms.v_c,
            "dephased": forms.v_inc,
            "damped-after": forms.v_inc_reversed,
            "damped-before": math.cos(2 * QUARTER_PI),
        }.get(regime)
        summary.append(
            {
                "gamma": gamma, "eta": eta, "mu": mu, "order": params.damping_order.value,
                "regime": regime, "steps": steps,
                "v_realspace": estimate_drift(traj, config.window).velocity,
                "v_closed": v_closed,
            }
        )
    written.append(write_rows(summary, out / f"drift_summary.{config.format}", config.format))
    if layout["curve"]:
        gammas = np.linspace(0.0, 1.0, 200)
        curve = [sweep_row((float(g), QUARTER_PI)) for g in gammas]
        written.append(write_rows(curve, out / f"velocity_curve.{config.format}", config.format))
    return written


def _write_snapshot(traj, directory: Path, stem: str, fmt: str, with_series: bool) -> List[Path]:
    if fmt == "json":
        return write_trajectory(traj, directory, stem, fmt)
    paths = [write_rows(distribution_rows(traj), directory / f"{stem}_distribution.csv")]
    if with_series:
        paths.append(write_rows(series_rows(traj), directory / f"{stem}_series.csv"))
    return paths


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skinwalk", description="Decoherent non-Hermitian quantum walk toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    for axis in AXES:
        common.add_argument(f"--{axis}", nargs="+", metavar="V", help="value(s) or start:stop:count")
    common.add_argument("--order", choices=["none", "before", "after"])
    common.add_argument("--steps", type=int)
    common.add_argument("--half-width", dest="half_width", type=int)
    common.add_argument("--window", metavar="A:B")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--jobs", type=int, metavar="N")
    common.add_argument("--seed", type=int, help="reserved; results are deterministic")
    common.add_argument("--config", metavar="PATH")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="evolve one parameter point")
    sub.add_parser("drift", parents=[common], help="compare drift velocities across routes")
    fig = sub.add_parser("figure", parents=[common], help="write the datasets of a figure")
    fig.add_argument("name", choices=sorted(FIGURES))
    sub.add_parser("sweep", parents=[common], help="closed-form velocity grid over gamma and theta")
    sub.add_parser("crossover", parents=[common], help="crossover loss strength per theta")
    sub.add_parser("bands", parents=[common], help="quasienergy bands of the coherent walk")
    return parser


COMMAND_DEFAULTS = {
    "simulate": {"steps": 8},
    "drift": {"steps": 60},
    "figure": {},
    "sweep": {"gamma": ["0.05:0.95:50"], "theta": ["0.1:1.5:50"]},
    "crossover": {},
    "bands": {"gamma": [0.4]},
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = resolve_config(args, COMMAND_DEFAULTS[args.command])
        if args.command == "figure":
            cmd_figure(args.name, config)
        else:
            {
                "simulate": cmd_simulate,
                "drift": cmd_drift,
                "sweep": cmd_sweep,
                "crossover": cmd_crossover,
                "bands": cmd_bands,
            }[args.command](config)
    except ConfigError as exc:
        print(f"skinwalk: error: {exc}", file=sys.stderr)
        return 2
    except SkinwalkError as exc:
        print(f"skinwalk: engine error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
