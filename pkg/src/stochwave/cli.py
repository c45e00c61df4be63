"""Command-line front end: scenario files in, CSV and SVG out.

Scenario files are JSON objects with a ``scenarios`` list. Each entry has

    id, f, g, T, M, space, schemes                       required
    kind ("energy" | "order"), u0, v0, boundary, a, b,   optional
    P, k_trunc, dg_degree, dg_sigma, tolerance,
    max_iterations, samples
    dt                                                   required for energy runs
    N (list), N_ref                                      required for order runs

``dt`` may be a number or a fraction string such as ``"1/20"``.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .domain import Boundary, ConfigurationError
from .montecarlo import EnsembleFailure, RunConfig, estimate_order, run_ensemble
from .nonlinearity import DIFFUSIONS, NONLINEARITIES
from .schemes import parse_scheme_name

DEFAULT_SAMPLES = 1000
ENERGY_HEADER = ["step", "t", "mean_energy", "stderr", "theory_energy",
                 "mean_expected_increment_cum", "mean_pathwise_residual"]
ORDER_HEADER = ["N", "dt", "rmse"]

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


@dataclass(frozen=True)
class Scenario:
    id: str
    f: str
    g: str
    T: float
    M: int
    space: str
    schemes: tuple
    kind: str = "energy"
    dt: float | None = None
    u0: float = 0.0
    v0: float = 1.0
    boundary: str = "dirichlet"
    a: float = 0.0
    b: float = 1.0
    P: int | None = None
    k_trunc: int = 2
    dg_degree: int = 1
    dg_sigma: float | None = None
    tolerance: float = 1e-12
    max_iterations: int = 100
    samples: int | None = None
    N: tuple | None = None
    N_ref: int | None = None

    def run_config(self, scheme: str, truncate: bool = True, dt: float | None = None) -> RunConfig:
        return RunConfig(
            scheme=scheme, space=self.space, f=self.f, g=self.g,
            dt=self.dt if dt is None else dt, T=self.T, M=self.M, a=self.a, b=self.b,
            boundary=self.boundary, u0=self.u0, v0=self.v0, P=self.P, k_trunc=self.k_trunc,
            truncate=truncate, dg_degree=self.dg_degree, dg_sigma=self.dg_sigma,
            tolerance=self.tolerance, max_iterations=self.max_iterations, scenario_id=self.id)

    def scheme_ids(self):
        return [f"{self.space}-{s}" for s in self.schemes]


_REQUIRED = ("id", "f", "g", "T", "M", "space", "schemes")
_FIELDS = {f.name for f in fields(Scenario)}


def _number(value, where, name, kind=float):
    if isinstance(value, bool):
        raise ConfigurationError(f"{where}: field {name!r} must be a number, got {value!r}")
    if kind is int:
        if isinstance(value, int):
            return value
        raise ConfigurationError(f"{where}: field {name!r} must be an integer, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigurationError(f"{where}: field {name!r} must be a number or fraction string, got {value!r}")


def scenario_from_dict(raw: dict, where: str = "scenario") -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{where}: expected an object")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigurationError(f"{where}: unknown field(s) {', '.join(map(repr, unknown))}")
    missing = [k for k in _REQUIRED if k not in raw]
    kind = raw.get("kind", "energy")
    if kind not in ("energy", "order"):
        raise ConfigurationError(f"{where}: field 'kind' must be 'energy' or 'order', got {kind!r}")
    missing += [k for k in (("dt",) if kind == "energy" else ("N", "N_ref")) if k not in raw]
    if missing:
        raise ConfigurationError(f"{where}: missing required field(s) {', '.join(map(repr, missing))}")
    where = f"{where} ({raw['id']})"

    vals = dict(raw)
    for name in ("T", "dt", "u0", "v0", "a", "b", "dg_sigma", "tolerance"):
        if vals.get(name) is not None:
            vals[name] = _number(vals[name], where, name)
    for name in ("M", "P", "k_trunc", "dg_degree", "max_iterations", "samples", "N_ref"):
        if vals.get(name) is not None:
            vals[name] = _number(vals[name], where, name, int)
    if vals["f"] not in NONLINEARITIES:
        raise ConfigurationError(f"{where}: field 'f' must be one of {sorted(NONLINEARITIES)}, got {vals['f']!r}")
    if vals["g"] not in DIFFUSIONS:
        raise ConfigurationError(f"{where}: field 'g' must be one of {sorted(DIFFUSIONS)}, got {vals['g']!r}")
    if vals["space"] not in ("cfd", "dg"):
        raise ConfigurationError(f"{where}: field 'space' must be 'cfd' or 'dg', got {vals['space']!r}")
    try:
        Boundary(vals.get("boundary", "dirichlet"))
    except ValueError:
        raise ConfigurationError(f"{where}: field 'boundary' must be 'dirichlet' or 'periodic'") from None
    schemes = vals["schemes"]
    if not isinstance(schemes, list) or not schemes:
        raise ConfigurationError(f"{where}: field 'schemes' must be a non-empty list")
    for s in schemes:
        parse_scheme_name(s)
    vals["schemes"] = tuple(schemes)
    if vals.get("N") is not None:
        if not isinstance(vals["N"], list) or not vals["N"]:
            raise ConfigurationError(f"{where}: field 'N' must be a non-empty list of integers")
        vals["N"] = tuple(_number(n, where, "N", int) for n in vals["N"])
    scenario = Scenario(**vals)
    if kind == "energy":
        scenario.run_config(schemes[0]).N  # validates T/dt divisibility and the rest
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    out = {}
    for k, v in asdict(scenario).items():
        if v is None:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def resolve_config_path(name) -> Path:
    """A file path, or the stem of a bundled scenario file (e.g. ``fig1``)."""
    path = Path(name)
    if path.exists():
        return path
    bundled = resources.files("stochwave") / "scenarios" / f"{path.stem}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigurationError(f"config {name!r} not found (and no bundled scenario of that name)")


def parse_config(path) -> list:
    path = resolve_config_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or set(doc) != {"scenarios"} or not isinstance(doc["scenarios"], list):
        raise ConfigurationError(f"{path}: top level must be an object with a single 'scenarios' list")
    scenarios = [scenario_from_dict(raw, f"{path.name}: scenarios[{i}]")
                 for i, raw in enumerate(doc["scenarios"])]
    ids = [s.id for s in scenarios]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"{path}: duplicate scenario ids")
    return scenarios


def serialize_config(scenarios) -> str:
    return json.dumps({"scenarios": [scenario_to_dict(s) for s in scenarios]}, indent=2) + "\n"


# -- output -------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def write_energy_csv(stats, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_HEADER)
        for n in range(1, len(stats.t)):
            theory = "" if stats.theory_energy is None else _fmt(stats.theory_energy[n])
            w.writerow([n, _fmt(stats.t[n]), _fmt(stats.mean_energy[n]), _fmt(stats.stderr[n]), theory,
                        _fmt(stats.mean_expected_increment_cum[n]), _fmt(stats.mean_pathwise_residual[n])])


def write_order_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ORDER_HEADER)
        for n, dt, e in zip(report.N, report.dt, report.rmse):
            w.writerow([n, _fmt(dt), _fmt(e)])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = [float(r[j]) if r[j] != "" else None for r in body]
    return cols


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "stochwave"
    return plt


def plot_energy(csv_paths: dict, svg_path, title=""):
    """Overlay mean-energy curves (and the reference line, if any) from CSV files."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    theory_drawn = False
    for label, path in csv_paths.items():
        cols = read_csv(path)
        ax.plot(cols["t"], cols["mean_energy"], label=label, linewidth=1.2)
        if not theory_drawn and all(v is not None for v in cols["theory_energy"]) and cols["theory_energy"]:
            ax.plot(cols["t"], cols["theory_energy"], "k--", label="reference", linewidth=1.0)
            theory_drawn = True
    ax.set_xlabel("t")
    ax.set_ylabel("mean discrete energy")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_order(csv_paths: dict, svg_path, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    first = None
    for label, path in csv_paths.items():
        cols = read_csv(path)
        ax.loglog(cols["N"], cols["rmse"], "o-", label=label, linewidth=1.2)
        first = first or cols
    if first:
        n0, e0 = first["N"][0], first["rmse"][0]
        ax.loglog(first["N"], [e0 * n0 / n for n in first["N"]], "k--", label="slope 1")
    ax.set_xlabel("N")
    ax.set_ylabel("RMS error at T")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _csv_name(scenario, scheme):
    suffix = "_order" if scenario.kind == "order" else ""
    return f"{scenario.id}_{scheme}{suffix}.csv"


def _selected(scenario, only):
    if not only:
        return list(scenario.schemes)
    keep = []
    for s in scenario.schemes:
        if s in only or f"{scenario.space}-{s}" in only:
            keep.append(s)
    return keep


def replot(scenario, out_dir):
    out_dir = Path(out_dir)
    paths = {f"{scenario.space}-{s}": out_dir / _csv_name(scenario, s) for s in scenario.schemes}
    paths = {k: p for k, p in paths.items() if p.exists()}
    if not paths:
        return None
    svg = out_dir / f"{scenario.id}.svg"
    (plot_order if scenario.kind == "order" else plot_energy)(paths, svg, scenario.id)
    return svg


def run(scenario, S=None, seed=0, out_dir="out", threads=1, truncate=True, only=None, log=print):
    """Simulate every selected scheme of ``scenario``; returns the written file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    S = S or scenario.samples or DEFAULT_SAMPLES
    written = []
    for scheme in _selected(scenario, only):
        sid = f"{scenario.space}-{scheme}"
        path = out_dir / _csv_name(scenario, scheme)
        if scenario.kind == "order":
            cfg = scenario.run_config(scheme, truncate, dt=scenario.T / scenario.N[0])
            report = estimate_order(cfg, scenario.N, S, seed, scenario.N_ref, threads)
            write_order_csv(report, path)
            slope = "n/a" if report.slope is None else f"{report.slope:.4f}"
            log(f"{scenario.id} {sid}: slope={slope} S={S} aborted={len(report.aborted)}")
        else:
            stats = run_ensemble(scenario.run_config(scheme, truncate), S, seed, threads)
            write_energy_csv(stats, path)
            log(f"{scenario.id} {sid}: slope={stats.slope_mean:.5f}+-{stats.slope_stderr:.5f} "
                f"S={S} aborted={len(stats.aborted)}")
        written.append(path)
    if written:
        written.append(replot(scenario, out_dir))
    return written


def build_parser():
    p = argparse.ArgumentParser(prog="stochwave",
                                description="Monte Carlo energy and convergence runs for the stochastic wave equation.")
    p.add_argument("--config", required=True,
                   help="scenario JSON file, or the name of a bundled one (fig1..fig8, fig6_5)")
    p.add_argument("--samples", type=int, default=None,
                   help=f"sample paths per scheme (default: scenario value or {DEFAULT_SAMPLES})")
    p.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--scheme", action="append", default=None,
                   help="run only this scheme id (e.g. cfd-pade1 or pade1); repeatable")
    p.add_argument("--no-truncation", action="store_true", help="use untruncated Gaussian increments")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--replot", action="store_true", help="regenerate SVGs from existing CSVs only")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.samples is not None and args.samples < 1:
            raise ConfigurationError("--samples must be at least 1")
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer")
        scenarios = parse_config(args.config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        for sc in scenarios:
            if args.replot:
                svg = replot(sc, args.out)
                if svg:
                    print(f"{sc.id}: wrote {svg}")
                continue
            run(sc, args.samples, args.seed, args.out, args.threads, not args.no_truncation, args.scheme)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EnsembleFailure, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
