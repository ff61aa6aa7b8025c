"""Command-line entry point.

One executable, seven subcommands::

    ot MU.csv NU.csv --p P [--plan OUT.csv]
    disintegrate SCENARIO.csv [--bin-width W] --out DIR/
    analyze SCENARIO.(csv|json) --p P [--tol T] [--eps0 E] [--self-check]
            [--seed S] --out report.json
    tables [--out T.csv]
    arc-profile --lambdas 1,1.1,1.5,2 --steps 512 [--out P.csv]
    energy-curve --min 1 --max 2 --steps 101 [--out C.csv]
    scenario --kind K [--lambda L] [--fibers M] [--points N] ... --out S.csv

Exit status: 0 on success, 1 on invalid input or configuration, 2 on
numerical failure (solver pivot bound or quadrature depth exhausted). Outputs
are written atomically (temp file + rename), begin with a comment line that
echoes the tool version and the fully resolved configuration, and are
byte-identical across runs for identical configuration and seed. Paths that
emit delimited data also render the matching matplotlib figure next to the
output file unless ``--no-plot`` is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .disintegration import bin_labels, disintegrate, verify_reconstruction
from .energy import (
    DEFAULT_TOLERANCE,
    _worker_count,
    energy as compute_energy,
    isometry_gap,
    lipschitz_check,
)
from .elliptic import TABLE_LAMBDAS, arc_profile, build_scenario, energy_curve, table_rows
from .measures import (
    DiscreteMeasure,
    box_region,
    format_measure_csv,
    format_scenario_csv,
    format_scenario_json,
    read_measure_csv,
    read_scenario,
)
from .transport import brute_force_wasserstein, wasserstein

_TOOL = "foliation-energy"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract here is 1
    def error(self, message):
        raise _UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved invocation: subcommand, options and seed."""

    subcommand: str
    options: dict = field(default_factory=dict)
    seed: int = 0

    def describe(self) -> str:
        parts = [f"seed={self.seed}"]
        parts += [f"{k}={v}" for k, v in sorted(self.options.items()) if v is not None]
        return " ".join(parts)

    def header_line(self) -> str:
        return f"{_TOOL} {__version__} | {self.subcommand} | {self.describe()}"


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render_atomic(render, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".png")
    os.close(fd)
    try:
        render(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=_TOOL, description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"{_TOOL} {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    ot = subs.add_parser("ot", help="exact p-Wasserstein distance between two measure files")
    ot.add_argument("mu", help="source measure CSV (x1,x2,w)")
    ot.add_argument("nu", help="target measure CSV (x1,x2,w)")
    ot.add_argument("--p", type=float, default=1.0, help="transport order, real >= 1")
    ot.add_argument("--plan", default=None, help="optional plan dump CSV (i,j,flow)")

    dis = subs.add_parser("disintegrate", help="split a scenario into base and conditionals")
    dis.add_argument("scenario", help="scenario file (csv or json)")
    dis.add_argument("--bin-width", type=float, default=None, help="pre-bin labels")
    dis.add_argument("--out", required=True, help="output directory")

    ana = subs.add_parser("analyze", help="energy report and foliation verdict")
    ana.add_argument("scenario", help="scenario file (csv or json)")
    ana.add_argument("--p", type=float, default=1.0, help="transport order, real >= 1")
    ana.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE,
                     help="classifier tolerance on energy - 1")
    ana.add_argument("--eps0", type=float, default=None,
                     help="initial ball radius (default: label-set diameter)")
    ana.add_argument("--self-check", action="store_true",
                     help="run seeded reconstruction/solver sanity checks")
    ana.add_argument("--seed", type=int, default=0, help="seed for --self-check")
    ana.add_argument("--out", required=True, help="report JSON path")

    tab = subs.add_parser("tables", help="reference table: lambda, L_1, E_1")
    tab.add_argument("--out", default=None, help="output CSV (default: stdout)")

    arc = subs.add_parser("arc-profile", help="normalized arc length columns per lambda")
    arc.add_argument("--lambdas", default="1,1.1,1.5,2", help="comma-separated aspects")
    arc.add_argument("--steps", type=int, default=512)
    arc.add_argument("--out", default=None, help="output CSV (default: stdout)")

    cur = subs.add_parser("energy-curve", help="closed-form 1-energy over an aspect range")
    cur.add_argument("--min", dest="lam_min", type=float, default=1.0)
    cur.add_argument("--max", dest="lam_max", type=float, default=2.0)
    cur.add_argument("--steps", type=int, default=101)
    cur.add_argument("--out", default=None, help="output CSV (default: stdout)")

    sc = subs.add_parser("scenario", help="generate a built-in scenario file")
    sc.add_argument("--kind", required=True,
                    choices=["circle", "ellipse", "ellipse_dirac", "square", "graph"])
    sc.add_argument("--lambda", dest="lam", type=float, default=None)
    sc.add_argument("--radius", type=float, default=1.0)
    sc.add_argument("--fibers", type=int, default=64)
    sc.add_argument("--points", type=int, default=256)
    sc.add_argument("--y-min", type=float, default=None)
    sc.add_argument("--grid", type=int, default=16)
    sc.add_argument("--count", type=int, default=64)
    sc.add_argument("--map", dest="graph_map", default="identity",
                    choices=sorted(["identity", "sin", "quadratic"]))
    sc.add_argument("--out", required=True, help="scenario CSV or JSON path")

    for sub in (ot, dis, ana, tab, arc, cur, sc):
        sub.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    options = {k: v for k, v in vars(args).items() if k not in ("subcommand", "seed")}
    return RunConfig(args.subcommand, options, getattr(args, "seed", 0))


def _check_positive_int(name: str, value: int, minimum: int = 1) -> None:
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")


def _csv_out(config: RunConfig, lines: list[str], out: str | None) -> None:
    text = f"# {config.header_line()}\n" + "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        _atomic_write_text(Path(out), text)


def _run_ot(config: RunConfig) -> int:
    opt = config.options
    if not (opt["p"] >= 1.0):
        raise ValueError(f"--p must be >= 1, got {opt['p']}")
    mu = read_measure_csv(opt["mu"])
    nu = read_measure_csv(opt["nu"])
    value, plan = wasserstein(mu, nu, opt["p"])
    print(f"# {config.header_line()}")
    print(f"W_p = {value:.9g}")
    if opt["plan"]:
        lines = ["i,j,flow"]
        for (i, j), flow in sorted(plan.entries.items()):
            lines.append(f"{i},{j},{flow:.17g}")
        _csv_out(config, lines, opt["plan"])
    return 0


def _label_slug(label: float) -> str:
    return f"{label:.8g}".replace("-", "m")


def _run_disintegrate(config: RunConfig) -> int:
    opt = config.options
    scenario = read_scenario(opt["scenario"])
    if opt["bin_width"] is not None:
        scenario = bin_labels(scenario, opt["bin_width"])
    d = disintegrate(scenario)
    out_dir = Path(opt["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    header = [config.header_line()]
    _atomic_write_text(out_dir / "base.csv", format_measure_csv(d.base, header))
    for label in d.labels:
        _atomic_write_text(
            out_dir / f"fiber_{_label_slug(label)}.csv",
            format_measure_csv(d.conditionals[label], header + [f"label {label:.17g}"]),
        )
    return 0


def _self_check(scenario, d, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    lo = scenario.points.min(axis=0) - 0.1
    hi = scenario.points.max(axis=0) + 0.1
    regions = []
    for _ in range(100):
        a = rng.uniform(lo, hi)
        b = rng.uniform(lo, hi)
        x1, x2 = sorted((a[0], b[0])), sorted((a[1], b[1]))
        regions.append(box_region(x1[0], x1[1], x2[0], x2[1]))
    recon = verify_reconstruction(d, scenario, regions)
    lip = lipschitz_check(scenario, d)
    worst_oracle = 0.0
    for _ in range(20):
        m1 = DiscreteMeasure(rng.uniform(-1, 1, (3, 2)), rng.uniform(0.1, 1.0, 3))
        w = rng.uniform(0.1, 1.0, 3)
        m2 = DiscreteMeasure(rng.uniform(-1, 1, (3, 2)), w * (m1.mass / w.sum()))
        for p in (1.0, 2.0):
            solver, _ = wasserstein(m1, m2, p)
            oracle = brute_force_wasserstein(m1, m2, p)
            worst_oracle = max(worst_oracle, abs(solver - oracle) / max(oracle, 1e-30))
    mass = d.source.mass
    ok = recon <= 1e-12 * mass and lip <= 1e-9 and worst_oracle <= 1e-9
    return {
        "passed": bool(ok),
        "reconstruction_discrepancy": recon,
        "lipschitz_excess": lip,
        "oracle_relative_error": worst_oracle,
    }


def emit_report(report, isometry_gap: float, path, meta: dict, self_check: dict | None = None) -> None:
    """Write the energy report JSON with fixed key order."""
    doc = {
        "_meta": meta,
        "p": report.p,
        "energy": report.energy,
        "verdict": report.verdict,
        "tolerance": report.tolerance,
        "per_label": [
            {
                "label": item.label,
                "derivative": item.derivative,
                "eps": item.eps,
                "witness": list(item.witness),
            }
            for item in report.per_label
        ],
        "isometry_gap": isometry_gap,
        "foliation_check": {
            "passed": report.foliation_passed,
            "worst_violation": report.foliation_worst,
        },
    }
    if self_check is not None:
        doc["self_check"] = self_check
    _atomic_write_text(Path(path), json.dumps(doc, indent=2) + "\n")


def _run_analyze(config: RunConfig) -> int:
    opt = config.options
    if not (opt["p"] >= 1.0):
        raise ValueError(f"--p must be >= 1, got {opt['p']}")
    if not (opt["tol"] > 0):
        raise ValueError(f"--tol must be positive, got {opt['tol']}")
    if opt["eps0"] is not None and not (opt["eps0"] > 0):
        raise ValueError(f"--eps0 must be positive, got {opt['eps0']}")
    scenario = read_scenario(opt["scenario"])
    d = disintegrate(scenario)
    schedule = None
    if opt["eps0"] is not None:
        schedule = tuple(opt["eps0"] * 0.5**k for k in range(200))
    report = compute_energy(d, opt["p"], schedule, tolerance=opt["tol"])
    gap = isometry_gap(d, opt["p"])
    self_check = _self_check(scenario, d, config.seed) if opt["self_check"] else None
    meta = {
        "tool": _TOOL,
        "version": __version__,
        "subcommand": config.subcommand,
        "config": config.describe(),
    }
    out = Path(opt["out"])
    emit_report(report, gap, out, meta, self_check)
    if not opt["no_plot"]:
        from . import figures

        _render_atomic(lambda tmp: figures.render_report(report, gap, tmp), out.with_suffix(".png"))
    if self_check is not None and not self_check["passed"]:
        raise RuntimeError("self-check failed; see the report for the offending numbers")
    return 0


def _run_tables(config: RunConfig) -> int:
    lines = ["lambda,L_1,E_1"]
    for lam, length, e1 in table_rows(TABLE_LAMBDAS):
        lines.append(f"{lam:.8f},{length:.8f},{e1:.8f}")
    _csv_out(config, lines, config.options["out"])
    return 0


def _run_arc_profile(config: RunConfig) -> int:
    opt = config.options
    try:
        lambdas = [float(tok) for tok in str(opt["lambdas"]).split(",") if tok.strip()]
    except ValueError:
        raise ValueError(f"--lambdas must be comma-separated reals, got {opt['lambdas']!r}")
    _check_positive_int("--steps", opt["steps"], 2)
    thetas, values = arc_profile(lambdas, opt["steps"])
    header = "theta," + ",".join(f"lambda={lam:g}" for lam in lambdas)
    lines = [header]
    for i, theta in enumerate(thetas):
        lines.append(f"{theta:.8f}," + ",".join(f"{v:.8f}" for v in values[i]))
    _csv_out(config, lines, opt["out"])
    if opt["out"] and not opt["no_plot"]:
        from . import figures

        _render_atomic(
            lambda tmp: figures.render_arc_profile(thetas, values, lambdas, tmp),
            Path(opt["out"]).with_suffix(".png"),
        )
    return 0


def _run_energy_curve(config: RunConfig) -> int:
    opt = config.options
    _check_positive_int("--steps", opt["steps"], 2)
    lams, energies = energy_curve(opt["lam_min"], opt["lam_max"], opt["steps"])
    lines = ["lambda,E1"]
    for lam, e1 in zip(lams, energies):
        lines.append(f"{lam:.8f},{e1:.8f}")
    _csv_out(config, lines, opt["out"])
    if opt["out"] and not opt["no_plot"]:
        from . import figures

        _render_atomic(
            lambda tmp: figures.render_energy_curve(lams, energies, tmp),
            Path(opt["out"]).with_suffix(".png"),
        )
    return 0


def _run_scenario(config: RunConfig) -> int:
    opt = config.options
    scenario = build_scenario(
        opt["kind"],
        lam=opt["lam"],
        radius=opt["radius"],
        fibers=opt["fibers"],
        points=opt["points"],
        y_min=opt["y_min"],
        grid=opt["grid"],
        count=opt["count"],
        graph_map=opt["graph_map"],
    )
    out = Path(opt["out"])
    if out.suffix.lower() == ".json":
        text = format_scenario_json(scenario, meta={"header": config.header_line()})
    else:
        text = format_scenario_csv(scenario, [config.header_line()])
    _atomic_write_text(out, text)
    return 0


_HANDLERS = {
    "ot": _run_ot,
    "disintegrate": _run_disintegrate,
    "analyze": _run_analyze,
    "tables": _run_tables,
    "arc-profile": _run_arc_profile,
    "energy-curve": _run_energy_curve,
    "scenario": _run_scenario,
}


def run(config: RunConfig) -> int:
    """Execute a resolved configuration; exceptions map to exit codes in main."""
    _worker_count()  # validate the threads env var up front
    return _HANDLERS[config.subcommand](config)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{_TOOL}: error: {exc}", file=sys.stderr)
        return 1
    config = config_from_args(args)
    try:
        return run(config)
    except (ValueError, OSError, KeyError) as exc:
        print(f"{_TOOL}: error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"{_TOOL}: numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
