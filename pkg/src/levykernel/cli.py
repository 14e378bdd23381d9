"""Command line front end: ``levykernel <command> [options]``.

Every command writes ``<out>/<command>.csv`` and prints one verdict line
``VERDICT <command> pass|fail``; failures are also listed as JSON in
``<out>/failures.json``. The exit status is 0 iff every verdict passes,
1 on a failed verdict, 2 on configuration errors and 3 when a computation
raises.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import bounds as B
from .decomposition import compound_series, decompose, poisson_law
from .density import DensityGrid, auto_grid, density_convolution, density_fourier
from .errors import ConfigError, LevyKernelError
from .exponent import ScaleSolver, check_condition_A, psi_star
from .levy_model import load_config
from .models import PRESETS, resolve_model

CACHE_ENV = "LEVYKERNEL_CACHE_DIR"
COMMANDS = ("check-a", "rho-table", "decompose", "density", "bounds", "bell", "subexp-diag", "report",
            "list-models")
DEFAULT_T = (1e-3, 1e-2, 1e-1)
DEFAULT_TOLS = {"report": 1e-6, "slope": 0.01, "route": 1e-4, "spread": 50.0, "refit": 0.05,
                "trend": 0.02, "eps-tail": 1e-10}


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(fmt(x) for x in np.ravel(v))
    return "" if v is None else str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r.get(h)) for h in header])


# ---------------------------------------------------------------------------
# configuration


def parse_times(spec) -> list:
    """``"1e-3,1e-2"``, ``"geom:1e-4:1e-1:7"``, a list, or ``{start, stop, num}``."""
    if spec is None:
        return list(DEFAULT_T)
    try:
        if isinstance(spec, dict):
            ts = np.geomspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        elif isinstance(spec, str) and spec.startswith("geom:"):
            _, a, b, k = spec.split(":")
            ts = np.geomspace(float(a), float(b), int(k))
        elif isinstance(spec, str):
            ts = [float(x) for x in spec.split(",") if x.strip()]
        else:
            ts = [float(x) for x in spec]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("t", f"cannot read times from {spec!r}: {exc}") from None
    ts = sorted(float(x) for x in ts)
    if not ts or ts[0] <= 0:
        raise ConfigError("t", "times must be positive")
    return ts


class RunConfig:
    """Merged view of the config file and the command line (flags win)."""

    def __init__(self, tree: dict, args):
        self.tree = tree
        model = args.model or tree.get("model")
        if model is None:
            raise ConfigError("model", "missing required key (or pass --model)")
        self.preset = resolve_model(model)
        self.ts = parse_times(args.t if args.t is not None else tree.get("t"))
        out = args.out or tree.get("out") or "levykernel-out"
        self.out = Path(out)
        grid = tree.get("grid", {}) or {}
        if not isinstance(grid, dict):
            raise ConfigError("grid", "expected a mapping")
        self.n_points = args.n_points or grid.get("n_points")
        self.extent_factor = float(grid.get("extent_factor", 20.0))
        jobs = args.jobs if args.jobs is not None else tree.get("jobs", os.cpu_count() or 1)
        self.jobs = int(jobs)
        if self.jobs < 1:
            raise ConfigError("jobs", "must be at least 1")
        self.tols = dict(DEFAULT_TOLS)
        for k, v in (tree.get("tolerances") or {}).items():
            self.tols[str(k)] = float(v)
        self.tols.update(args.tols)
        for k, v in self.tols.items():
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"tolerances.{k}", "tolerances must be positive")
        self.options = dict(tree.get("options") or {})
        for key in ("direction", "shape", "b", "tail_alpha", "dist", "route"):
            val = getattr(args, key, None)
            if val is not None:
                self.options[key] = val

    @property
    def triplet(self):
        return self.preset.triplet

    @property
    def name(self):
        return self.preset.name

    def sweep(self, **kw):
        return B.prepare_sweep(self.triplet, self.ts, n_points=self.n_points,
                               extent_factor=self.extent_factor, jobs=self.jobs, **kw)


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, verdict, failures)


def cmd_check_a(cfg):
    rep = check_condition_A(cfg.triplet.measure)
    row = {"model": cfg.name, "r0": rep.r_range[0], "r1": rep.r_range[1], "beta_hat": rep.beta_hat,
           "passed": rep.passed, "witness_direction": rep.witness_direction}
    fails = [] if rep.passed else [{"check": "condition_A", "witness_direction": fmt(rep.witness_direction),
                                    "message": rep.summary()}]
    return ["model", "r0", "r1", "beta_hat", "passed", "witness_direction"], [row], rep.passed, fails


def cmd_rho_table(cfg):
    solver = ScaleSolver(cfg.triplet.measure)
    rows = []
    for t in cfg.ts:
        rho = solver.rho(t)
        rows.append({"t": t, "rho": rho, "t_psi_star": t * float(psi_star(cfg.triplet.measure, rho))})
    fails = []
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log(cfg.ts), np.log([r["rho"] for r in rows]), 1)[0])
    expect = cfg.preset.expected.get("rho_exponent")
    ok = True
    if slope is not None and expect is not None and abs(slope - expect) > cfg.tols["slope"]:
        ok = False
        fails.append({"check": "rho_slope", "slope": slope, "expected": expect})
    for r in rows:
        r["slope"] = slope
    return ["t", "rho", "t_psi_star", "slope"], rows, ok, fails


def cmd_decompose(cfg):
    solver = ScaleSolver(cfg.triplet.measure)
    n = cfg.triplet.dim
    rows, fails = [], []
    for t in cfg.ts:
        rho = solver.rho(t)
        grid = auto_grid(cfg.triplet, t, rho, cfg.n_points, cfg.extent_factor).enlarged(2)
        dec = decompose(cfg.triplet, t, rho, grid)
        ser = compound_series(dec.lam, cfg.tols["eps-tail"])
        row = {"t": t, "rho": rho, "a_t": dec.a_t, "lambda_mass": dec.lambda_mass, "M": ser.M,
               "tail_bound": ser.tail_bound, "coverage_loss": ser.coverage_loss,
               "support_ok": dec.support_ok}
        rows.append(row)
        if dec.lambda_mass > n + 1 or not dec.support_ok:
            fails.append({"check": "big_jump_intensity", "t": t, "lambda_mass": dec.lambda_mass})
    hdr = ["t", "rho", "a_t", "lambda_mass", "M", "tail_bound", "coverage_loss", "support_ok"]
    return hdr, rows, not fails, fails


def _cache_key(cfg, t, grid, which):
    blob = json.dumps({"model": cfg.triplet.to_config(), "t": t, "extent": grid.extent,
                       "n": grid.n_points, "which": which}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def cached_density(cfg, t, grid):
    cache = os.environ.get(CACHE_ENV)
    path = Path(cache) / f"{_cache_key(cfg, t, grid, 'full')}.lkdg" if cache else None
    if path is not None and path.exists():
        return DensityGrid.load(path)
    dens = density_fourier(cfg.triplet, t, grid)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        dens.save(path)
    return dens


def cmd_density(cfg):
    solver = ScaleSolver(cfg.triplet.measure)
    route = bool(cfg.options.get("route", False))
    rows, fails = [], []
    for i, t in enumerate(cfg.ts):
        rho = solver.rho(t)
        grid = auto_grid(cfg.triplet, t, rho, cfg.n_points, cfg.extent_factor)
        dens = cached_density(cfg, t, grid)
        fname = f"density_{i:03d}.lkdg"
        dens.save(cfg.out / fname)
        row = {"t": t, "rho": rho, "peak": dens.peak, "grid_mass": dens.riemann_mass(),
               "value_at_origin": dens.value_at_origin(), "file": fname, "route_error": None}
        if route:
            big = grid.enlarged(2)
            dec = decompose(cfg.triplet, t, rho, big)
            plaw = poisson_law(compound_series(dec.lam, cfg.tols["eps-tail"]))
            bar = density_fourier(cfg.triplet, t, big, "bar", rho=rho, period=4 * big.extent[0])
            conv = density_convolution(bar, plaw, dec.a_t)
            sl = tuple(slice(k // 2 - m // 2, k // 2 - m // 2 + m) for k, m in zip(big.n_points, grid.n_points))
            err = float(np.abs(conv.values[sl] - dens.values).max() / dens.peak)
            row["route_error"] = err
            if err > cfg.tols["route"]:
                fails.append({"check": "route_equivalence", "t": t, "error": err})
        rows.append(row)
    return ["t", "rho", "peak", "grid_mass", "value_at_origin", "route_error", "file"], rows, not fails, fails


def cmd_bounds(cfg):
    direction = cfg.options.get("direction", "upper")
    if direction == "upper":
        sw = cfg.sweep()
        rep = B.fit_upper(sw, cfg.options.get("shape", "exp"), report_tol=cfg.tols["report"])
    elif direction == "lower":
        sw = cfg.sweep(with_bar=True)
        rep = B.fit_lower(sw, report_tol=cfg.tols["report"])
    else:
        raise ConfigError("options.direction", "expected 'upper' or 'lower'")
    return _report_rows(rep)


def _report_rows(rep):
    rows = []
    for r in rep.rows:
        row = dict(rep.constants)
        row.update({k: v for k, v in r.items() if not isinstance(v, dict)})
        rows.append(row)
    hdr = ["t", "rho"] + list(rep.constants)
    extra = [k for k, v in (rep.rows[0] if rep.rows else {}).items() if k not in hdr and not isinstance(v, dict)]
    fails = [] if rep.verdict else [{"check": f"{rep.direction}_{rep.shape}", "witness": rep.witness}]
    return hdr + extra, rows, rep.verdict, fails


def cmd_bell(cfg):
    sw = cfg.sweep()
    bells = cfg.preset.expected.get("bell", ("power",))
    if "tail_alpha" in cfg.options or "subexp" in bells:
        alpha = float(cfg.options.get("tail_alpha", cfg.preset.expected.get("alpha_effective", 1.0)))
        rep = B.bell_subexp_bound(sw, B.TailFunction(1.0, alpha=alpha), report_tol=cfg.tols["report"])
    else:
        b = float(cfg.options.get("b", cfg.preset.expected.get("alpha_effective", 1.0)))
        rep = B.bell_power_bound(sw, b, max_ratio=cfg.tols["spread"], report_tol=cfg.tols["report"])
    return _report_rows(rep)


def _distribution(spec):
    name, _, par = str(spec).partition(":")
    try:
        val = float(par) if par else 1.0
    except ValueError:
        raise ConfigError("options.dist", f"bad parameter in {spec!r}") from None
    if name == "pareto":
        return stats.pareto(val)
    if name in ("expon", "exponential"):
        return stats.expon(scale=1.0 / val)
    raise ConfigError("options.dist", f"unknown law {name!r}; use pareto:<alpha> or expon:<rate>")


def cmd_subexp(cfg):
    dist = _distribution(cfg.options.get("dist", "pareto:1.5"))
    ts = cfg.ts if cfg.ts != list(DEFAULT_T) else [10.0, 100.0, 1e3, 1e4]
    rep = B.subexp_diagnostic(dist, ts, cfg.tols["trend"])
    rows = [{"t": t, "raw_ratio": raw, "normalised_ratio": nr} for t, raw, nr in rep.rows]
    fails = [] if rep.consistent else [{"check": "subexponential", "limit": rep.limit}]
    return ["t", "raw_ratio", "normalised_ratio"], rows, rep.consistent, fails


def cmd_report(cfg):
    steps = [("check-a", cmd_check_a), ("rho-table", cmd_rho_table), ("decompose", cmd_decompose)]
    if cfg.preset.expected.get("condition_A", True):
        steps += [("bounds-upper", lambda c: _with(c, "direction", "upper", cmd_bounds)),
                  ("bounds-lower", lambda c: _with(c, "direction", "lower", cmd_bounds))]
        if cfg.preset.expected.get("bell"):
            steps.append(("bell", cmd_bell))
    rows, fails = [], []
    for name, fn in steps:
        try:
            hdr, sub, ok, f = fn(cfg)
            write_csv(cfg.out / f"{name}.csv", hdr, sub)
            detail = ""
        except LevyKernelError as exc:
            ok, f, detail = False, [{"check": name, "error": f"{type(exc).__name__}: {exc}"}], str(exc)
        rows.append({"command": name, "verdict": "pass" if ok else "fail", "detail": detail})
        fails += f
    return ["command", "verdict", "detail"], rows, not fails, fails


def _with(cfg, key, value, fn):
    old = cfg.options.get(key)
    cfg.options[key] = value
    try:
        return fn(cfg)
    finally:
        if old is None:
            cfg.options.pop(key, None)
        else:
            cfg.options[key] = old


HANDLERS = {"check-a": cmd_check_a, "rho-table": cmd_rho_table, "decompose": cmd_decompose,
            "density": cmd_density, "bounds": cmd_bounds, "bell": cmd_bell, "subexp-diag": cmd_subexp,
            "report": cmd_report}


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(
        prog="levykernel",
        description="Densities of pure-jump Levy processes and their kernel estimates.",
        epilog=f"Tolerances: --tol-NAME VALUE for NAME in {', '.join(DEFAULT_TOLS)}. "
               f"Environment: {CACHE_ENV} caches computed density grids. "
               f"Models: {', '.join(PRESETS)}.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="what to run (or use --cmd)")
    p.add_argument("--cmd", choices=COMMANDS, help="command name, alternative to the positional")
    p.add_argument("--config", help="JSON or YAML run configuration")
    p.add_argument("--model", help="preset name (see list-models)")
    p.add_argument("--t", help="times: '1e-3,1e-2' or 'geom:START:STOP:NUM'")
    p.add_argument("--out", help="output directory (default levykernel-out)")
    p.add_argument("--jobs", type=int, help="worker threads for per-t work (default: all cores)")
    p.add_argument("--n-points", type=int, dest="n_points", help="grid points per axis")
    p.add_argument("--direction", choices=("upper", "lower"), help="bounds: which estimate to fit")
    p.add_argument("--shape", choices=("exp", "explog"), help="bounds: upper kernel shape")
    p.add_argument("--b", type=float, help="bell: power exponent b in (1 + rho|x|)^(-n-b)")
    p.add_argument("--tail-alpha", type=float, dest="tail_alpha",
                   help="bell: use the tail bound with 1 - G(v) = |v|^-alpha")
    p.add_argument("--dist", help="subexp-diag: pareto:<alpha> or expon:<rate>")
    p.add_argument("--route", action="store_true", default=None,
                   help="density: also compare with the small/big jump convolution route")
    return p


def _split_tols(argv):
    rest, tols = [], {}
    it = iter(argv)
    for a in it:
        if a.startswith("--tol-"):
            key, eq, val = a[6:].partition("=")
            if not eq:
                val = next(it, None)
            try:
                tols[key] = float(val)
            except (TypeError, ValueError):
                raise ConfigError(f"tolerances.{key}", f"expected a number, got {val!r}") from None
        else:
            rest.append(a)
    return rest, tols


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, tols = _split_tols(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    args.tols = tols
    command = args.cmd or args.command
    if command is None:
        parser.error("a command is required")
    if command == "list-models":
        for name, pre in PRESETS.items():
            print(f"{name}\t{pre.description}")
        return 0
    try:
        tree = load_config(args.config) if args.config else {}
        cfg = RunConfig(tree, args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        hdr, rows, ok, fails = HANDLERS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LevyKernelError as exc:
        mod = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"error ({mod}.{type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    write_csv(cfg.out / f"{command}.csv", hdr, rows)
    (cfg.out / "failures.json").write_text(json.dumps(fails, indent=1, sort_keys=True, default=fmt) + "\n")
    print(f"VERDICT {command} {'pass' if ok else 'fail'}")
    for f in fails:
        print("FAILURE " + json.dumps(f, sort_keys=True, default=fmt))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
