"""Command-line front end.

Exit status: 0 pass, 1 usage or configuration error, 2 an identity or bound
exceeded its threshold, 3 blow-up.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import landau_de_gennes as ldg
from . import verification as ver
from .config import ConfigError, ExperimentConfig, load_config
from .snapshot import write_snapshot
from .spectral_domain import random_band_limited

EXIT_OK, EXIT_USAGE, EXIT_THRESHOLD, EXIT_BLOWUP = 0, 1, 2, 3

ENERGY_COLUMNS = ("t", "kinetic", "elastic_L1", "elastic_L23", "elastic_L4_cross", "bulk", "total",
                  "diss_viscous", "diss_rotational", "balance_residual")

# thresholds applied by `verify`
THRESHOLDS = {
    "cancellation": 1e-10,
    "null_lagrangian": 1e-10,
    "variational": 1e-6,
    "mollifier": 1e-12,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _repro(cfg: ExperimentConfig) -> str:
    return f"# nematicflow {__version__} config_sha256={cfg.sha256} seed={cfg.initial.seed}"


def _outdir(cfg: ExperimentConfig, override) -> Path:
    d = Path(override if override is not None else cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


class _EnergyWriter:
    """Sink writing one CSV row per report; the balance residual compares each
    row with the previous one."""

    def __init__(self, path: Path | None, snap_dir: Path | None, box_length: float):
        self.fh = open(path, "w", newline="") if path is not None else None
        self.writer = csv.writer(self.fh, lineterminator="\n") if self.fh else None
        if self.writer:
            self.writer.writerow(ENERGY_COLUMNS)
        self.prev = None
        self.snap_dir = snap_dir
        self.box_length = box_length
        self.count = 0

    def __call__(self, state, rep):
        resid = math.nan
        if self.prev is not None and rep.t > self.prev.t:
            resid = (rep.total - self.prev.total) / (rep.t - self.prev.t) \
                + 0.5 * (rep.dissipation + self.prev.dissipation)
        self.prev = rep
        if self.writer:
            self.writer.writerow([_num(v) for v in (
                rep.t, rep.kinetic, rep.elastic_L1, rep.elastic_L23, rep.elastic_L4_cross, rep.bulk,
                rep.total, rep.dissipation_viscous, rep.dissipation_rotational, resid)])
            self.fh.flush()
        if self.snap_dir is not None:
            write_snapshot(self.snap_dir / f"snap_{self.count:06d}.qtf", state.components(),
                           self.box_length, state.t)
        self.count += 1

    def close(self):
        if self.fh:
            self.fh.close()


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args.output)
    state = cfg.initial_state(Path(args.config).parent)
    snaps = None
    if cfg.output.snapshots:
        snaps = out / "snapshots"
        snaps.mkdir(exist_ok=True)
    sink = _EnergyWriter(out / "energy.csv" if cfg.output.csv else None, snaps, cfg.box_length)
    try:
        res = dyn.run(state, cfg.params, cfg.solver, sinks=[sink])
    except dyn.BlowUpError as err:
        print(f"blow-up at t={err.time:.6g}: {err.norms}", file=sys.stderr)
        return EXIT_BLOWUP
    finally:
        sink.close()
    print(f"simulated {res.steps} steps to t={res.final.t:.6g}; energy {res.reports[-1].total:.10g}")
    return EXIT_OK


def _verify_rows(cfg: ExperimentConfig, samples: int):
    grid = cfg.grid()
    p = cfg.params
    seed = cfg.initial.seed
    decay = cfg.initial.decay
    rows = []

    def add(suite, rep, tol, ok=None):
        passed = rep.passed(tol) if ok is None else ok
        rows.append((suite, rep.name, rep.value, rep.scale, rep.relative_residual, tol, bool(passed)))

    for k in range(samples):
        s = seed + 10 * k
        u = random_band_limited(grid, "vector", decay, s, solenoidal=True, amplitude=cfg.initial.u_amplitude)
        Q = random_band_limited(grid, "qtensor", decay, s + 1, amplitude=cfg.initial.q_amplitude)
        state = dyn.SimState.from_physical(grid, u, Q)
        for rep in ver.cancellation_suite(state, p):
            rep.name = f"{rep.name}[seed={s}]"
            add("cancellation", rep, THRESHOLDS["cancellation"])
        rep = ver.null_lagrangian(grid, Q)
        rep.name = f"null_lagrangian[seed={s}]"
        add("null_lagrangian", rep, THRESHOLDS["null_lagrangian"])
        err = ver.variational_consistency(grid, Q, p, seed=s + 2)
        rows.append(("variational", f"worst_relative_error[seed={s}]", err, 1.0, err,
                     THRESHOLDS["variational"], err <= THRESHOLDS["variational"]))
        b = ver.l4_lower_bound(grid, Q, p)
        rows.append(("l4_lower_bound", f"margin[seed={s}]", b.margin, abs(b.lower), 0.0, 0.0, b.margin >= 0))
        Q2 = random_band_limited(grid, "qtensor", decay, s + 3, amplitude=cfg.initial.q_amplitude)
        rep = ver.delta_dissipation_check(grid, Q, Q2, p)
        rep.name = f"{rep.name}[seed={s}]"
        add("delta_dissipation", rep, 0.0, ok=rep.value >= 0)
    for rep in ver.mollifier_suite(grid, seed=seed):
        tol = 0.0 if rep.name.startswith("idempotence") else THRESHOLDS["mollifier"]
        add("mollifier", rep, tol)
    try:
        K = ldg.coercivity_constant_K(p)
        rows.append(("coercivity", "K", K, 1.0, 0.0, 0.0, True))
    except ldg.CoercivityError as err:
        rows.append(("coercivity", "K", math.nan, 1.0, math.inf, 0.0, False))
        print(err, file=sys.stderr)
    return rows


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args.output)
    rows = _verify_rows(cfg, args.samples)
    failed = [r for r in rows if not r[-1]]
    if cfg.output.csv:
        with open(out / "verify.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("suite", "name", "value", "scale", "relative_residual", "threshold", "passed"))
            for r in rows:
                w.writerow([_num(v) for v in r[:-1]] + ["true" if r[-1] else "false"])
    for r in failed:
        print(f"FAIL {r[0]} {r[1]}: relative residual {r[4]:.3e} > {r[5]:.1e}", file=sys.stderr)
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_THRESHOLD if failed else EXIT_OK


def cmd_twin(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args.output)
    base = cfg.initial_state(Path(args.config).parent)
    other = ver.perturb(base, args.perturb_scale, args.perturb_seed)
    try:
        res = ver.twin_run(base, other, cfg.params, cfg.solver, refine=args.refine)
    except dyn.BlowUpError as err:
        print(f"blow-up at t={err.time:.6g}: {err.norms}", file=sys.stderr)
        return EXIT_BLOWUP
    if cfg.output.csv:
        with open(out / "twin.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "G", "diss_viscous", "diss_rotational"))
            for row in zip(res.times, res.G, res.diss_u, res.diss_Q):
                w.writerow([_num(v) for v in row])
    msg = f"C_fit={res.c_fit:.6g} kappa1={res.kappa1:.6g} kappa2={res.kappa2:.6g}"
    if res.c_fit_refined is not None:
        msg += f" C_fit(dt/2)={res.c_fit_refined:.6g} change={res.c_fit_change:.3e}"
    print(msg)
    return EXIT_OK if res.bound_satisfied else EXIT_THRESHOLD


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    out = _outdir(cfg, args.output)
    try:
        mus = [float(v) for v in args.mu.split(",")]
    except ValueError:
        print(f"--mu must be a comma-separated list of numbers, got {args.mu!r}", file=sys.stderr)
        return EXIT_USAGE
    if any(not m > 0 for m in mus):
        print("--mu values must be positive", file=sys.stderr)
        return EXIT_USAGE
    state = cfg.initial_state(Path(args.config).parent)
    try:
        rows = ver.viscosity_sweep(state, cfg.params, mus, cfg.solver.t_end, cfg.solver)
    except ValueError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    if cfg.output.csv:
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("mu", "sup_A_tilde", "blowup_time", "steps"))
            for r in rows:
                w.writerow([_num(r.mu), _num(r.sup_A_tilde), _num(r.blowup_time), r.steps])
    for r in rows:
        tail = f" blow-up at t={r.blowup_time:.6g}" if r.blowup_time is not None else ""
        print(f"mu={r.mu:g} sup A~={r.sup_A_tilde:.10g}{tail}")
    bad = ver.sweep_violations(rows)
    for a, b in bad:
        print(f"monotonicity violated between mu={a:g} and mu={b:g}", file=sys.stderr)
    return EXIT_THRESHOLD if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nematicflow", description="Q-tensor flow simulator and verification harness")
    parser.add_argument("--version", action="version", version=f"nematicflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--output", default=None, help="output directory (overrides [output] directory)")

    common(sub.add_parser("simulate", help="run and write the energy time series"))
    v = sub.add_parser("verify", help="run the identity suites on generated data")
    common(v)
    v.add_argument("--samples", type=int, default=3, help="random states per suite")
    t = sub.add_parser("twin", help="twin run with a perturbed copy of the initial data")
    common(t)
    t.add_argument("--perturb-scale", type=float, required=True)
    t.add_argument("--perturb-seed", type=int, required=True)
    t.add_argument("--refine", action="store_true", help="refit C at dt/2 and check its stability")
    s = sub.add_parser("sweep", help="sup A~(t) over a list of viscosities")
    common(s)
    s.add_argument("--mu", required=True, help="comma-separated ascending viscosities")
    return parser


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "twin": cmd_twin, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    print(_repro(cfg))
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
