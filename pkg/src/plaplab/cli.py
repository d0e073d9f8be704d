"""Command-line entry point: ``plaplab SUBCOMMAND [--config PATH] [flags]``.

Each subcommand writes into ``OUT/<subcommand>/`` and prints a one-line
JSON status.  Exit status: 0 when every pass flag is true, 1 when some
check failed, 2 for configuration or usage errors.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import counterexample as cx
from . import harness, suite
from .config import SUBCOMMANDS, ConfigError, RunConfig, dump_config, parse_config, with_overrides
from .fields import data_field
from .grid import build_grid, load_dump, save_dump
from .harness import SweepPoint, barrier_check
from .params import ProblemParams
from .solver import SolveConfig, continuation_solve, picard_solve

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def run_check_point(cfg: RunConfig, out: Path) -> dict:
    sec = cfg.check_point
    jobs = []
    for name in sec.inequalities:
        per = [sec.samples // len(sec.dims) + (1 if i < sec.samples % len(sec.dims) else 0)
               for i in range(len(sec.dims))]
        jobs += [(name, n, k) for n, k in zip(sec.dims, per) if k > 0]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(lambda j: suite.run_inequality(j[0], j[1], j[2], cfg.seed), jobs))
    eq = suite.two_d_equality(sec.equality_samples, cfg.seed)
    _write(out / "worst_gaps.csv", suite.results_csv(results))
    failures = [f"{r.name} n={r.n}: {r.violations} violations" for r in results if not r.passed]
    if not eq <= 1e-10:
        failures.append(f"n=2 equality: max |gap|/|H|^2 = {eq!r}")
    summary = {
        "worst_scaled_gap": suite.summary(results),
        "two_d_equality_max": eq,
        "tolerance": suite.TOLERANCE,
        "failures": failures,
        "passed": not failures,
    }
    _write(out / "summary.json", _json(summary))
    return summary


def _solve_problem(cfg: RunConfig):
    sec = cfg.solve
    if sec.preset == "poisson":
        p, gamma, lam, mollify, scale = 2.0, 0.0, 0.0, "none", 2.0 * math.pi**2
        fname = "sinsin"
    else:
        p, gamma, lam, mollify, scale, fname = sec.p, sec.gamma, sec.lam, sec.mollify, sec.f_scale, sec.f
    if sec.f_file:
        f = load_dump(sec.f_file)
    else:
        grid = build_grid(cfg.domains[0].spec(), cfg.h)
        f = data_field(fname, grid, scale)
    scfg = SolveConfig(ProblemParams(2, p, gamma, sec.eps, lam), max_picard=sec.max_picard,
                       eps_schedule=tuple(cfg.eps_schedule), mollify=mollify)
    return scfg, f


def run_solve(cfg: RunConfig, out: Path) -> dict:
    scfg, f = _solve_problem(cfg)
    gamma = scfg.params.gamma
    failures: List[str] = []
    if cfg.solve.continuation:
        results, diag = continuation_solve(scfg, f)
        stages = []
        for k, r in enumerate(results):
            save_dump(r.u, out / f"stage_{k}.dump")
            stages.append(r.diagnostics())
            if not r.converged:
                failures.append(f"stage {k} (eps={r.eps_used!r}) did not converge")
        study = harness.convergence_study(diag)
        if not study.passed:
            failures.append(f"continuation: {study.reason}")
        body = {"stages": stages, "convergence": diag.as_dict(), "cauchy_pass": study.passed}
        final = results[-1]
    else:
        final = picard_solve(scfg, f)
        save_dump(final.u, out / "solution.dump")
        body = final.diagnostics()
        if not final.converged:
            failures.append("Picard iteration did not converge")
    if scfg.params.lam == 0:
        bar = barrier_check(final.u, f, gamma)
        body["barrier"] = {"sup_u": bar.sup_u, "bound": bar.bound, "holds": bar.holds}
        if not bar.holds:
            failures.append("barrier bound violated")
    body["failures"] = failures
    body["passed"] = not failures
    _write(out / "diagnostics.json", _json(body))
    return body


def _points(cfg: RunConfig, estimate: str) -> List[SweepPoint]:
    betas = cfg.beta if estimate == "apriori" else [0.0]
    return [SweepPoint(p, g, e, b) for p, g, e, b in itertools.product(cfg.p, cfg.gamma, cfg.eps_schedule, betas)]


def _run_estimates(cfg: RunConfig, out: Path, estimates: Sequence[str], csv_name: str) -> dict:
    domains = [d.spec() for d in cfg.domains]
    reports = []
    for est in estimates:
        reports += harness.sweep(_points(cfg, est), cfg.functions, domains, [est], cfg.spacings,
                                 threads=cfg.threads, seed=cfg.seed)
    _write(out / csv_name, harness.reports_csv(reports))
    summary = harness.sweep_summary(reports)
    _write(out / "summary.json", _json(summary))
    return summary


def run_sweep(cfg: RunConfig, out: Path) -> dict:
    return _run_estimates(cfg, out, cfg.estimates, "sweep.csv")


def run_holder(cfg: RunConfig, out: Path) -> dict:
    return _run_estimates(cfg, out, ["holder_global", "holder_local"], "holder.csv")


def run_counterexample(cfg: RunConfig, out: Path) -> dict:
    sec = cfg.counterexample
    rep = cx.blowup_report(sec.n, sec.p, sec.gamma, sec.eps, sec.cutoff)
    _write(out / "blowup.csv", rep.csv())
    failures = []
    if not rep.sup_increasing:
        failures.append("sup v is not strictly increasing down the eps list")
    if not rep.exponent_ok:
        failures.append(f"fitted exponent {rep.fit_exponent!r} is not within 20% of {rep.expected_exponent!r}")
    summary = {
        "n": sec.n, "p": sec.p, "gamma": sec.gamma, "cutoff": rep.cutoff,
        "critical": rep.critical,
        "fit_exponent": _finite(rep.fit_exponent),
        "expected_exponent": rep.expected_exponent if rep.critical else None,
        "failures": failures,
        "passed": not failures,
    }
    _write(out / "summary.json", _json(summary))
    return summary


RUNNERS = {
    "check-point": run_check_point,
    "solve": run_solve,
    "sweep": run_sweep,
    "counterexample": run_counterexample,
    "holder": run_holder,
}


def dispatch(cfg: RunConfig) -> int:
    """Run ``cfg.subcommand``; returns the exit status."""
    if cfg.subcommand is None:
        raise ConfigError(["subcommand: missing"])
    out = Path(cfg.out) / cfg.subcommand
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.json", dump_config(cfg))
    try:
        summary = RUNNERS[cfg.subcommand](cfg, out)
    except (ValueError, RuntimeError) as exc:
        status = {"subcommand": cfg.subcommand, "passed": False, "error": f"{type(exc).__name__}: {exc}"}
        _write(out / "failure.json", _json(status))
        print(json.dumps(status, sort_keys=True))
        return EXIT_FAIL
    status = {"subcommand": cfg.subcommand, "passed": bool(summary["passed"]), "out": str(out)}
    print(json.dumps(status, sort_keys=True))
    return EXIT_OK if summary["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plaplab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS)
    ap.add_argument("--config", metavar="PATH", help="YAML or JSON run configuration")
    ap.add_argument("--seed", type=int, metavar="N")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--threads", type=int, metavar="N")
    ap.add_argument("--h", type=float, metavar="REAL", help="grid spacing")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        cfg = parse_config(text)
        if args.subcommand and cfg.subcommand and args.subcommand != cfg.subcommand:
            raise ConfigError([f"subcommand: config says {cfg.subcommand!r}, command line says {args.subcommand!r}"])
        cfg = with_overrides(cfg, subcommand=args.subcommand, seed=args.seed, out=args.out,
                             threads=args.threads, h=args.h)
        if cfg.subcommand is None:
            raise ConfigError(["subcommand: missing (give it on the command line or in the config)"])
    except (ConfigError, OSError) as exc:
        print(json.dumps({"passed": False, "error": str(exc)}, sort_keys=True))
        return EXIT_USAGE
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
