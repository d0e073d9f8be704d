"""Both sides of the global estimates, evaluated on grid fields.

Each ``check_*`` returns an :class:`EstimateReport` holding the named
left- and right-hand-side pieces and their ratio.  The estimates only
assert that some constant exists, so a single report passes when the
ratio is finite; boundedness is judged across an eps schedule by
:func:`eps_stability` (max/median <= 2).
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .fields import DATA_FUNCTIONS, Manufactured, data_field
from .grid import (
    DomainSpec,
    Grid2D,
    ScalarField,
    build_grid,
    derivative_arrays,
    holder_norm,
    magnitude,
    nonlinear_gradient_norms,
    norm_array,
)
from .params import ExponentTable, ProblemParams, barrier_constant, classify
from .pointcalc import PointState, operator_values
from .solver import ConvergenceDiagnostics, SolveConfig, SolveResult, picard_solve, stage_data

STABILITY_FACTOR = 2.0
COMPONENTS = 3
ESTIMATES = (
    "miranda_talenti",
    "apriori",
    "gradient_lq",
    "l1",
    "holder_global",
    "holder_local",
    "solution",
)
CSV_HEADER = (
    ["estimate_id", "n", "p", "gamma", "eps", "beta", "h", "domain", "function"]
    + [f"lhs_{k}" for k in range(1, COMPONENTS + 1)]
    + [f"rhs_{k}" for k in range(1, COMPONENTS + 1)]
    + ["ratio", "pass"]
)


@dataclass
class EstimateReport:
    estimate_id: str
    n: int
    p: float
    gamma: float
    eps: float
    h: float
    beta: float = 0.0
    lhs: Dict[str, float] = field(default_factory=dict)
    rhs: Dict[str, float] = field(default_factory=dict)
    ratio: float = math.nan
    passed: bool = False
    domain: str = ""
    function: str = ""
    note: str = ""

    def __post_init__(self):
        for side in (self.lhs, self.rhs):
            for k, v in side.items():
                if not (math.isfinite(v) and v >= 0):
                    raise ValueError(f"component {k}={v!r} must be finite and nonnegative")

    @property
    def lhs_total(self) -> float:
        return float(sum(self.lhs.values()))

    @property
    def rhs_total(self) -> float:
        return float(sum(self.rhs.values()))

    def csv_row(self) -> List[str]:
        def pad(vals):
            vals = [repr(float(v)) for v in vals]
            return vals + [""] * (COMPONENTS - len(vals))

        return (
            [self.estimate_id, str(self.n), repr(float(self.p)), repr(float(self.gamma)), repr(float(self.eps)),
             repr(float(self.beta)), repr(float(self.h)), self.domain, self.function]
            + pad(self.lhs.values()) + pad(self.rhs.values())
            + [repr(float(self.ratio)), "true" if self.passed else "false"]
        )


def _ratio(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


def _finish(report: EstimateReport) -> EstimateReport:
    report.ratio = _ratio(report.lhs_total, report.rhs_total)
    report.passed = math.isfinite(report.ratio)
    return report


def _base(estimate_id: str, u: ScalarField, p=math.nan, gamma=math.nan, eps=math.nan, beta=0.0) -> EstimateReport:
    return EstimateReport(estimate_id, 2, p, gamma, eps, u.grid.h, beta, domain=u.grid.spec.label)


def _admissible(p: float, gamma: float, eps: float) -> ProblemParams:
    params = ProblemParams(2, p, gamma, eps)
    if not params.admissible:
        raise ValueError(f"(n, p, gamma) = (2, {p}, {gamma}) is not admissible")
    return params


def _operator(u: ScalarField, p: float, gamma: float, eps: float):
    G, H = derivative_arrays(u.values, u.grid)
    return G, H, operator_values(PointState(G, H, eps), p, gamma)


def check_miranda_talenti(u: ScalarField) -> EstimateReport:
    """|D^2 u|_2 against |Delta u|_2; passes when the ratio is at most 1 + 10 h."""
    _, H = derivative_arrays(u.values, u.grid)
    rep = _base("miranda_talenti", u)
    rep.lhs = {"hessian_l2": norm_array(magnitude(H), u.grid, 2.0)}
    rep.rhs = {"laplacian_l2": norm_array(np.abs(H[..., 0, 0] + H[..., 1, 1]), u.grid, 2.0)}
    if rep.rhs_total == 0:
        rep.ratio = math.nan
        rep.passed = rep.lhs_total == 0
        rep.note = "laplacian vanishes; ratio undefined"
        return rep
    rep.ratio = rep.lhs_total / rep.rhs_total
    rep.passed = rep.ratio <= 1.0 + 10.0 * u.grid.h
    return rep


def check_apriori(v: ScalarField, p: float, gamma: float, eps: float, beta: float = 0.0) -> EstimateReport:
    """Weighted second-order estimate.

    beta = 0: |Dv|_{q0}^{gamma+1} + |D[(|Dv|^2+eps)^{gamma/2} Dv]|_2 against
    |weighted operator|_2 + eps^{(gamma+1)/2}.
    beta > 0: squared L^2 norms of |D^2 v| and of the normalized operator,
    both weighted by (|Dv|^2+eps)^{(gamma+beta)/2}, the latter times (1+beta^2).
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    _admissible(p, gamma, eps)
    rep = _base("apriori", v, p, gamma, eps, beta)
    if beta == 0:
        nn = nonlinear_gradient_norms(v, p, gamma, eps)
        rep.lhs = {"grad_q0": nn.grad_q0_term, "sobolev": nn.sobolev_term}
        rep.rhs = {"operator_l2": nn.rhs_op_term, "eps_term": nn.eps_term}
        return _finish(rep)
    G, H, ops = _operator(v, p, gamma, eps)
    w = (np.einsum("...i,...i->...", G, G) + eps) ** (0.5 * (gamma + beta))
    rep.lhs = {"weighted_hessian_sq": norm_array(magnitude(H) * w, v.grid, 2.0) ** 2}
    rep.rhs = {"weighted_operator_sq": (1 + beta**2) * norm_array(np.abs(ops.normalized_p_eps) * w, v.grid, 2.0) ** 2}
    return _finish(rep)


def _op_root(ops, grid: Grid2D, gamma: float, region=None) -> float:
    return norm_array(np.abs(ops.weighted_operator), grid, 2.0, region) ** (1.0 / (gamma + 1.0))


def check_gradient_lq(v: ScalarField, p: float, gamma: float, eps: float) -> EstimateReport:
    """|Dv|_{q0} against |weighted operator|_2^{1/(gamma+1)} + sqrt(eps)."""
    params = _admissible(p, gamma, eps)
    G, _, ops = _operator(v, p, gamma, eps)
    rep = _base("gradient_lq", v, p, gamma, eps)
    rep.lhs = {"grad_q0": norm_array(magnitude(G), v.grid, params.q0)}
    rep.rhs = {"operator_root": _op_root(ops, v.grid, gamma), "sqrt_eps": math.sqrt(eps)}
    return _finish(rep)


def check_l1(v: ScalarField, p: float, eps: float) -> EstimateReport:
    """Weighted gradient in L^1 against the L^1 norm of div((|Dv|^2+eps)^{(p-2)/2} Dv).

    The divergence equals the weighted operator with gamma = p - 2.
    """
    G, _, ops = _operator(v, p, p - 2.0, eps)
    g2 = np.einsum("...i,...i->...", G, G)
    rep = _base("l1", v, p, p - 2.0, eps)
    rep.lhs = {"weighted_grad_l1": norm_array((g2 + eps) ** (0.5 * (p - 2.0)) * np.sqrt(g2), v.grid, 1.0)}
    rep.rhs = {"divergence_l1": norm_array(np.abs(ops.weighted_operator), v.grid, 1.0)}
    return _finish(rep)


def default_ball(grid: Grid2D) -> Tuple[Tuple[float, float], float]:
    x0, x1, y0, y1 = grid.spec.bounding_box()
    return ((0.5 * (x0 + x1), 0.5 * (y0 + y1)), 0.25 * min(x1 - x0, y1 - y0))


def _center_clearance(spec: DomainSpec, cx: float, cy: float) -> float:
    if spec.shape == "rectangle":
        return min(cx, spec.a - cx, cy, spec.b - cy)
    return spec.R - math.hypot(cx, cy)


def check_holder(v: ScalarField, p: float, gamma: float, eps: float, table: Optional[ExponentTable] = None,
                 ball: Optional[Tuple[Tuple[float, float], float]] = None, local: bool = False,
                 seed: int = 0) -> EstimateReport:
    """Discrete C^{0,alpha} norm against the operator norm.

    Global form needs the supercritical case and uses alpha = 1 - n/q0.
    The local form measures the norm on B_{r/2}(y), the operator on B_r(y)
    and adds sup |v| over B_r(y); ``ball`` is ((y1, y2), r).
    """
    params = _admissible(p, gamma, eps)
    table = classify(params) if table is None else table
    if table.holder_alpha is None:
        raise ValueError("no Hoelder exponent in (0, 1) for these parameters")
    if not local and not table.supercritical:
        raise ValueError("global Hoelder check needs (1+gamma) 2* > n")
    alpha = table.holder_alpha
    _, _, ops = _operator(v, p, gamma, eps)
    grid = v.grid
    if not local:
        rep = _base("holder_global", v, p, gamma, eps)
        rep.lhs = {"holder": holder_norm(v, alpha, seed=seed)}
        rep.rhs = {"operator_root": _op_root(ops, grid, gamma), "sqrt_eps": math.sqrt(eps)}
        return _finish(rep)
    (cx, cy), r = default_ball(grid) if ball is None else ball
    X, Y = grid.XY
    dist = np.hypot(X - cx, Y - cy)
    if not r > 0 or _center_clearance(grid.spec, cx, cy) <= r:
        raise ValueError("ball must lie strictly inside the domain")
    rep = _base("holder_local", v, p, gamma, eps)
    rep.lhs = {"holder_half_ball": holder_norm(v, alpha, seed=seed, region=dist <= 0.5 * r)}
    rep.rhs = {
        "operator_root": _op_root(ops, grid, gamma, region=dist <= r),
        "sqrt_eps": math.sqrt(eps),
        "sup_ball": norm_array(np.abs(v.values), grid, math.inf, region=dist <= r),
    }
    return _finish(rep)


def check_solution_estimate(result: SolveResult, f: ScalarField, p: float, gamma: float) -> EstimateReport:
    """|Du|_{q0}^{gamma+1} + |D[(|Du|^2+eps)^{gamma/2} Du]|_2 against |f|_2 for a solved field."""
    if not result.converged:
        raise ValueError("solution estimate needs a converged solve")
    eps = result.eps_used
    _admissible(p, gamma, eps)
    nn = nonlinear_gradient_norms(result.u, p, gamma, eps)
    rep = _base("solution", result.u, p, gamma, eps)
    rep.lhs = {"grad_q0": nn.grad_q0_term, "sobolev": nn.sobolev_term}
    rep.rhs = {"f_l2": norm_array(np.abs(f.values), f.grid, 2.0)}
    return _finish(rep)


@dataclass(frozen=True)
class BarrierCheck:
    sup_u: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.sup_u <= self.bound


def barrier_check(u: ScalarField, f: ScalarField, gamma: float) -> BarrierCheck:
    """sup|u| against K d with K = 1 + (2 d sup|f| / (n-1))^{1/(gamma+1)}, n = 2."""
    d = u.grid.spec.diameter
    K = barrier_constant(2, d, float(np.max(np.abs(f.values))), gamma)
    return BarrierCheck(float(np.max(np.abs(u.values))), K * d)


def eps_stability(ratios: Sequence[float]) -> float:
    """max/median of the ratios; 1 for a single value, inf if any is non-finite."""
    r = np.asarray(list(ratios), dtype=float)
    if r.size == 0:
        return 1.0
    if not np.all(np.isfinite(r)):
        return math.inf
    med = float(np.median(r))
    if med == 0:
        return 1.0 if np.all(r == 0) else math.inf
    return float(np.max(r)) / med


def is_stable(ratios: Sequence[float], factor: float = STABILITY_FACTOR) -> bool:
    return eps_stability(ratios) <= factor


@dataclass
class StudyReport:
    passed: bool
    d: List[float]
    growth: List[float]
    reason: str = ""


def convergence_study(diag: ConvergenceDiagnostics, growth: float = 1.2, zero_tol: float = 0.0) -> StudyReport:
    """Cauchy check on the flux differences: d_{j+1} <= growth d_j and d_last <= d_first.

    Sequences whose entries are all at most ``zero_tol`` pass outright.
    """
    d = [float(x) for x in diag.d_flux]
    steps = [(b / a if a > 0 else (1.0 if b == 0 else math.inf)) for a, b in zip(d, d[1:])]
    if len(d) <= 1:
        return StudyReport(True, d, steps, "fewer than two differences")
    if max(d) <= zero_tol:
        return StudyReport(True, d, steps, "all differences vanish")
    bad = [k for k, (a, b) in enumerate(zip(d, d[1:])) if b > growth * a]
    if bad:
        return StudyReport(False, d, steps, f"growth above {growth} after stage(s) {bad}")
    if d[-1] > d[0]:
        return StudyReport(False, d, steps, "last difference exceeds the first")
    return StudyReport(True, d, steps)


# --- sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    p: float
    gamma: float
    eps: float
    beta: float = 0.0


@dataclass(frozen=True)
class SweepTask:
    estimate: str
    point: SweepPoint
    function: str
    domain: DomainSpec
    h: float


def _field_for(name: str, grid: Grid2D) -> ScalarField:
    return Manufactured(name).field(grid)


def _solve_data(name: str, grid: Grid2D, point: SweepPoint) -> ScalarField:
    if name in DATA_FUNCTIONS:
        return data_field(name, grid)
    return Manufactured(name).rhs(grid, point.p, point.gamma, point.eps)


def run_task(task: SweepTask, seed: int = 0, max_picard: int = 200) -> EstimateReport:
    """One sweep row; any failure becomes a row with pass = false."""
    pt = task.point
    label = task.domain.label
    try:
        grid = build_grid(task.domain, task.h)
        est = task.estimate
        if est == "solution":
            cfg = SolveConfig(ProblemParams(2, pt.p, pt.gamma, pt.eps), max_picard=max_picard)
            f = stage_data(cfg, _solve_data(task.function, grid, pt), pt.eps)
            res = picard_solve(cfg, f)
            rep = check_solution_estimate(res, f, pt.p, pt.gamma)
            bar = barrier_check(res.u, f, pt.gamma)
            if not bar.holds:
                rep.passed = False
                rep.note = f"barrier violated: sup|u|={bar.sup_u!r} > {bar.bound!r}"
        else:
            v = _field_for(task.function, grid)
            if est == "miranda_talenti":
                rep = check_miranda_talenti(v)
            elif est == "apriori":
                rep = check_apriori(v, pt.p, pt.gamma, pt.eps, pt.beta)
            elif est == "gradient_lq":
                rep = check_gradient_lq(v, pt.p, pt.gamma, pt.eps)
            elif est == "l1":
                rep = check_l1(v, pt.p, pt.eps)
            elif est == "holder_global":
                rep = check_holder(v, pt.p, pt.gamma, pt.eps, seed=seed)
            elif est == "holder_local":
                rep = check_holder(v, pt.p, pt.gamma, pt.eps, local=True, seed=seed)
            else:
                raise ValueError(f"unknown estimate {est!r}")
    except Exception as exc:  # recorded in the row, the sweep goes on
        rep = EstimateReport(task.estimate, 2, pt.p, pt.gamma, pt.eps, task.h, pt.beta,
                             note=f"{type(exc).__name__}: {exc}")
    # rows carry the requested parameters, not whatever a check normalized them to
    return replace(rep, p=pt.p, gamma=pt.gamma, eps=pt.eps, beta=pt.beta, h=task.h,
                   domain=label, function=task.function)


def sweep_tasks(points: Sequence[SweepPoint], functions: Sequence[str], domains: Sequence[DomainSpec],
                estimates: Sequence[str], hs: Sequence[float]) -> List[SweepTask]:
    """Cartesian product in a fixed order: estimate, point, function, domain, h."""
    return [
        SweepTask(e, pt, fn, dom, h)
        for e in estimates for pt in points for fn in functions for dom in domains for h in hs
    ]


def sweep(points: Sequence[SweepPoint], functions: Sequence[str], domains: Sequence[DomainSpec],
          estimates: Sequence[str] = ("miranda_talenti", "apriori", "gradient_lq"),
          hs: Sequence[float] = (1.0 / 64,), threads: int = 1, seed: int = 0) -> List[EstimateReport]:
    tasks = sweep_tasks(points, functions, domains, estimates, hs)
    if threads <= 1:
        return [run_task(t, seed) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: run_task(t, seed), tasks))


def reports_csv(reports: Iterable[EstimateReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def sweep_summary(reports: Sequence[EstimateReport]) -> dict:
    """Worst ratio per estimate, eps-stability per group and failed rows."""
    worst: Dict[str, float] = {}
    groups: Dict[str, List[float]] = {}
    failures = []
    for k, r in enumerate(reports):
        if not r.passed:
            failures.append({"row": k + 1, "estimate_id": r.estimate_id, "note": r.note})
        if math.isfinite(r.ratio):
            worst[r.estimate_id] = max(worst.get(r.estimate_id, -math.inf), r.ratio)
        key = f"{r.estimate_id}|p={r.p!r}|gamma={r.gamma!r}|beta={r.beta!r}|h={r.h!r}|{r.domain}|{r.function}"
        groups.setdefault(key, []).append(r.ratio)
    stability = {k: eps_stability(v) for k, v in groups.items() if len(v) > 1}
    unstable = sorted(k for k, s in stability.items() if not s <= STABILITY_FACTOR)
    return {
        "rows": len(reports),
        "failed_rows": failures,
        "worst_ratio": {k: worst[k] for k in sorted(worst)},
        "eps_stability": {k: (stability[k] if math.isfinite(stability[k]) else None) for k in sorted(stability)},
        "unstable_groups": unstable,
        "passed": not failures and not unstable,
    }


def summary_json(reports: Sequence[EstimateReport]) -> str:
    return json.dumps(sweep_summary(reports), indent=2, sort_keys=True) + "\n"
