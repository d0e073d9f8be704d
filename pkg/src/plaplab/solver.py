"""Frozen-coefficient (Picard) solver for the damped regularized problem

    -(|Du|^2 + eps)^(gamma/2) Delta^N_{p,eps} u + lam u = lam g + f   in the domain,
    u = 0                                                       on the boundary,

discretized in nondivergence form on a :class:`~plaplab.grid.Grid2D`.
Interior nodes use the 9-point stencil of tr(A D^2 u) (centered second
differences plus the 4-point cross difference); in-domain boundary nodes
carry identity rows.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .grid import Grid2D, ScalarField, derivative_arrays, gradient_array, mollify, norm_array
from .params import ProblemParams
from .pointcalc import PointState, coefficient_matrix, operator_values

DEFAULT_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)
GRADIENT_FLOOR = 1e-14
DAMPING_FLOOR = 1.0 / 16.0
LINEAR_METHODS = ("direct", "bicgstab", "gmres")
MOLLIFY_MODES = ("tied", "fixed", "none")


class SingularSystemError(RuntimeError):
    """The linear solve did not reach the requested relative residual."""


@dataclass(frozen=True)
class SolveConfig:
    params: ProblemParams
    max_picard: int = 200
    picard_tol: float = 1e-9
    damping: float = 1.0
    linear_tol: float = 1e-10
    eps_schedule: Tuple[float, ...] = DEFAULT_SCHEDULE
    linear_method: str = "direct"
    # "tied": eps_moll = max(2h, sqrt(eps)); "fixed": eps_moll = mollify_radius; "none": raw data
    mollify: str = "tied"
    mollify_radius: float = 0.0

    def __post_init__(self):
        errors = []
        if self.max_picard < 1:
            errors.append("max_picard must be >= 1")
        if not self.picard_tol > 0:
            errors.append("picard_tol must be positive")
        if not 0 < self.damping <= 1:
            errors.append("damping must lie in (0, 1]")
        if not self.linear_tol > 0:
            errors.append("linear_tol must be positive")
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched:
            errors.append("eps_schedule must be nonempty")
        if any(not 0 < e <= 1 for e in sched):
            errors.append("eps_schedule entries must lie in (0, 1]")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            errors.append("eps_schedule must be strictly decreasing")
        if self.linear_method not in LINEAR_METHODS:
            errors.append(f"linear_method must be one of {LINEAR_METHODS}")
        if self.mollify not in MOLLIFY_MODES:
            errors.append(f"mollify must be one of {MOLLIFY_MODES}")
        if self.mollify_radius < 0:
            errors.append("mollify_radius must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "eps_schedule", sched)

    def for_eps(self, eps: float) -> "SolveConfig":
        return replace(self, params=replace(self.params, eps=eps))

    def moll_radius(self, eps: float, h: float) -> float:
        if self.mollify == "tied":
            return max(2.0 * h, math.sqrt(eps))
        if self.mollify == "fixed":
            return self.mollify_radius
        return 0.0


@dataclass
class SolveResult:
    u: ScalarField
    iterations: int
    residual_history: List[float]
    converged: bool
    eps_used: float
    final_update: float = math.inf

    def diagnostics(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "converged": bool(self.converged),
            "eps": float(self.eps_used),
            "final_update": float(self.final_update),
        }

    def diagnostics_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2, sort_keys=True) + "\n"


@dataclass
class ConvergenceDiagnostics:
    eps: List[float] = field(default_factory=list)
    d_flux: List[float] = field(default_factory=list)  # |V_j - V_{j+1}|_2, V = (|Du|^2+eps)^{gamma/2} Du
    d_grad: List[float] = field(default_factory=list)  # |Du_j - Du_{j+1}|_{gamma+2}
    converged: List[bool] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "eps": [float(e) for e in self.eps],
            "d_flux": [float(d) for d in self.d_flux],
            "d_grad": [float(d) for d in self.d_grad],
            "converged": [bool(c) for c in self.converged],
        }


@dataclass(frozen=True)
class LinearSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray
    index: np.ndarray  # (nx, ny) -> unknown number, -1 outside
    grid: Grid2D

    def to_field(self, x: np.ndarray) -> ScalarField:
        v = np.zeros(self.grid.shape)
        sel = self.index >= 0
        v[sel] = x[self.index[sel]]
        return ScalarField(self.grid, v)


def frozen_coefficients(w: ScalarField, params: ProblemParams) -> np.ndarray:
    """A(Dw) at every node, with the exact limit eps^{gamma/2} I where Dw vanishes."""
    G, _ = derivative_arrays(w.values, w.grid)
    A = coefficient_matrix(PointState(G, np.zeros(G.shape + (2,)), params.eps), params.p, params.gamma)
    flat = np.einsum("...i,...i->...", G, G) < GRADIENT_FLOOR**2
    A[flat] = params.eps ** (0.5 * params.gamma) * np.eye(2)
    return A


def assemble_frozen(w: ScalarField, cfg: SolveConfig, rhs: ScalarField) -> LinearSystem:
    """Sparse system for -tr(A(Dw) D^2 u) + lam u = rhs with zero Dirichlet rows."""
    grid = w.grid
    if rhs.grid is not grid:
        raise ValueError("w and rhs must live on the same grid")
    params = cfg.params
    inside, interior = grid.inside, grid.interior
    index = np.full(grid.shape, -1, dtype=np.int64)
    index[inside] = np.arange(int(inside.sum()))
    N = int(inside.sum())

    A = frozen_coefficients(w, params)
    h2 = grid.h**2
    I, J = np.nonzero(interior)
    a11, a22, a12 = A[I, J, 0, 0], A[I, J, 1, 1], A[I, J, 0, 1]
    row = index[I, J]
    stencil = [
        ((0, 0), 2.0 * (a11 + a22) / h2 + params.lam),
        ((1, 0), -a11 / h2), ((-1, 0), -a11 / h2),
        ((0, 1), -a22 / h2), ((0, -1), -a22 / h2),
        ((1, 1), -a12 / (2 * h2)), ((-1, -1), -a12 / (2 * h2)),
        ((1, -1), a12 / (2 * h2)), ((-1, 1), a12 / (2 * h2)),
    ]
    rows, cols, vals = [], [], []
    for (di, dj), v in stencil:
        rows.append(row)
        cols.append(index[I + di, J + dj])
        vals.append(v)
    bnd = index[grid.boundary]
    rows.append(bnd)
    cols.append(bnd)
    vals.append(np.ones(bnd.size))
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    keep = vals != 0.0
    M = sps.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(N, N))
    b = np.zeros(N)
    b[row] = rhs.values[I, J]
    return LinearSystem(M, b, index, grid)


def solve_linear(system: LinearSystem, cfg: SolveConfig, x0: Optional[np.ndarray] = None) -> np.ndarray:
    M, b = system.matrix, system.rhs
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    if cfg.linear_method == "direct":
        x = spla.splu(M.tocsc()).solve(b)
    else:
        d = M.diagonal()
        if np.any(d == 0):
            raise SingularSystemError("zero diagonal entry")
        prec = spla.LinearOperator(M.shape, matvec=lambda r: r / d)
        method = spla.bicgstab if cfg.linear_method == "bicgstab" else spla.gmres
        x, _ = method(M, b, x0=x0, rtol=cfg.linear_tol, atol=0.0, maxiter=10 * b.size, M=prec)
    rel = np.linalg.norm(M @ x - b) / bnorm
    if not np.all(np.isfinite(x)) or rel > cfg.linear_tol:
        raise SingularSystemError(f"linear solve stalled at relative residual {rel:.3g} > {cfg.linear_tol:g}")
    return x


def _rhs(f: ScalarField, lam: float, g_eps: Optional[ScalarField]) -> ScalarField:
    if g_eps is None or lam == 0.0:
        return f
    return f + lam * g_eps


def residual(u: ScalarField, cfg: SolveConfig, f: ScalarField, eps: Optional[float] = None,
             g_eps: Optional[ScalarField] = None) -> ScalarField:
    """Nodewise -(|Du|^2+eps)^{gamma/2} Delta^N_{p,eps} u + lam u - rhs; zero off the interior."""
    params = cfg.params if eps is None else replace(cfg.params, eps=eps)
    G, H = derivative_arrays(u.values, u.grid)
    op = operator_values(PointState(G, H, params.eps), params.p, params.gamma).weighted_operator
    r = -op + params.lam * u.values - _rhs(f, params.lam, g_eps).values
    return ScalarField(u.grid, np.where(u.grid.interior, r, 0.0))


def _l2(v: ScalarField) -> float:
    return norm_array(np.abs(v.values), v.grid, 2.0)


def picard_solve(cfg: SolveConfig, f: ScalarField, eps: Optional[float] = None,
                 g_eps: Optional[ScalarField] = None, u0: Optional[ScalarField] = None) -> SolveResult:
    """Damped fixed-point iteration u <- solve(assemble_frozen(u)).

    A step whose residual exceeds the previous one is retried with half
    the damping, down to 1/16; the damping recovers by doubling after
    accepted steps.  Non-convergence is reported, not raised.
    """
    if not np.all(np.isfinite(f.values)):
        raise ValueError("f must be finite")
    scfg = cfg if eps is None else cfg.for_eps(eps)
    grid = f.grid
    rhs = _rhs(f, scfg.params.lam, g_eps)
    u = ScalarField(grid, np.zeros(grid.shape)) if u0 is None else u0.with_dirichlet()
    res = _l2(residual(u, scfg, f, g_eps=g_eps))
    history = [res]
    theta = scfg.damping
    update = math.inf
    x = None
    for it in range(1, scfg.max_picard + 1):
        system = assemble_frozen(u, scfg, rhs)
        x = solve_linear(system, scfg, x)
        target = system.to_field(x)
        step = target.values - u.values
        while True:
            cand = ScalarField(grid, u.values + theta * step)
            cres = _l2(residual(cand, scfg, f, g_eps=g_eps))
            if cres <= res or theta <= DAMPING_FLOOR:
                break
            theta = max(theta / 2.0, DAMPING_FLOOR)
        update = theta * float(np.max(np.abs(step))) / (1.0 + float(np.max(np.abs(u.values))))
        u, res = cand, cres
        history.append(res)
        theta = min(2.0 * theta, scfg.damping)
        if update <= scfg.picard_tol:
            return SolveResult(u, it, history, True, scfg.params.eps, update)
    return SolveResult(u, scfg.max_picard, history, False, scfg.params.eps, update)


def flux(u: ScalarField, eps: float, gamma: float) -> np.ndarray:
    """(|Du|^2 + eps)^{gamma/2} Du as an (nx, ny, 2) array."""
    G = gradient_array(u.values, u.grid)
    g2 = np.einsum("...i,...i->...", G, G)
    return (g2 + eps)[..., None] ** (0.5 * gamma) * G


def stage_data(cfg: SolveConfig, f: ScalarField, eps: float) -> ScalarField:
    return mollify(f, cfg.moll_radius(eps, f.grid.h))


def continuation_solve(cfg: SolveConfig, f: ScalarField) -> Tuple[List[SolveResult], ConvergenceDiagnostics]:
    """Solve down ``cfg.eps_schedule`` with warm starts.

    With lam > 0 each stage uses the mollified previous-stage solution as
    g; the first stage uses g = 0.  A stage that fails to converge is
    recorded and the next stage starts from its last iterate.
    """
    grid = f.grid
    results: List[SolveResult] = []
    diag = ConvergenceDiagnostics()
    gamma = cfg.params.gamma
    u_prev: Optional[ScalarField] = None
    for eps in cfg.eps_schedule:
        data = stage_data(cfg, f, eps)
        g_eps = None
        if cfg.params.lam > 0 and u_prev is not None:
            g_eps = mollify(u_prev, cfg.moll_radius(eps, grid.h))
        res = picard_solve(cfg, data, eps=eps, g_eps=g_eps, u0=u_prev)
        results.append(res)
        diag.eps.append(eps)
        diag.converged.append(res.converged)
        u_prev = res.u
    for a, b in zip(results, results[1:]):
        Va, Vb = flux(a.u, a.eps_used, gamma), flux(b.u, b.eps_used, gamma)
        diag.d_flux.append(norm_array(np.linalg.norm(Va - Vb, axis=-1), grid, 2.0))
        Ga, Gb = gradient_array(a.u.values, grid), gradient_array(b.u.values, grid)
        diag.d_grad.append(norm_array(np.linalg.norm(Ga - Gb, axis=-1), grid, gamma + 2.0))
    return results, diag

