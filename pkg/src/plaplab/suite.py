"""Randomized verification of the pointwise inequalities.

Samples are drawn over several decades of |g|, |H| and eps, with a share
of structured Hessians (rank one along g, or orthogonal to g) where the
inequalities are close to equality.  Each gap is divided by a natural
scale so one tolerance works across magnitudes.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .pointcalc import (
    PointState,
    fundamental_gap,
    hessian_bound_gap,
    monotonicity_gap,
    structural_gap,
    t_gap,
)

INEQUALITIES = (
    "fundamental",
    "t_gap",
    "hessian_bound",
    "mono_reg_neg",
    "mono_unreg_neg",
    "mono_reg_pos",
    "mono_unreg_pos",
    "structural",
)
DIMENSIONS = (2, 3, 5)
TOLERANCE = 1e-9
CHUNK = 50_000


@dataclass
class SuiteResult:
    name: str
    n: int
    samples: int
    worst_scaled_gap: float
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _loguniform(rng, lo, hi, size):
    return 10.0 ** rng.uniform(lo, hi, size)


def sample_states(rng: np.random.Generator, n: int, size: int) -> PointState:
    """Random (g, H, eps) triples; about a quarter of the Hessians are structured."""
    direction = rng.standard_normal((size, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    g = direction * _loguniform(rng, -3, 3, size)[:, None]

    M = rng.standard_normal((size, n, n))
    H = 0.5 * (M + np.swapaxes(M, 1, 2))
    kind = rng.integers(0, 8, size)
    # rank one along g
    rank1 = kind == 0
    H[rank1] = direction[rank1, :, None] * direction[rank1, None, :] * rng.standard_normal(rank1.sum())[:, None, None]
    # H maps g into its orthogonal complement (Hg _|_ g)
    perp = kind == 1
    if perp.any():
        P = np.eye(n) - direction[perp, :, None] * direction[perp, None, :]
        H[perp] = P @ H[perp] @ P
        w = rng.standard_normal((perp.sum(), n))
        w = np.einsum("kij,kj->ki", P, w)
        cross = direction[perp, :, None] * w[:, None, :]
        H[perp] = H[perp] + cross + np.swapaxes(cross, 1, 2)
    H *= _loguniform(rng, -3, 3, size)[:, None, None]
    eps = _loguniform(rng, -8, 0, size)
    return PointState(g, H, eps)


def _admissible_gamma(rng, n, p, span=5.0):
    lo = np.maximum(-1.0 + (p - 1.0) * (n - 2) / (2.0 * (n - 1)), -1.0)
    # tiny offset keeps the strict inequality after rounding
    return lo + 1e-9 + (span - 1e-9) * rng.random(p.shape) ** 2


def _scaled(gap, scale):
    return gap / np.maximum(scale, np.finfo(float).tiny)


def _evaluate(name: str, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    if name.startswith("mono"):
        a = rng.standard_normal((size, n)) * _loguniform(rng, -3, 1, size)[:, None]
        b = rng.standard_normal((size, n)) * _loguniform(rng, -3, 1, size)[:, None]
        near = rng.random(size) < 0.25
        b[near] = a[near] + 1e-3 * rng.standard_normal((near.sum(), n))
        eps = _loguniform(rng, -8, 0, size)
        variant = name[5:].replace("_", "-")
        if variant.endswith("neg"):
            gamma = -1.0 + 1e-6 + (1.0 - 2e-6) * rng.random(size)
        else:
            gamma = 4.0 * rng.random(size)
        gap = monotonicity_gap(a, b, gamma, eps, variant)
        d = a - b
        na = np.sqrt(np.einsum("ki,ki->k", a, a) + (eps if variant.startswith("reg") else 0.0))
        nb = np.sqrt(np.einsum("ki,ki->k", b, b) + (eps if variant.startswith("reg") else 0.0))
        nd = np.linalg.norm(d, axis=1)
        scale = (np.where(na > 0, na, 1.0) ** (gamma + 1) + np.where(nb > 0, nb, 1.0) ** (gamma + 1)) * nd
        return _scaled(gap, scale)

    s = sample_states(rng, n, size)
    scale = np.einsum("kij,kij->k", s.H, s.H)
    p = rng.uniform(1.1, 10.0, size)
    if name == "fundamental":
        return _scaled(fundamental_gap(s), scale)
    if name == "t_gap":
        return _scaled(t_gap(s, p, _admissible_gamma(rng, n, p)), scale)
    if name == "hessian_bound":
        gamma = -1.0 + 1e-9 + 5.0 * rng.random(size)
        return _scaled(hessian_bound_gap(s, gamma), scale * (1.0 + np.abs(gamma)) ** 2)
    if name == "structural":
        gamma = _admissible_gamma(rng, n, p)
        return _scaled(structural_gap(s, p, gamma, eta=1.0), scale * (1.0 + np.abs(gamma) + p) ** 2)
    raise ValueError(f"unknown inequality {name!r}")


def run_inequality(name: str, n: int, samples: int, seed: int) -> SuiteResult:
    rng = np.random.default_rng([seed, DIMENSIONS.index(n) if n in DIMENSIONS else n, INEQUALITIES.index(name)])
    worst = np.inf
    bad = 0
    done = 0
    while done < samples:
        size = min(CHUNK, samples - done)
        scaled = _evaluate(name, n, rng, size)
        if not np.all(np.isfinite(scaled)):
            raise FloatingPointError(f"{name}: non-finite gap for n={n}")
        worst = min(worst, float(scaled.min()))
        bad += int(np.count_nonzero(scaled < -TOLERANCE))
        done += size
    return SuiteResult(name, n, samples, worst, bad)


def run_suite(samples: int = 1_000_000, seed: int = 42,
              names: Sequence[str] = INEQUALITIES, dims: Sequence[int] = DIMENSIONS) -> List[SuiteResult]:
    """``samples`` per inequality, split as evenly as possible across ``dims``."""
    out = []
    for name in names:
        per = [samples // len(dims) + (1 if i < samples % len(dims) else 0) for i in range(len(dims))]
        for n, k in zip(dims, per):
            out.append(run_inequality(name, n, k, seed))
    return out


def two_d_equality(samples: int = 100_000, seed: int = 42) -> float:
    """max |fundamental gap| / |H|^2 over random 2x2 samples; zero up to rounding."""
    rng = np.random.default_rng([seed, 2])
    s = sample_states(rng, 2, samples)
    scale = np.einsum("kij,kij->k", s.H, s.H)
    return float(np.max(np.abs(fundamental_gap(s)) / scale))


def results_csv(results: Iterable[SuiteResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["inequality", "n", "samples", "worst_scaled_gap", "violations", "pass"])
    for r in results:
        w.writerow([r.name, r.n, r.samples, repr(r.worst_scaled_gap), r.violations, str(r.passed).lower()])
    return buf.getvalue()


def summary(results: Iterable[SuiteResult]) -> Dict[str, float]:
    worst: Dict[str, float] = {}
    for r in results:
        worst[r.name] = min(worst.get(r.name, np.inf), r.worst_scaled_gap)
    return worst
