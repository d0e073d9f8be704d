"""Exponent bookkeeping for the triplet (n, p, gamma).

Everything here is a pure function of a few reals. The regularized problem

    -(|Du|^2 + eps)^(gamma/2) * Delta^N_{p,eps} u + lambda * u = rhs

is only covered by the global estimates when ``gamma`` exceeds the
dimension-dependent threshold returned by :func:`gamma_threshold`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

__all__ = [
    "ProblemParams",
    "ExponentTable",
    "gamma_threshold",
    "two_star",
    "default_two_star_fallback",
    "classify",
    "barrier_constant",
    "is_admissible",
]

MAX_K0 = 64


def gamma_threshold(n: int, p: float) -> float:
    """Smallest admissible gamma: -1 + (p-1)(n-2)/(2(n-1))."""
    if int(n) != n or n < 2:
        raise ValueError(f"dimension n must be an integer >= 2, got {n!r}")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p!r}")
    return -1.0 + (p - 1.0) * (n - 2) / (2.0 * (n - 1))


def two_star(n: int, fallback: Optional[float] = None) -> float:
    """Sobolev conjugate 2n/(n-2); ``fallback`` stands in for it when n == 2."""
    if int(n) != n or n < 2:
        raise ValueError(f"dimension n must be an integer >= 2, got {n!r}")
    if n >= 3:
        return 2.0 * n / (n - 2)
    if fallback is None or not fallback > 2:
        raise ValueError("n == 2 needs a finite fallback exponent > 2")
    return float(fallback)


def default_two_star_fallback(p: float, gamma: float) -> float:
    # large enough for 2(p-2-gamma) <= (gamma+1) 2*, q0 > gamma + 2 and q0 > 2
    return max(
        12.0,
        2.0 * (p - 2.0 - gamma) / (1.0 + gamma) + 1.0,
        2.0 / (1.0 + gamma) + 1.0,
    )


@dataclass(frozen=True)
class ProblemParams:
    n: int
    p: float
    gamma: float
    eps: float = 1e-2
    lam: float = 0.0
    two_star_fallback: Optional[float] = None

    def __post_init__(self):
        errors = []
        if int(self.n) != self.n or self.n < 2:
            errors.append("n must be an integer >= 2")
        if not self.p > 1:
            errors.append("p must exceed 1")
        if not self.gamma > -1:
            errors.append("gamma must exceed -1")
        if not 0 < self.eps <= 1:
            errors.append("eps must lie in (0, 1]")
        if not 0 <= self.lam < 1:
            errors.append("lambda must lie in [0, 1)")
        if self.two_star_fallback is not None and not self.two_star_fallback > 2:
            errors.append("two_star_fallback must exceed 2")
        if errors:
            raise ValueError("; ".join(errors))
        object.__setattr__(self, "n", int(self.n))

    @property
    def fallback(self) -> float:
        if self.two_star_fallback is not None:
            return float(self.two_star_fallback)
        return default_two_star_fallback(self.p, self.gamma)

    @property
    def two_star(self) -> float:
        return two_star(self.n, self.fallback)

    @property
    def q0(self) -> float:
        return (1.0 + self.gamma) * self.two_star

    @property
    def admissible(self) -> bool:
        return self.gamma > gamma_threshold(self.n, self.p)


@dataclass(frozen=True)
class ExponentTable:
    gamma_np: float
    two_star: float
    q0: float
    admissible: bool
    gamma_gt_minus4over: bool
    gamma_le_pminus2: bool
    supercritical: bool
    holder_alpha: Optional[float]
    k0: int
    moser_q: tuple = field(default_factory=tuple)


def classify(params: ProblemParams, k0: int = 0) -> ExponentTable:
    """Fill in every derived exponent for ``params``.

    ``k0`` is a starting guess for the Moser iteration depth; it is raised
    to the smallest value with (2*)^(k0+1) (gamma+1) > n.
    """
    n, p, gamma = params.n, params.p, params.gamma
    if k0 < 0:
        raise ValueError("k0 must be >= 0")
    ts = params.two_star
    q0 = (1.0 + gamma) * ts
    gamma_np = gamma_threshold(n, p)

    gt = gamma > -4.0 / (n + 2)
    # for n >= 3 the two conditions are algebraically equivalent; with n == 2
    # a hand-picked fallback can break the equivalence
    if n == 2 and not q0 > gamma + 2.0:
        raise ValueError(
            f"two_star_fallback={ts} too small for gamma={gamma}: "
            f"need 2* > 1 + 1/(1+gamma) = {1 + 1 / (1 + gamma):.6g}"
        )

    while ts ** (k0 + 1) * (1.0 + gamma) <= n:
        if k0 >= MAX_K0:
            raise ValueError("no Moser depth k0 <= 64 reaches the supercritical range")
        k0 += 1

    supercritical = q0 > n
    if supercritical:
        alpha = 1.0 - n / q0
    else:
        alpha = 1.0 - n / (ts ** (k0 + 1) * (1.0 + gamma))
    if not 0 < alpha < 1:
        alpha = None

    moser = tuple((gamma + 1.0) * ts ** k for k in range(k0 + 2))
    return ExponentTable(
        gamma_np=gamma_np,
        two_star=ts,
        q0=q0,
        admissible=gamma > gamma_np,
        gamma_gt_minus4over=gt,
        gamma_le_pminus2=gamma <= p - 2.0,
        supercritical=supercritical,
        holder_alpha=alpha,
        k0=k0,
        moser_q=moser,
    )


def barrier_constant(n: int, diameter: float, f_sup: float, gamma: float) -> float:
    """K = 1 + (2 d / (n-1) * sup|f|)^(1/(gamma+1)); solutions obey |u| <= K d."""
    return 1.0 + (2.0 * diameter / (n - 1) * f_sup) ** (1.0 / (gamma + 1.0))


def is_admissible(n: int, p: float, gamma: float) -> bool:
    return gamma > gamma_threshold(n, p)

