"""Pointwise calculus of the regularized operators.

Every function takes a gradient ``g`` of shape ``(..., n)`` and a Hessian
``H`` of shape ``(..., n, n)`` and works elementwise over the leading batch
dimensions, so the same code serves single points, whole grids and the
randomized inequality suites.

Notation used in the code::

    A    = <Hg, g> / |g|^2            (normalized infinity-Laplacian)
    Aeps = <Hg, g> / (|g|^2 + eps)    (its eps-regularization)
    Lp   = tr H + (p - 2) Aeps        (regularized normalized p-Laplacian)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

GRAD_FLOOR = 1e-10

ArrayLike = Union[float, np.ndarray]


class DegenerateGradientError(ValueError):
    """Raised when an inequality that lives on {Dv != 0} sees a zero gradient."""


@dataclass(frozen=True)
class PointState:
    g: np.ndarray
    H: np.ndarray
    eps: ArrayLike

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        H = np.asarray(self.H, dtype=float)
        if H.shape[-2:] != (g.shape[-1], g.shape[-1]):
            raise ValueError(f"Hessian shape {H.shape} does not match gradient {g.shape}")
        eps = np.asarray(self.eps, dtype=float)
        if np.any(eps <= 0):
            raise ValueError("eps must be positive")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", 0.5 * (H + np.swapaxes(H, -1, -2)))
        object.__setattr__(self, "eps", eps if eps.ndim else float(eps))

    @property
    def n(self) -> int:
        return self.g.shape[-1]


class OperatorValues(NamedTuple):
    laplacian: np.ndarray
    inf_laplacian: np.ndarray
    normalized_inf_eps: np.ndarray
    normalized_p_eps: np.ndarray
    weighted_operator: np.ndarray


def _sq(g):
    return np.einsum("...i,...i->...", g, g)


def _Hg(H, g):
    return np.einsum("...ij,...j->...i", H, g)


def _frob2(H):
    return np.einsum("...ij,...ij->...", H, H)


def _trace(H):
    return np.einsum("...ii->...", H)


def _require_gradient(g2):
    if np.any(g2 <= GRAD_FLOOR**2):
        raise DegenerateGradientError(
            f"|g| must exceed {GRAD_FLOOR:g} on every sample (min |g| = {np.sqrt(np.min(g2)):.3g})"
        )


def operator_values(s: PointState, p: float, gamma: float) -> OperatorValues:
    g2 = _sq(s.g)
    lap = _trace(s.H)
    inf_lap = np.einsum("...i,...i->...", _Hg(s.H, s.g), s.g)
    weight = (g2 + s.eps) ** (0.5 * gamma)
    a_eps = inf_lap / (g2 + s.eps)
    lp = lap + (p - 2.0) * a_eps
    return OperatorValues(lap, inf_lap, a_eps, lp, weight * lp)


def coefficient_matrix(s: PointState, p: float, gamma: float) -> np.ndarray:
    """A(g) with tr(A H) equal to the weighted operator for every H."""
    g2 = _sq(s.g)[..., None, None]
    n = s.n
    outer = s.g[..., :, None] * s.g[..., None, :]
    eye = np.eye(n)
    eps = np.asarray(s.eps)[..., None, None]
    p = np.asarray(p, dtype=float)[..., None, None]
    gamma = np.asarray(gamma, dtype=float)[..., None, None]
    return (g2 + eps) ** (0.5 * gamma) * (eye + (p - 2.0) * outer / (g2 + eps))


def fundamental_gap(s: PointState) -> np.ndarray:
    """|H|^2 - 2|H e|^2 + <He,e>^2 - (tr H - <He,e>)^2 / (n-1), e = g/|g|."""
    g2 = _sq(s.g)
    _require_gradient(g2)
    e = s.g / np.sqrt(g2)[..., None]
    He = _Hg(s.H, e)
    a = np.einsum("...i,...i->...", He, e)
    lhs = _frob2(s.H) - 2.0 * _sq(He) + a**2
    rhs = (_trace(s.H) - a) ** 2 / (s.n - 1)
    return lhs - rhs


def t_gap(s: PointState, p: float, gamma: float) -> np.ndarray:
    """The remainder T collecting every eps-correction; nonnegative for p > 1, gamma >= -1."""
    n = s.n
    p, gamma = np.asarray(p, dtype=float), np.asarray(gamma, dtype=float)
    if np.any(gamma <= -1.0 + (p - 1.0) * (n - 2) / (2.0 * (n - 1))):
        raise ValueError(f"gamma is not admissible for n={n}")
    g2 = _sq(s.g)
    _require_gradient(g2)
    Hg = _Hg(s.H, s.g)
    hg2 = _sq(Hg)
    q = np.einsum("...i,...i->...", Hg, s.g)
    a = q / g2
    a_eps = q / (g2 + s.eps)
    return (
        n / (n - 1.0) * (a**2 - a_eps**2)
        + 2.0 * gamma * (hg2 / (g2 + s.eps) - a_eps**2)
        + 2.0 * (hg2 / g2 - a**2)
        + 2.0 * (p - 2.0) / (n - 1.0) * a_eps**2 * s.eps / g2
    )


def hessian_bound_gap(s: PointState, gamma: float) -> np.ndarray:
    """|H|^2 + 2 gamma |Hg|^2/(|g|^2+eps) + gamma^2 Aeps^2 - min(1, (gamma+1)^2) |H|^2."""
    g2 = _sq(s.g)
    Hg = _Hg(s.H, s.g)
    a_eps = np.einsum("...i,...i->...", Hg, s.g) / (g2 + s.eps)
    h2 = _frob2(s.H)
    lhs = h2 + 2.0 * gamma * _sq(Hg) / (g2 + s.eps) + gamma**2 * a_eps**2
    return lhs - np.minimum(1.0, (gamma + 1.0) ** 2) * h2


MONOTONICITY_VARIANTS = ("reg-neg", "unreg-neg", "reg-pos", "unreg-pos")


def monotonicity_gap(a, b, gamma: float, eps: ArrayLike = 0.0, variant: str = "reg-pos") -> np.ndarray:
    """Lower bound on the monotonicity of a -> (|a|^2+eps)^(gamma/2) a.

    ``reg-*`` variants use the given eps in (0, 1]; ``unreg-*`` variants
    ignore it and set eps = 0.  ``*-neg`` needs -1 < gamma < 0 and
    ``*-pos`` needs gamma >= 0.
    """
    if variant not in MONOTONICITY_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    neg = variant.endswith("neg")
    gamma = np.asarray(gamma, dtype=float)
    if neg and not np.all((gamma > -1) & (gamma < 0)):
        raise ValueError(f"variant {variant} needs -1 < gamma < 0")
    if not neg and np.any(gamma < 0):
        raise ValueError(f"variant {variant} needs gamma >= 0")
    reg = variant.startswith("reg")
    eps = np.asarray(eps, dtype=float)
    if reg and (np.any(eps <= 0) or np.any(eps > 1)):
        raise ValueError("regularized variants need eps in (0, 1]")
    if not reg:
        eps = np.zeros_like(eps)

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a2, b2 = _sq(a), _sq(b)
    d2 = _sq(a - b)
    lhs = np.einsum("...i,...i->...", _field(a, a2, eps, gamma) - _field(b, b2, eps, gamma), a - b)
    if neg:
        base = a2 + b2 + (eps if reg else 1.0)
        rhs = (gamma + 1.0) * 6.0 ** (0.5 * gamma) * base ** (0.5 * gamma) * d2
    else:
        # base == 0 forces a == b == 0, where d2 vanishes anyway
        base = a2 + b2 + eps
        rhs = 2.0 ** (-2.0 - gamma) * _safe_pow(base, 0.5 * gamma) * d2
    return lhs - rhs


def _safe_pow(base, expo):
    return np.where(base > 0, base, 1.0) ** expo


def _field(a, a2, eps, gamma):
    # |a|^gamma a -> 0 as a -> 0 for gamma > -1, so base == 0 may map to any weight
    return _safe_pow(a2 + eps, 0.5 * gamma)[..., None] * a


def default_c_p(p, n: int):
    return (1.0 + np.abs(p - 2.0)) ** 2 * (n - 1) + 1.0


def structural_gap(s: PointState, p: float, gamma: float, eta: float = 1.0,
                   c_p: Optional[float] = None) -> np.ndarray:
    """LHS - RHS of the structural inequality bounding the weighted Hessian form.

    The lower bound is 2(p-1)[gamma+1-(p-1)(n-2)/(2(n-1))] Aeps^2
    - (c_p/eta) Lp^2 - eta |H|^2; ``c_p`` defaults to :func:`default_c_p`.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    n = s.n
    if c_p is None:
        c_p = default_c_p(np.asarray(p, dtype=float), n)
    g2 = _sq(s.g)
    _require_gradient(g2)
    Hg = _Hg(s.H, s.g)
    a_eps = np.einsum("...i,...i->...", Hg, s.g) / (g2 + s.eps)
    h2 = _frob2(s.H)
    lp = _trace(s.H) + (p - 2.0) * a_eps
    lhs = h2 + 2.0 * gamma * _sq(Hg) / (g2 + s.eps) + (gamma**2 - (gamma - p + 2.0) ** 2) * a_eps**2
    margin = gamma + 1.0 - (p - 1.0) * (n - 2) / (2.0 * (n - 1))
    rhs = 2.0 * (p - 1.0) * margin * a_eps**2 - c_p / eta * lp**2 - eta * h2
    return lhs - rhs
