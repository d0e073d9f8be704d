"""Radial family with L^2-bounded weighted operator and unbounded maximum.

For a cutoff phi (0 on [0,1], 1 on [2,inf)) and 0 < eps < 1/2 the profile

    v(r) = int_r^1 phi(s/eps) / s ds

is constant on [0, eps] and equals -ln r on [2 eps, 1].  Its weighted
operator is

    g(r) = r^-gamma [ (p-1)/(eps r) phi^gamma phi'(r/eps) + (n-2) phi^(gamma+1)(r/eps) / r^2 ]

for r > eps and 0 below.  Everything reduces to 1D quadrature.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence

import numpy as np
from scipy import integrate
from scipy.special import expit
from scipy.special import gamma as gamma_fn

CUTOFFS = ("quintic", "smooth")
DEFAULT_EPS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
# phi^gamma phi' extends continuously by 0 at s = 1 for the quintic only when 3 gamma + 2 > 0
QUINTIC_GAMMA_MIN = -2.0 / 3.0


def resolve_cutoff(cutoff: str, gamma: float) -> str:
    """"auto" picks the quintic unless gamma forces the flat (C^infinity) cutoff."""
    if cutoff == "auto":
        return "quintic" if gamma > QUINTIC_GAMMA_MIN else "smooth"
    if cutoff not in CUTOFFS:
        raise ValueError(f"cutoff must be 'auto' or one of {CUTOFFS}")
    if cutoff == "quintic" and gamma <= QUINTIC_GAMMA_MIN:
        raise ValueError("quintic cutoff makes phi^gamma phi' unbounded for gamma <= -2/3; use 'smooth'")
    return cutoff


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("phi is defined for s >= 0")
    return s


def _band(s):
    return np.clip(s - 1.0, 0.0, 1.0)


def _smooth_exponent(t):
    # phi = 1 / (1 + exp(a)) on (0, 1)
    with np.errstate(divide="ignore"):
        return 1.0 / t - 1.0 / (1.0 - t)


def phi(s, cutoff: str = "quintic"):
    s = _check_s(s)
    t = _band(s)
    if cutoff == "quintic":
        return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    if cutoff != "smooth":
        raise ValueError(f"unknown cutoff {cutoff!r}")
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    out[mid] = expit(-_smooth_exponent(t[mid]))
    return out if out.ndim else float(out)


def phi_prime(s, cutoff: str = "quintic"):
    s = _check_s(s)
    t = _band(s)
    if cutoff == "quintic":
        return 30.0 * t**2 * (1.0 - t) ** 2
    if cutoff != "smooth":
        raise ValueError(f"unknown cutoff {cutoff!r}")
    out = np.zeros_like(t)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    a = _smooth_exponent(tm)
    out[mid] = expit(a) * expit(-a) * (1.0 / tm**2 + 1.0 / (1.0 - tm) ** 2)
    return out if out.ndim else float(out)


def _log_phi(t, cutoff):
    if cutoff == "quintic":
        return 3.0 * np.log(t) + np.log(10.0 - 15.0 * t + 6.0 * t**2)
    return -np.logaddexp(0.0, _smooth_exponent(t))


def _log_phi_prime(t, cutoff):
    if cutoff == "quintic":
        return math.log(30.0) + 2.0 * np.log(t) + 2.0 * np.log1p(-t)
    a = _smooth_exponent(t)
    return -np.logaddexp(0.0, a) - np.logaddexp(0.0, -a) + np.log(1.0 / t**2 + 1.0 / (1.0 - t) ** 2)


def phi_pow_products(s, gamma: float, cutoff: str = "quintic"):
    """(phi^gamma phi', phi^(gamma+1)) at s, both taken as 0 where phi = 0."""
    s = _check_s(s)
    t = _band(s)
    a = np.zeros_like(t)
    b = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    lp = _log_phi(tm, cutoff)
    a[mid] = np.exp(gamma * lp + _log_phi_prime(tm, cutoff))
    b[mid] = np.exp((gamma + 1.0) * lp)
    return a, b


def sphere_area(n: int) -> float:
    """c_n = 2 pi^(n/2) / Gamma(n/2), the area of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / float(gamma_fn(n / 2.0))


def _check_eps(eps: float):
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")


@lru_cache(maxsize=16)
def _core_integral(cutoff: str) -> float:
    # int_1^2 phi(t)/t dt
    val, _ = integrate.quad(lambda t: float(phi(t, cutoff)) / t, 1.0, 2.0, epsabs=1e-13, epsrel=1e-13)
    return val


def v_eps(r, eps: float, cutoff: str = "quintic"):
    """int_r^1 s^-1 phi(s/eps) ds for 0 <= r <= 1."""
    _check_eps(eps)
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("r must lie in [0, 1]")
    out = np.empty_like(r)
    for k, rv in np.ndenumerate(r):
        if rv >= 2.0 * eps:
            out[k] = -math.log(rv) if rv > 0 else math.inf
        elif rv <= eps:
            out[k] = _core_integral(cutoff) - math.log(2.0 * eps)
        else:
            val, _ = integrate.quad(lambda t: float(phi(t, cutoff)) / t, rv / eps, 2.0, epsabs=1e-13, epsrel=1e-13)
            out[k] = val - math.log(2.0 * eps)
    return out if out.ndim else float(out)


def g_eps(r, eps: float, n: int, p: float, gamma: float, cutoff: str = "quintic"):
    """Weighted operator of the profile at radius r (0 for r <= eps)."""
    _check_eps(eps)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    live = r > eps
    rl = r[live]
    a, b = phi_pow_products(rl / eps, gamma, cutoff)
    out[live] = rl ** (-gamma) * ((p - 1.0) / (eps * rl) * a + (n - 2.0) * b / rl**2)
    return out if out.ndim else float(out)


def _band_integrand(t, n, p, gamma, cutoff):
    a, b = phi_pow_products(np.asarray(t, dtype=float), gamma, cutoff)
    return t ** (n - 1.0 - 2.0 * gamma) * ((p - 1.0) * a / t + (n - 2.0) * b / t**2) ** 2


@lru_cache(maxsize=256)
def _band_integral(n: int, p: float, gamma: float, cutoff: str) -> float:
    # int_eps^{2eps} g^2 r^{n-1} dr = eps^{n-4-2gamma} * this value
    val, _ = integrate.quad(lambda t: float(_band_integrand(t, n, p, gamma, cutoff)), 1.0, 2.0,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def tail_integral(eps: float, n: int, gamma: float) -> float:
    """Closed form of int_{2eps}^1 g^2 r^{n-1} dr = (n-2)^2 int r^{n-5-2gamma} dr."""
    k = n - 5.0 - 2.0 * gamma
    lo = 2.0 * eps
    if abs(k + 1.0) < 1e-14:
        return (n - 2.0) ** 2 * -math.log(lo)
    return (n - 2.0) ** 2 * (1.0 - lo ** (k + 1.0)) / (k + 1.0)


def tail_integral_quad(eps: float, n: int, p: float, gamma: float, cutoff: str = "quintic") -> float:
    """int_{2eps}^1 g^2 r^{n-1} dr by adaptive quadrature in x = ln r."""
    val, _ = integrate.quad(lambda x: float(g_eps(math.exp(x), eps, n, p, gamma, cutoff)) ** 2 * math.exp(n * x),
                            math.log(2.0 * eps), 0.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def l2_norm_g(eps: float, n: int, p: float, gamma: float, cutoff: str = "quintic") -> float:
    """(c_n int_eps^1 g^2 r^{n-1} dr)^{1/2}, split at 2 eps."""
    _check_eps(eps)
    band = eps ** (n - 4.0 - 2.0 * gamma) * _band_integral(n, p, gamma, cutoff)
    return math.sqrt(sphere_area(n) * (band + tail_integral(eps, n, gamma)))


def l2_norm_g_simpson(eps: float, n: int, p: float, gamma: float, cutoff: str = "quintic",
                      nodes: int = 20001) -> float:
    """Same quantity by fixed composite Simpson rules on [eps, 2eps] and [2eps, 1]."""
    total = 0.0
    for lo, hi in ((eps, 2.0 * eps), (2.0 * eps, 1.0)):
        r = np.linspace(lo, hi, nodes)
        total += integrate.simpson(g_eps(r, eps, n, p, gamma, cutoff) ** 2 * r ** (n - 1), x=r)
    return math.sqrt(sphere_area(n) * total)


def check_hypotheses(n: int, gamma: float) -> None:
    if int(n) != n or n < 3:
        raise ValueError("the construction needs n >= 3")
    edge = (n - 4.0) / 2.0
    if not gamma > -1:
        raise ValueError("gamma must exceed -1")
    if gamma > edge:
        raise ValueError(f"gamma must not exceed (n-4)/2 = {edge:g}")
    if gamma == edge and n < 4:
        raise ValueError("gamma = (n-4)/2 is only covered for n >= 4")


@dataclass(frozen=True)
class BlowupRow:
    eps: float
    l2_g: float
    sup_v: float
    sup_u_scaled: float
    fit_exponent: float


@dataclass(frozen=True)
class BlowupReport:
    n: int
    p: float
    gamma: float
    cutoff: str
    rows: List[BlowupRow]
    critical: bool
    expected_exponent: float
    fit_exponent: float

    @property
    def sup_increasing(self) -> bool:
        s = [r.sup_v for r in self.rows]
        return all(b > a for a, b in zip(s, s[1:]))

    @property
    def exponent_ok(self) -> bool:
        if not self.critical:
            return True
        return abs(self.fit_exponent - self.expected_exponent) <= 0.2 * self.expected_exponent

    @property
    def passed(self) -> bool:
        return self.sup_increasing and self.exponent_ok

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "l2_g", "sup_v", "sup_u_scaled", "fit_exponent"])
        for r in self.rows:
            w.writerow([repr(r.eps), repr(r.l2_g), repr(r.sup_v), repr(r.sup_u_scaled), repr(r.fit_exponent)])
        return buf.getvalue()


def _slope(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def blowup_report(n: int, p: float, gamma: float, eps_list: Sequence[float] = DEFAULT_EPS,
                  cutoff: str = "auto") -> BlowupReport:
    """Norms of g, sup v = v(0) and the rescaled sup (ln 1/eps)^{-1/(2(1+gamma))} v(0).

    ``fit_exponent`` in row k is the log-log slope of the rescaled sup
    against ln(1/eps) over rows 0..k; the report's value uses all rows.
    """
    check_hypotheses(n, gamma)
    if not p > 1:
        raise ValueError("p must exceed 1")
    kind = resolve_cutoff(cutoff, gamma)
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    logs, scaled, rows = [], [], []
    for e in eps_list:
        lg = math.log(1.0 / e)
        sup_v = float(v_eps(0.0, e, kind))
        su = lg ** (-1.0 / (2.0 * (1.0 + gamma))) * sup_v
        logs.append(lg)
        scaled.append(su)
        rows.append(BlowupRow(e, l2_norm_g(e, n, p, gamma, kind), sup_v, su, _slope(logs, scaled)))
    return BlowupReport(
        n=n, p=p, gamma=gamma, cutoff=kind, rows=rows,
        critical=gamma == (n - 4.0) / 2.0,
        expected_exponent=(n - 3.0) / (n - 2.0),
        fit_exponent=_slope(logs, scaled),
    )
