"""Named functions: right-hand sides ``f`` and manufactured zero-boundary fields.

Data functions are written in box-normalized coordinates ``(s, t)`` in
[0, 1]^2, so every name works on every domain.  Manufactured fields vanish
on the boundary of the domains they are registered for and come with
exact first and second derivatives (via sympy) for manufactured solutions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
import sympy as sp

from .grid import DomainSpec, Grid2D, ScalarField
from .pointcalc import PointState, operator_values


def _normalized(grid: Grid2D):
    x0, x1, y0, y1 = grid.spec.bounding_box()
    X, Y = grid.XY
    return (X - x0) / (x1 - x0), (Y - y0) / (y1 - y0)


DATA_FUNCTIONS: Dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "constant": lambda s, t: np.ones_like(s),
    "sinsin": lambda s, t: np.sin(np.pi * s) * np.sin(np.pi * t),
    "gaussian-bump": lambda s, t: np.exp(-((s - 0.5) ** 2 + (t - 0.5) ** 2) / (2 * 0.1**2)),
    "checker-sign": lambda s, t: np.sign(np.sin(2 * np.pi * s) * np.sin(2 * np.pi * t)),
}


def data_field(name: str, grid: Grid2D, scale: float = 1.0) -> ScalarField:
    """Right-hand side ``scale * f_name`` sampled at every in-domain node."""
    try:
        func = DATA_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown data function {name!r}; known: {sorted(DATA_FUNCTIONS)}") from None
    s, t = _normalized(grid)
    return ScalarField(grid, scale * func(s, t))


_x, _y = sp.symbols("x y", real=True)


def _sinsin(spec):
    return sp.sin(sp.pi * _x / spec.a) * sp.sin(sp.pi * _y / spec.b)


def _bubble(spec):
    if spec.shape == "rectangle":
        a, b = sp.nsimplify(spec.a), sp.nsimplify(spec.b)
        return 16 * _x * (a - _x) * _y * (b - _y) / (a**2 * b**2)
    R = sp.nsimplify(spec.R)
    return 1 - (_x**2 + _y**2) / R**2


def _bubble2(spec):
    return _bubble(spec) ** 2


def _tilted(spec):
    L = sp.nsimplify(spec.a if spec.shape == "rectangle" else spec.R)
    return _bubble(spec) * (1 + _x / (2 * L))


def _radial_cos(spec):
    R = sp.nsimplify(spec.R)
    return sp.cos(sp.pi * (_x**2 + _y**2) / (2 * R**2))


# name -> (builder, shapes it vanishes on the boundary of)
_MANUFACTURED = {
    "sinsin": (_sinsin, ("rectangle",)),
    "bubble": (_bubble, ("rectangle", "disk")),
    "bubble2": (_bubble2, ("rectangle", "disk")),
    "tilted": (_tilted, ("rectangle", "disk")),
    "radial-cos": (_radial_cos, ("disk",)),
}
MANUFACTURED_NAMES = tuple(_MANUFACTURED)


def manufactured_names(spec: DomainSpec) -> Tuple[str, ...]:
    return tuple(k for k, (_, shapes) in _MANUFACTURED.items() if spec.shape in shapes)


@lru_cache(maxsize=64)
def _compiled(name: str, spec: DomainSpec):
    build, shapes = _MANUFACTURED[name]
    if spec.shape not in shapes:
        raise ValueError(f"field {name!r} is not zero on the boundary of a {spec.shape}")
    e = build(spec)
    grad = [sp.diff(e, v) for v in (_x, _y)]
    hess = [[sp.diff(e, a, b) for b in (_x, _y)] for a in (_x, _y)]
    f = sp.lambdify((_x, _y), e, "numpy")
    g = sp.lambdify((_x, _y), grad, "numpy")
    H = sp.lambdify((_x, _y), hess, "numpy")
    return f, g, H


@dataclass(frozen=True)
class Manufactured:
    """A smooth field with known derivatives, zero on the domain boundary."""

    name: str

    def _fns(self, grid: Grid2D):
        if self.name not in _MANUFACTURED:
            raise ValueError(f"unknown manufactured field {self.name!r}; known: {sorted(_MANUFACTURED)}")
        return _compiled(self.name, grid.spec)

    def field(self, grid: Grid2D) -> ScalarField:
        f, _, _ = self._fns(grid)
        X, Y = grid.XY
        return ScalarField(grid, np.broadcast_to(f(X, Y), grid.shape))

    def exact_derivatives(self, grid: Grid2D):
        _, g, H = self._fns(grid)
        X, Y = grid.XY
        G = np.stack([np.broadcast_to(c, grid.shape) for c in g(X, Y)], axis=-1)
        Hm = np.empty(grid.shape + (2, 2))
        for i, row in enumerate(H(X, Y)):
            for j, c in enumerate(row):
                Hm[..., i, j] = np.broadcast_to(c, grid.shape)
        return G, Hm

    def rhs(self, grid: Grid2D, p: float, gamma: float, eps: float, lam: float = 0.0) -> ScalarField:
        """-(|Du|^2+eps)^{gamma/2} Delta^N_{p,eps} u + lam u from exact derivatives."""
        G, H = self.exact_derivatives(grid)
        op = operator_values(PointState(G, H, eps), p, gamma).weighted_operator
        u = self.field(grid).values
        return ScalarField(grid, -op + lam * u)
