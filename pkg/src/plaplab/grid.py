"""Uniform masked grids on convex 2D domains and discrete calculus on them.

Nodes carry one of three labels: ``EXTERIOR`` (outside the domain),
``BOUNDARY`` (Dirichlet nodes) and ``INTERIOR`` (in-domain nodes whose eight
neighbours are all in-domain).  Arrays are indexed ``[i, j]`` with ``i``
along x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from .params import ProblemParams
from .pointcalc import PointState, operator_values

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2


@dataclass(frozen=True)
class DomainSpec:
    shape: str
    a: float = 1.0
    b: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if self.shape not in ("rectangle", "disk"):
            raise ValueError(f"unknown domain shape {self.shape!r}")
        if self.shape == "rectangle" and not (self.a > 0 and self.b > 0):
            raise ValueError("rectangle sides must be positive")
        if self.shape == "disk" and not self.R > 0:
            raise ValueError("disk radius must be positive")

    @classmethod
    def rectangle(cls, a: float = 1.0, b: float = 1.0) -> "DomainSpec":
        return cls("rectangle", a=a, b=b)

    @classmethod
    def disk(cls, R: float = 1.0) -> "DomainSpec":
        return cls("disk", R=R)

    @property
    def convex(self) -> bool:
        return True

    @property
    def diameter(self) -> float:
        return math.hypot(self.a, self.b) if self.shape == "rectangle" else 2.0 * self.R

    @property
    def area(self) -> float:
        return self.a * self.b if self.shape == "rectangle" else math.pi * self.R**2

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.a + self.b) if self.shape == "rectangle" else 2.0 * math.pi * self.R

    @property
    def label(self) -> str:
        if self.shape == "rectangle":
            return f"rectangle[{self.a:g}x{self.b:g}]"
        return f"disk[{self.R:g}]"

    def bounding_box(self) -> Tuple[float, float, float, float]:
        if self.shape == "rectangle":
            return 0.0, self.a, 0.0, self.b
        return -self.R, self.R, -self.R, self.R


@dataclass(frozen=True, eq=False)
class Grid2D:
    spec: DomainSpec
    h: float
    x0: float
    y0: float
    mask: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mask.shape

    @property
    def nx(self) -> int:
        return self.mask.shape[0]

    @property
    def ny(self) -> int:
        return self.mask.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @property
    def XY(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def inside(self) -> np.ndarray:
        return self.mask != EXTERIOR

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.mask == BOUNDARY

    def boundary_distance(self) -> np.ndarray:
        """Distance from each node to the domain boundary (analytic)."""
        X, Y = self.XY
        if self.spec.shape == "rectangle":
            return np.minimum(np.minimum(X, self.spec.a - X), np.minimum(Y, self.spec.b - Y))
        return self.spec.R - np.hypot(X, Y)


def _fit_spacing(length: float, h: float) -> int:
    return max(1, int(math.ceil(length / h - 1e-9)))


def build_grid(spec: DomainSpec, h: float) -> Grid2D:
    """Lay a uniform grid with spacing <= ``h`` over ``spec``.

    The spacing is shrunk so that rectangle sides (or the disk diameter)
    are whole multiples of it.
    """
    if not h > 0:
        raise ValueError("spacing must be positive")
    if spec.shape == "rectangle":
        # four intervals per side keep the one-sided 4-point stencils available
        if not h <= min(spec.a, spec.b) / 4:
            raise ValueError(f"h={h} too coarse: need h <= {min(spec.a, spec.b) / 4:g}")
        na = _fit_spacing(spec.a, h)
        while True:
            hh = spec.a / na
            nb = spec.b / hh
            if abs(nb - round(nb)) < 1e-9 * max(1.0, nb):
                nb = int(round(nb))
                break
            na += 1
            if na > 1_000_000:
                raise ValueError("rectangle sides are incommensurable at this spacing")
        mask = np.full((na + 1, nb + 1), INTERIOR, dtype=np.int8)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = BOUNDARY
        w = np.full(mask.shape, hh * hh)
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        return Grid2D(spec, hh, 0.0, 0.0, mask, w)

    if not h <= spec.R / 4:
        raise ValueError(f"h={h} too coarse: need h <= {spec.R / 4:g}")
    N = _fit_spacing(2.0 * spec.R, h)
    hh = 2.0 * spec.R / N
    c = -spec.R + hh * np.arange(N + 1)
    X, Y = np.meshgrid(c, c, indexing="ij")
    inside = X**2 + Y**2 <= spec.R**2 * (1.0 + 1e-12)
    full = ndimage.binary_erosion(inside, structure=np.ones((3, 3), bool), border_value=0)
    mask = np.where(inside, BOUNDARY, EXTERIOR).astype(np.int8)
    mask[full] = INTERIOR
    w = np.where(inside, hh * hh, 0.0)
    return Grid2D(spec, hh, -spec.R, -spec.R, mask, w)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        v = np.where(self.grid.inside, v, 0.0)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def __mul__(self, t: float) -> "ScalarField":
        return ScalarField(self.grid, t * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def with_dirichlet(self) -> "ScalarField":
        return ScalarField(self.grid, np.where(self.grid.interior, self.values, 0.0))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid2D
    values: np.ndarray  # (nx, ny, 2)


@dataclass(frozen=True, eq=False)
class MatrixField:
    grid: Grid2D
    values: np.ndarray  # (nx, ny, 2, 2), symmetric


AnyField = Union[ScalarField, VectorField, MatrixField]


def sample(grid: Grid2D, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> ScalarField:
    X, Y = grid.XY
    return ScalarField(grid, np.broadcast_to(func(X, Y), grid.shape).astype(float))


# --- finite differences -----------------------------------------------------

def _shift(a: np.ndarray, k: int, axis: int, fill=0):
    """out[i] = a[i + k] along ``axis``; out-of-range entries take ``fill``."""
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    n = a.shape[axis]
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _axis_derivatives(u: np.ndarray, inside: np.ndarray, h: float, axis: int):
    """First and second derivative along one axis with stencil fallbacks."""
    s = {k: _shift(u, k, axis) for k in (-3, -2, -1, 1, 2, 3)}
    m = {k: _shift(inside, k, axis, False) for k in (-3, -2, -1, 1, 2, 3)}
    d1 = np.zeros_like(u)
    d2 = np.zeros_like(u)
    done1 = np.zeros(u.shape, bool)
    done2 = np.zeros(u.shape, bool)

    def put(dst, done, cond, val):
        sel = cond & ~done & inside
        dst[sel] = val[sel]
        done |= sel

    put(d1, done1, m[-1] & m[1], (s[1] - s[-1]) / (2 * h))
    put(d1, done1, m[1] & m[2], (-3 * u + 4 * s[1] - s[2]) / (2 * h))
    put(d1, done1, m[-1] & m[-2], (3 * u - 4 * s[-1] + s[-2]) / (2 * h))
    put(d1, done1, m[1], (s[1] - u) / h)
    put(d1, done1, m[-1], (u - s[-1]) / h)

    h2 = h * h
    put(d2, done2, m[-1] & m[1], (s[1] - 2 * u + s[-1]) / h2)
    put(d2, done2, m[1] & m[2] & m[3], (2 * u - 5 * s[1] + 4 * s[2] - s[3]) / h2)
    put(d2, done2, m[-1] & m[-2] & m[-3], (2 * u - 5 * s[-1] + 4 * s[-2] - s[-3]) / h2)
    put(d2, done2, m[1] & m[2], (u - 2 * s[1] + s[2]) / h2)
    put(d2, done2, m[-1] & m[-2], (u - 2 * s[-1] + s[-2]) / h2)
    return d1, d2


def gradient_array(values: np.ndarray, grid: Grid2D) -> np.ndarray:
    inside = grid.inside
    ux, _ = _axis_derivatives(values, inside, grid.h, 0)
    uy, _ = _axis_derivatives(values, inside, grid.h, 1)
    return np.stack([ux, uy], axis=-1)


def derivative_arrays(values: np.ndarray, grid: Grid2D):
    """Gradient (nx, ny, 2) and Hessian (nx, ny, 2, 2) arrays."""
    inside, h = grid.inside, grid.h
    ux, uxx = _axis_derivatives(values, inside, h, 0)
    uy, uyy = _axis_derivatives(values, inside, h, 1)
    uxy_a, _ = _axis_derivatives(uy, inside, h, 0)
    uxy_b, _ = _axis_derivatives(ux, inside, h, 1)
    uxy = 0.5 * (uxy_a + uxy_b)
    G = np.stack([ux, uy], axis=-1)
    H = np.empty(values.shape + (2, 2))
    H[..., 0, 0], H[..., 1, 1] = uxx, uyy
    H[..., 0, 1] = H[..., 1, 0] = uxy
    return G, H


def differentiate(u: ScalarField) -> Tuple[VectorField, MatrixField]:
    G, H = derivative_arrays(u.values, u.grid)
    return VectorField(u.grid, G), MatrixField(u.grid, H)


# --- quadrature norms --------------------------------------------------------

def magnitude(f: Union[AnyField, np.ndarray]) -> np.ndarray:
    v = f.values if hasattr(f, "values") else np.asarray(f)
    if isinstance(f, VectorField) or (not hasattr(f, "values") and v.ndim == 3):
        return np.sqrt(np.einsum("...i,...i->...", v, v))
    if isinstance(f, MatrixField) or (not hasattr(f, "values") and v.ndim == 4):
        return np.sqrt(np.einsum("...ij,...ij->...", v, v))
    return np.abs(v)


def norm_array(mag: np.ndarray, grid: Grid2D, q: float, region: Optional[np.ndarray] = None) -> float:
    sel = grid.inside if region is None else (grid.inside & region)
    if math.isinf(q):
        return float(np.max(mag[sel])) if sel.any() else 0.0
    if q < 1:
        raise ValueError("q must be >= 1")
    return float(np.sum(grid.weights[sel] * mag[sel] ** q) ** (1.0 / q))


def norm(f: AnyField, q: float = 2.0) -> float:
    """Discrete L^q norm of the pointwise magnitude (Euclidean / Frobenius)."""
    return norm_array(magnitude(f), f.grid, q)


@dataclass(frozen=True)
class NonlinearNorms:
    grad_q0_term: float
    sobolev_term: float
    rhs_op_term: float
    eps_term: float
    q0: float


def nonlinear_gradient_norms(u: ScalarField, p: float, gamma: float, eps: float,
                             q0: Optional[float] = None) -> NonlinearNorms:
    """Both sides of the global weighted Sobolev estimate for one field.

    ``grad_q0_term`` is |Du|_{q0}^{gamma+1}, ``sobolev_term`` is
    |D[(|Du|^2+eps)^{gamma/2} Du]|_2 with the vector field built nodewise and
    differentiated componentwise, ``rhs_op_term`` is the L^2 norm of the
    weighted operator and ``eps_term`` is eps^{(gamma+1)/2}.
    """
    grid = u.grid
    if q0 is None:
        q0 = ProblemParams(2, p, gamma, eps).q0
    G, H = derivative_arrays(u.values, grid)
    g2 = np.einsum("...i,...i->...", G, G)
    V = (g2 + eps)[..., None] ** (0.5 * gamma) * G
    DV = np.stack([gradient_array(V[..., 0], grid), gradient_array(V[..., 1], grid)], axis=-2)
    ops = operator_values(PointState(G, H, eps), p, gamma)
    return NonlinearNorms(
        grad_q0_term=norm_array(np.sqrt(g2), grid, q0) ** (gamma + 1.0),
        sobolev_term=norm_array(magnitude(DV), grid, 2.0),
        rhs_op_term=norm_array(np.abs(ops.weighted_operator), grid, 2.0),
        eps_term=eps ** (0.5 * (gamma + 1.0)),
        q0=q0,
    )


# --- Hoelder norm --------------------------------------------------------------

def holder_norm(u: ScalarField, alpha: float, pair_budget: int = 20_000, seed: int = 0,
                region: Optional[np.ndarray] = None) -> float:
    """max|u| + a reproducible lower bound of the C^{0,alpha} seminorm.

    Pairs examined: all pairs within Chebyshev graph distance 4, each node
    paired with the extremal nodes of ``u``, and ``pair_budget`` random
    long-range pairs.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    grid = u.grid
    sel = grid.inside if region is None else (grid.inside & region)
    if not sel.any():
        return 0.0
    vals = u.values
    out = float(np.max(np.abs(vals[sel])))
    h = grid.h
    semi = 0.0
    for di in range(0, 5):
        for dj in range(-4, 5):
            if di == 0 and dj <= 0:
                continue
            v2 = _shift(_shift(vals, di, 0), dj, 1)
            m2 = _shift(_shift(sel, di, 0, False), dj, 1, False)
            both = sel & m2
            if both.any():
                d = h * math.hypot(di, dj)
                semi = max(semi, float(np.max(np.abs(vals[both] - v2[both]))) / d**alpha)

    X, Y = grid.XY
    px, py, pv = X[sel], Y[sel], vals[sel]
    anchors = [int(np.argmax(pv)), int(np.argmin(pv))]
    rng = np.random.default_rng(seed)
    i = rng.integers(0, pv.size, pair_budget)
    j = rng.integers(0, pv.size, pair_budget)
    i = np.concatenate([i] + [np.full(pv.size, k) for k in anchors])
    j = np.concatenate([j] + [np.arange(pv.size)] * len(anchors))
    d = np.hypot(px[i] - px[j], py[i] - py[j])
    keep = d > 0
    if keep.any():
        semi = max(semi, float(np.max(np.abs(pv[i] - pv[j])[keep] / d[keep] ** alpha)))
    return out + semi


# --- mollification -------------------------------------------------------------

def bump_kernel(radius: float, h: float) -> np.ndarray:
    m = int(math.floor(radius / h))
    k = np.arange(-m, m + 1) * h
    KX, KY = np.meshgrid(k, k, indexing="ij")
    r2 = (KX**2 + KY**2) / radius**2
    K = np.zeros_like(r2)
    inner = r2 < 1.0
    K[inner] = np.exp(-1.0 / (1.0 - r2[inner]))
    return K / K.sum()


def mollify(f: ScalarField, eps_moll: float) -> ScalarField:
    """Convolve the zero extension of ``f`` with a unit-mass radial bump."""
    grid = f.grid
    if eps_moll < 2.0 * grid.h:
        return f
    K = bump_kernel(eps_moll, grid.h)
    out = ndimage.convolve(np.where(grid.inside, f.values, 0.0), K, mode="constant", cval=0.0)
    return ScalarField(grid, out)


# --- plain-text dumps ------------------------------------------------------------

def dump_text(u: ScalarField) -> str:
    g = u.grid
    lines = [f"{g.nx} {g.ny} {float(g.h)!r}"]
    X, Y = g.XY
    for i in range(g.nx):
        for j in range(g.ny):
            lines.append(f"{i} {j} {float(X[i, j])!r} {float(Y[i, j])!r} {int(g.mask[i, j])} {float(u.values[i, j])!r}")
    return "\n".join(lines) + "\n"


def save_dump(u: ScalarField, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_text(u), encoding="utf-8")


def load_dump(path: Union[str, Path]) -> ScalarField:
    """Rebuild a field from a dump; the domain is inferred from the mask."""
    rows = Path(path).read_text(encoding="utf-8").split("\n")
    nx, ny, h = rows[0].split()
    nx, ny, h = int(nx), int(ny), float(h)
    data = np.loadtxt(rows[1:], ndmin=2)
    if data.shape[0] != nx * ny:
        raise ValueError(f"expected {nx * ny} node lines, found {data.shape[0]}")
    idx = data[:, 0].astype(int), data[:, 1].astype(int)
    mask = np.zeros((nx, ny), np.int8)
    vals = np.zeros((nx, ny))
    mask[idx] = data[:, 4].astype(np.int8)
    vals[idx] = data[:, 5]
    x0 = float(data[(data[:, 0] == 0)][0, 2])
    y0 = float(data[(data[:, 1] == 0)][0, 3])
    if np.all(mask != EXTERIOR):
        spec = DomainSpec.rectangle((nx - 1) * h, (ny - 1) * h)
    else:
        spec = DomainSpec.disk(0.5 * (nx - 1) * h)
    grid = build_grid(spec, h * (1 + 1e-12))
    if grid.shape != (nx, ny) or not np.array_equal(grid.mask, mask) or abs(grid.x0 - x0) > 1e-9 * max(1, abs(x0)) \
            or abs(grid.y0 - y0) > 1e-9 * max(1, abs(y0)):
        raise ValueError("dump does not describe a grid this package can rebuild")
    return ScalarField(grid, vals)
