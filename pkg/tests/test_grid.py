import math

import numpy as np
import pytest
from scipy import integrate

from plaplab.grid import (
    BOUNDARY,
    INTERIOR,
    DomainSpec,
    ScalarField,
    build_grid,
    bump_kernel,
    derivative_arrays,
    differentiate,
    dump_text,
    gradient_array,
    holder_norm,
    load_dump,
    mollify,
    nonlinear_gradient_norms,
    norm,
    norm_array,
    sample,
    save_dump,
)

SQ = DomainSpec.rectangle()
DISK = DomainSpec.disk()


def sinsin(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


def test_domain_spec():
    assert SQ.diameter == pytest.approx(math.sqrt(2))
    assert DISK.diameter == 2.0
    assert SQ.convex and DISK.convex
    with pytest.raises(ValueError):
        DomainSpec.rectangle(0.0, 1.0)
    with pytest.raises(ValueError):
        DomainSpec.disk(-1.0)


def test_unit_square_quarter_spacing():
    g = build_grid(SQ, 0.25)
    assert g.shape == (5, 5)
    assert int(g.interior.sum()) == 9
    assert g.weights.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("h", [1 / 8, 1 / 13, 1 / 64])
def test_square_weights_and_spacing(h):
    g = build_grid(SQ, h)
    assert g.h <= h + 1e-15
    assert abs(g.weights.sum() - 1.0) <= 2 * g.h * 4


def test_rectangle_spacing_fits_both_sides():
    g = build_grid(DomainSpec.rectangle(2.0, 1.0), 0.1)
    assert g.shape == (21, 11)
    assert g.x[-1] == pytest.approx(2.0) and g.y[-1] == pytest.approx(1.0)


def test_disk_area_and_masks():
    g = build_grid(DISK, 1 / 32)
    assert abs(g.weights.sum() - math.pi) <= 0.15
    I, J = np.nonzero(g.interior)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            assert np.all(g.inside[I + di, J + dj])
    X, Y = g.XY
    assert np.all(np.hypot(X, Y)[g.boundary] >= 1 - 2 * g.h)


def test_too_coarse_rejected():
    with pytest.raises(ValueError):
        build_grid(SQ, 0.3)
    with pytest.raises(ValueError):
        build_grid(DISK, 0.3)


def test_quadratic_exact_and_constant_zero():
    g = build_grid(SQ, 1 / 16)
    G, H = derivative_arrays(sample(g, lambda x, y: x**2).values, g)
    X, _ = g.XY
    it = g.interior
    assert np.allclose(G[..., 0][it], 2 * X[it], atol=1e-12)
    assert np.allclose(G[..., 1][it], 0, atol=1e-12)
    assert np.allclose(H[it], np.array([[2.0, 0.0], [0.0, 0.0]]), atol=1e-9)
    V, M = differentiate(sample(g, lambda x, y: 3.0 + 0 * x))
    assert np.allclose(V.values, 0) and np.allclose(M.values, 0)


def test_second_derivative_order():
    errs = []
    # the one-sided boundary stencil is preasymptotic at h = 1/32
    for h in (1 / 64, 1 / 128):
        g = build_grid(SQ, h)
        _, H = derivative_arrays(sample(g, lambda x, y: np.sin(np.pi * x)).values, g)
        X, _ = g.XY
        exact = -np.pi**2 * np.sin(np.pi * X)
        errs.append(np.max(np.abs(H[..., 0, 0] - exact)[g.inside]))
    order = math.log2(errs[0] / errs[1])
    assert 1.8 <= order <= 2.2


def test_norm_examples():
    g = build_grid(SQ, 1 / 64)
    one = sample(g, lambda x, y: 1.0 + 0 * x)
    assert abs(norm(one, 2) - 1.0) <= 2 * g.h * 4
    u = sample(g, sinsin)
    assert norm(u, 2) == pytest.approx(0.5, abs=0.01)
    assert abs(norm(u, math.inf) - 1.0) <= g.h**2 * math.pi**2
    with pytest.raises(ValueError):
        norm(u, 0.5)


def test_norm_homogeneous_and_triangle():
    g = build_grid(DISK, 1 / 16)
    rng = np.random.default_rng(0)
    for _ in range(1000 // 50):
        a = ScalarField(g, rng.standard_normal(g.shape))
        b = ScalarField(g, rng.standard_normal(g.shape))
        for q in (1.0, 2.0, 3.5, math.inf):
            assert norm(a + b, q) <= norm(a, q) + norm(b, q) + 1e-10
            assert norm(a * -3.0, q) == pytest.approx(3.0 * norm(a, q), rel=1e-12)


def test_nonlinear_norms_poisson_case():
    g = build_grid(SQ, 1 / 128)
    u = sample(g, sinsin)
    nn = nonlinear_gradient_norms(u, 2.0, 0.0, 1e-2)
    # |D^2 u|_2 = |Delta u|_2 = 2 pi^2 |u|_2 = pi^2 (exact integral)
    exact, _ = integrate.dblquad(lambda y, x: (2 * np.pi**2 * sinsin(x, y)) ** 2, 0, 1, 0, 1)
    assert math.sqrt(exact) == pytest.approx(math.pi**2, rel=1e-10)
    assert nn.sobolev_term == pytest.approx(math.pi**2, rel=0.02)
    assert nn.rhs_op_term == pytest.approx(math.pi**2, rel=0.02)
    assert nn.eps_term == pytest.approx(0.1)
    zero = nonlinear_gradient_norms(sample(g, lambda x, y: 0 * x), 3.0, 0.5, 1e-2)
    assert zero.grad_q0_term == zero.sobolev_term == zero.rhs_op_term == 0.0
    assert zero.eps_term == pytest.approx(1e-2**0.75)


def test_nonlinear_norms_gamma_zero_is_hessian_norm():
    g = build_grid(DISK, 1 / 32)
    u = sample(g, lambda x, y: (1 - x**2 - y**2) * (1 + x / 2))
    nn = nonlinear_gradient_norms(u, 3.0, 0.0, 0.1)
    G, _ = derivative_arrays(u.values, g)
    DV = np.stack([gradient_array(G[..., 0], g), gradient_array(G[..., 1], g)], axis=-2)
    assert nn.sobolev_term == pytest.approx(norm_array(np.sqrt((DV**2).sum(axis=(-1, -2))), g, 2.0), rel=1e-14)


def test_norm_refinement_order():
    vals = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = build_grid(SQ, h)
        vals.append(nonlinear_gradient_norms(sample(g, sinsin), 2.0, 0.0, 0.01).sobolev_term)
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    assert math.log2(d1 / d2) >= 1.5


def test_holder_norm_examples():
    g = build_grid(SQ, 1 / 32)
    c = sample(g, lambda x, y: -2.5 + 0 * x)
    assert holder_norm(c, 0.5) == pytest.approx(2.5)
    u = sample(g, lambda x, y: x)
    semi = holder_norm(u, 0.5) - 1.0
    assert abs(semi - 1.0) <= g.h
    assert holder_norm(u * 3.0, 0.5) == pytest.approx(3.0 * holder_norm(u, 0.5))
    with pytest.raises(ValueError):
        holder_norm(u, 1.0)


def test_mollify_properties():
    g = build_grid(SQ, 1 / 64)
    K = bump_kernel(8 * g.h, g.h)
    assert abs(K.sum() - 1.0) <= 1e-12
    one = sample(g, lambda x, y: 2.0 + 0 * x)
    m = mollify(one, 8 * g.h)
    assert np.all(m.values[g.inside] <= 2.0 + 1e-12)
    far = g.boundary_distance() >= 8 * g.h
    assert np.allclose(m.values[far], 2.0, atol=1e-12)
    assert mollify(one, g.h) is one
    f = sample(g, lambda x, y: np.cos(3 * x) * np.exp(y))
    assert norm(mollify(f, 6 * g.h)) <= norm(f) + 1e-12
    region = g.boundary_distance() > 8 * g.h
    errs = [norm_array(np.abs(mollify(f, r * g.h).values - f.values), g, 2.0, region) for r in (8, 4, 2)]
    assert errs[0] > errs[1] > errs[2]


def test_scalar_field_invariants():
    g = build_grid(DISK, 1 / 8)
    f = ScalarField(g, np.ones(g.shape))
    assert np.all(f.values[~g.inside] == 0)
    assert np.all(f.with_dirichlet().values[g.mask == BOUNDARY] == 0)
    assert np.all(f.with_dirichlet().values[g.mask == INTERIOR] == 1)
    with pytest.raises(ValueError):
        ScalarField(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError):
        ScalarField(g, np.ones((3, 3)))


@pytest.mark.parametrize("spec,h", [(SQ, 1 / 16), (DISK, 1 / 8), (DomainSpec.rectangle(2.0, 1.0), 0.125)])
def test_dump_roundtrip(tmp_path, spec, h):
    g = build_grid(spec, h)
    u = sample(g, lambda x, y: np.exp(x) * np.cos(y) / 3)
    text = dump_text(u)
    head = text.split("\n")[0].split()
    assert head == [str(g.nx), str(g.ny), repr(g.h)]
    path = tmp_path / "u.dump"
    save_dump(u, path)
    v = load_dump(path)
    assert v.grid.shape == g.shape
    assert np.array_equal(v.grid.mask, g.mask)
    assert np.array_equal(v.values, u.values)
