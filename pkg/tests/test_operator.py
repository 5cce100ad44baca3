import math
import warnings

import numpy as np
import pytest
import sympy as sp

from nlpoisson import errors
from nlpoisson.kernels import KernelSpec, L_phi
from nlpoisson.operator import Grid, GridFunction, apply_L_grid, apply_L_quadrature, pi_matrix, pi_weights
from nlpoisson.piecewise import X, constant, from_expr, phi

QUARTIC = KernelSpec("quartic", 1.6)
S_KERNEL = KernelSpec("S", 0.6, 0.4)


def test_quadrature_constant_and_linear():
    assert abs(apply_L_quadrature(constant(1.0), QUARTIC, 0.3)) < 1e-13
    assert abs(apply_L_quadrature(from_expr(X), QUARTIC, 0.3)) < 1e-12
    assert abs(apply_L_quadrature(from_expr(X), S_KERNEL, 0.3)) < 1e-11


def test_quadrature_quadratic():
    # second moment 2 gives L(x^2/2) = 1
    for spec in (QUARTIC, S_KERNEL, KernelSpec("G", 0.7)):
        assert apply_L_quadrature(from_expr(X**2 / 2), spec, -0.4) == pytest.approx(1.0, abs=1e-11)


def test_quadrature_S_step_at_half_delta():
    d, b = 0.6, 0.4
    cs = (3 - b) / d ** (3 - b)
    expected = cs / (1 - b) * ((d / 2) ** (1 - b) - d ** (1 - b))
    assert apply_L_quadrature(phi(0, 0.0), S_KERNEL, d / 2) == pytest.approx(expected, abs=1e-11)


def test_quadrature_respects_support():
    u = from_expr(sp.Integer(1))
    u.support = (-1.0, 1.0)
    # x = 1.1 lies outside the support, so only u(y) on [-1, 1] contributes
    val = apply_L_quadrature(u, QUARTIC, 1.1)
    assert val == pytest.approx(QUARTIC.moment(0, 1.6) - QUARTIC.moment(0, 0.1), abs=1e-11)
    inside = apply_L_quadrature(u, QUARTIC, 0.5)
    a0 = QUARTIC.moment(0, 1.6)
    assert inside == pytest.approx(-(a0 - QUARTIC.moment(0, 0.5)) - (a0 - QUARTIC.moment(0, 1.5)), abs=1e-11)


def test_jump_inheritance():
    s = KernelSpec("G", 0.8)
    eps = 1e-9
    left = apply_L_quadrature(phi(0, 0.0), s, -eps)
    right = apply_L_quadrature(phi(0, 0.0), s, eps)
    assert right - left == pytest.approx(-s.alpha, abs=1e-7)


def test_grid_layout():
    g = Grid(-8.0, 8.0, 1.6, 41)
    assert g.h == pytest.approx(0.4)
    assert g.delta_aligned and g.n_collar == 4
    assert g.size == 49
    assert g.nodes[g.omega][0] == -8.0
    assert len(g.unknown) == 39
    assert len(g.constrained) == 10
    assert g.index_of(0.0) == 24


def test_grid_validation():
    with pytest.raises(errors.ValidationError):
        Grid(1.0, 0.0, 0.5, 11)
    with pytest.raises(errors.ValidationError):
        GridFunction(Grid(0.0, 1.0, 0.5, 11), np.zeros(3))
    with pytest.raises(errors.ValidationError):
        GridFunction(Grid(0.0, 1.0, 0.5, 11), np.full(21, np.nan))


def test_misaligned_warning():
    g = Grid(0.0, 1.0, 0.33, 11)
    assert not g.delta_aligned
    with pytest.warns(errors.MisalignedHorizon):
        apply_L_grid(GridFunction(g, np.zeros(g.size)), KernelSpec("quartic", 0.33))


def test_pi_weights_moments():
    for spec in (QUARTIC, S_KERNEL, KernelSpec("P", 0.6, 0.5)):
        h = spec.delta / 8
        w = pi_weights(spec, h)
        m = np.arange(len(w)) - len(w) // 2
        assert np.sum(w) == pytest.approx(spec.alpha, rel=1e-13)
        assert np.sum(w * m) == pytest.approx(0.0, abs=1e-12)


def test_grid_annihilates_constants_and_linears():
    g = Grid(-2.0, 2.0, 0.5, 81)
    for vals in (np.full(g.size, 3.0), 2.0 * g.nodes - 1.0):
        Lu = apply_L_grid(GridFunction(g, vals), KernelSpec("quartic", 0.5)).values
        inner = np.abs(g.nodes) <= 2.0
        assert np.max(np.abs(Lu[inner])) < 1e-12


def test_grid_linearity():
    g = Grid(-2.0, 2.0, 0.5, 41)
    s = KernelSpec("G", 0.5)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2, g.size))
    lhs = apply_L_grid(GridFunction(g, 2 * u - 3 * v), s).values
    rhs = 2 * apply_L_grid(GridFunction(g, u), s).values - 3 * apply_L_grid(GridFunction(g, v), s).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_grid_matches_matrix():
    g = Grid(-1.0, 1.0, 0.25, 33)
    s = KernelSpec("S", 0.25, 0.3)
    u = np.sin(3 * g.nodes)
    assert np.allclose(apply_L_grid(GridFunction(g, u), s).values, pi_matrix(s, g) @ u, atol=1e-12)


@pytest.mark.parametrize("spec", [QUARTIC, S_KERNEL, KernelSpec("P", 0.6, 0.5), KernelSpec("G", 0.6)],
                         ids=["quartic", "S", "P", "G"])
def test_grid_converges_to_oracle(spec):
    u = from_expr(sp.exp(-(X**2)))
    errs = []
    for n in (41, 81, 161):
        a = 2.0
        g = Grid(-a, a, spec.delta, n)
        Lu = apply_L_grid(GridFunction.sample(g, u), spec).values
        x = np.linspace(-1.0, 1.0, 5)
        idx = [g.index_of(v) for v in x]
        errs.append(np.max(np.abs(Lu[idx] - apply_L_quadrature(u, spec, x))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9)


def test_grid_phi1_vs_L_phi():
    s = KernelSpec("quartic", 0.5)
    g = Grid(-2.0, 2.0, 0.5, 161)
    Lu = apply_L_grid(GridFunction.sample(g, phi(1, 0.0)), s).values
    x = g.nodes[g.omega]
    assert np.max(np.abs(Lu[g.omega] - L_phi(s, 1).eval(0, x))) < 1e-3


def test_periodic_multiplier_path():
    s = KernelSpec("quartic", 0.5)
    g = Grid.periodic(0.0, 4.0, 64, 0.5)
    x = g.nodes
    Lu = apply_L_grid(GridFunction(g, np.cos(math.pi * x / 2)), s).values
    from nlpoisson.kernels import multiplier

    assert np.max(np.abs(Lu - multiplier(s, math.pi / 2) * np.cos(math.pi * x / 2))) < 1e-13
    pi_path = apply_L_grid(GridFunction(g, np.cos(math.pi * x / 2)), s, method="pi").values
    # product integration carries an O(h^2) error relative to the exact symbol
    assert np.max(np.abs(pi_path - Lu)) < 0.06 * np.max(np.abs(Lu))
    with pytest.raises(errors.ValidationError):
        apply_L_grid(GridFunction(Grid(0.0, 1.0, 0.5, 11), np.zeros(21)), s, method="multiplier")
