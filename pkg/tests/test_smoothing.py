import numpy as np
import pytest
import sympy as sp

from nlpoisson import errors
from nlpoisson.fixtures import fixture
from nlpoisson.kernels import KernelSpec
from nlpoisson.operator import Grid, GridFunction
from nlpoisson.piecewise import X, from_expr, linear_combine, phi
from nlpoisson.smoothing import correction_values, reconstruct, smooth, smoothed_constraint, with_constraint

EX1 = fixture("ex1")
EX2 = fixture("ex2")


def test_ex1_coefficients_are_one():
    rec = smooth(EX1.f, EX1.spec, 4, [0.0])
    assert np.max(np.abs(rec.coefficients - 1.0)) <= 1e-9
    for k in range(5):
        assert abs(rec.source.jump_at(0.0, k).magnitude) <= 1e-10


def test_ex2_level_zero():
    rec = smooth(EX2.f, EX2.spec, 0, EX2.jumps)
    assert rec.coefficients[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert rec.coefficients[1, 0] == pytest.approx(1.0, abs=1e-10)


def test_ex2_coefficients_match_u_jumps():
    rec = smooth(EX2.f, EX2.spec, 4, EX2.jumps)
    for j, p in enumerate(EX2.jumps):
        for k in range(5):
            assert rec.coefficients[j, k] == pytest.approx(EX2.u_exact.jump_at(p, k).magnitude, abs=1e-9)


def test_location_order_does_not_matter():
    a = smooth(EX2.f, EX2.spec, 3, [-2.0, 4.0]).coefficients
    b = smooth(EX2.f, EX2.spec, 3, [4.0, -2.0]).coefficients[::-1]
    assert np.array_equal(a, b)


def test_continuous_source_is_untouched():
    f = from_expr(sp.sin(X))
    rec = smooth(f, EX1.spec, 1, [0.0])
    assert np.all(rec.coefficients == 0)
    assert rec.source is f


def test_negative_level_is_empty():
    rec = smooth(EX1.f, EX1.spec, -1, [0.0])
    assert rec.level == -1 and rec.corrections() == []


def test_level_exceeds_kernel():
    with pytest.raises(errors.LevelExceedsKernelSmoothness):
        smooth(EX1.f, EX1.spec, 5, [0.0])
    with pytest.raises(errors.LevelExceedsKernelSmoothness):
        smooth(phi(0, 0.0), KernelSpec("P", 1.0, 0.5), 2, [0.0])


def test_singular_jump():
    from nlpoisson.piecewise import ExprPiece, PiecewiseSmoothFunction

    f = PiecewiseSmoothFunction([0.0], [ExprPiece(sp.Integer(0)), ExprPiece(sp.sqrt(X))], singular=[(0.0, 1)])
    with pytest.raises(errors.SingularJump):
        smooth(f, EX1.spec, 1, [0.0])


def test_duplicate_locations():
    with pytest.raises(errors.ValidationError):
        smooth(EX1.f, EX1.spec, 1, [0.0, 0.0])


def test_smoothed_constraint_ex1():
    rec = smooth(EX1.f, EX1.spec, 4, [0.0])
    bM = smoothed_constraint(EX1.b, rec)
    x = 8.8
    expected = np.exp(x) - sum(x**k / np.prod(range(1, k + 1)) for k in range(5))
    assert bM.eval(0, x) == pytest.approx(expected, rel=1e-12)
    assert bM.eval(0, -8.8) == 0.0
    assert with_constraint(rec, EX1.b).constraint is not None


def test_smoothed_constraint_without_corrections():
    rec = smooth(from_expr(sp.sin(X)), EX1.spec, 2, [0.0])
    assert smoothed_constraint(EX1.b, rec) is EX1.b


def test_reconstruct_round_trip():
    rec = smooth(EX1.f, EX1.spec, 4, [0.0])
    g = Grid(-8.0, 8.0, 1.6, 41)
    u = GridFunction.sample(g, EX1.u_exact)
    uM = GridFunction(g, u.values - correction_values(rec, g.nodes))
    assert np.max(np.abs(reconstruct(uM, rec).values - u.values)) <= 1e-13 * np.max(np.abs(u.values))


def test_reconstruct_step():
    rec = smooth(linear_combine([(-EX1.spec.alpha, phi(0, 0.0))]), EX1.spec, 0, [0.0])
    assert rec.coefficients[0, 0] == pytest.approx(1.0)
    g = Grid(-2.0, 2.0, 1.6, 11)
    out = reconstruct(GridFunction(g, np.zeros(g.size)), rec)
    assert np.array_equal(out.values, (g.nodes >= 0).astype(float))


def test_history_is_recorded():
    rec = smooth(EX1.f, EX1.spec, 2, [0.0])
    assert len(rec.sources) == 4
    assert rec.sources[0] is EX1.f
    assert abs(rec.sources[1].jump_at(0.0, 0).magnitude) < 1e-12
