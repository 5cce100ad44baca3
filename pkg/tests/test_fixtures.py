import numpy as np
import pytest

from nlpoisson import errors
from nlpoisson.fixtures import FIXTURE_IDS, printed_source, fixture, transcription_report


def test_fixture_parameters():
    for fid, dom, d, jumps in (("ex1", (-8, 8), 1.6, (0.0,)), ("ex2", (-8, 8), 1.6, (-2.0, 4.0)),
                               ("ex3", (-2, 2), 0.4, (0.0,))):
        fx = fixture(fid)
        assert fx.domain == dom and fx.delta == d and fx.jumps == jumps
        assert fx.spec.family == "quartic"
    assert fixture("ex3").construct_constraint and fixture("ex3").u_exact is None


def test_fixture_id_forms():
    assert fixture("1").id == "ex1" and fixture("EX2").id == "ex2"
    with pytest.raises(errors.UnknownFixture):
        fixture("ex9")


def test_ex2_delta_limit():
    with pytest.raises(errors.ValidationError):
        fixture("ex2", delta=3.0)
    fixture("ex2", delta=2.9)


def test_ex1_zero_left_of_horizon():
    fx = fixture("ex1")
    assert fx.f.eval(0, -2 * fx.delta) == 0.0


def test_ex2_zero_in_middle():
    fx = fixture("ex2")
    x = np.linspace(-2 + fx.delta + 1e-9, 4 - fx.delta - 1e-9, 21)
    assert np.all(fx.f.eval(0, x) == 0.0)


@pytest.mark.parametrize("fid", ["ex1", "ex2"])
def test_transcription_random_points(fid):
    from nlpoisson.operator import apply_L_quadrature

    fx = fixture(fid)
    x = np.random.default_rng(11).uniform(-8, 8, 30)
    assert np.max(np.abs(apply_L_quadrature(fx.u_exact, fx.spec, x) - fx.f.eval(0, x))) <= 1e-9


def test_verbatim_misprints_detected():
    r1 = transcription_report("ex1", verbatim=True)
    r2 = transcription_report("ex2", verbatim=True)
    # the misprinted branches are the last of ex1 and the second of ex2
    assert r1["per_branch"][3] > 1e3 and max(v for k, v in r1["per_branch"].items() if k != 3) < 1e-8
    assert r2["per_branch"][1] > 10 and max(v for k, v in r2["per_branch"].items() if k != 1) < 1e-8


def test_corrected_branches_differ_only_where_stated():
    x = np.linspace(-1.5, 1.5, 31)
    assert np.array_equal(printed_source("ex1").eval(0, x), fixture("ex1").f.eval(0, x))
    assert len(fixture("ex1").corrections) == 1


def test_ex3_has_no_manufactured_solution():
    with pytest.raises(errors.ValidationError):
        transcription_report("ex3")


def test_ids():
    assert FIXTURE_IDS == ("ex1", "ex2", "ex3")
