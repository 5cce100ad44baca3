"""Benchmark problems with manufactured or prescribed discontinuous data.

``ex1`` and ``ex2`` are manufactured: ``u_exact`` is given and ``f = L u``
is a long closed form for the quartic kernel.  ``ex3`` only prescribes the
source; its constraint has to be constructed.

The printed closed forms for ex1/ex2 contain two misprints (a missing
factor ``delta`` and a flipped sign).  :func:`printed_source` keeps the
verbatim transcription; :func:`fixture` uses the corrected branches, which
agree with quadrature of ``L u_exact`` to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import UnknownFixture, ValidationError
from .kernels import KernelSpec
from .operator import apply_L_quadrature
from .piecewise import MAX_ORDER, ExprPiece, PiecewiseSmoothFunction, X, ZERO, _exact

FIXTURE_IDS = ("ex1", "ex2", "ex3")


@dataclass(frozen=True)
class Fixture:
    id: str
    domain: tuple[float, float]
    delta: float
    spec: KernelSpec
    f: PiecewiseSmoothFunction = field(repr=False)
    jumps: tuple[float, ...]
    u_exact: PiecewiseSmoothFunction | None = field(default=None, repr=False)
    b: PiecewiseSmoothFunction | None = field(default=None, repr=False)
    construct_constraint: bool = False
    description: str = ""
    corrections: tuple[str, ...] = ()


def _ex1_branches(d, verbatim: bool):
    x, E = X, sp.exp
    # the printed last branch has -120 e^delta where -120 delta e^delta is correct
    t = -120 * E(d) if verbatim else -120 * d * E(d)
    return [
        sp.Integer(0),
        -105 / d**7 * (24 - 24 * E(x + d) + 24 * x + 12 * x**2 + 4 * x**3 + x**4 + 24 * d
                       + 24 * x * d + 12 * x**2 * d + 4 * x**3 * d + 12 * d**2 + 12 * x * d**2
                       + 6 * x**2 * d**2 + 4 * d**3 + 4 * x * d**3 + d**4),
        -21 / d**7 * (120 - 120 * E(x + d) + 120 * x + 60 * x**2 + 20 * x**3 + 5 * x**4 - 120 * d
                      + 240 * d * E(x) - 120 * d * x - 60 * x**2 * d - 20 * x**3 * d + 60 * d**2
                      + 60 * x * d**2 + 30 * x**2 * d**2 - 20 * d**3 + 40 * d**3 * E(x)
                      - 20 * x * d**3 + 5 * d**4 + 2 * d**5 * E(x)),
        42 / d**7 * E(x - d) * (-60 + 60 * E(2 * d) + t - 20 * d**3 * E(d) - d**5 * E(d)),
    ]


def _ex2_branches(d, verbatim: bool):
    x, E, S, C = X, sp.exp, sp.sin, sp.cos
    e4 = E(4)
    # the printed second branch has +80x where -80x is correct
    t = 80 * x if verbatim else -80 * x
    return [
        -42 / d**7 * (-60 * C(2 + x - d) + 60 * C(2 + x + d) + 120 * d * S(2 + x)
                      - 20 * d**3 * S(2 + x) + d**5 * S(2 + x)),
        -21 / d**7 * (-40 + t + 60 * x**2 + 40 * x**3 + 5 * x**4 - 80 * d + 120 * d * x
                      + 120 * d * x**2 + 20 * d * x**3 + 60 * d**2 + 120 * d**2 * x
                      + 30 * d**2 * x**2 + 40 * d**3 + 20 * d**3 * x + 5 * d**4
                      - 120 * C(2 + x - d) + 240 * d * S(2 + x) - 40 * d**3 * S(2 + x)
                      + 2 * d**5 * S(2 + x)),
        -105 / d**7 * (-8 - 16 * x + 12 * x**2 + 8 * x**3 + x**4 + 16 * d - 24 * x * d
                       - 24 * x**2 * d - 4 * x**3 * d + 12 * d**2 + 24 * x * d**2
                       + 6 * x**2 * d**2 - 8 * d**3 - 4 * x * d**3 + d**4 - 24 * C(2 + x - d)),
        sp.Integer(0),
        -105 / (e4 * d**7) * (120 * e4 - 24 * E(x + d) - 136 * e4 * x + 60 * e4 * x**2
                              - 12 * e4 * x**3 + e4 * x**4 - 136 * e4 * d + 120 * e4 * x * d
                              - 36 * e4 * x**2 * d + 4 * e4 * x**3 * d + 60 * e4 * d**2
                              - 36 * e4 * x * d**2 + 6 * e4 * x**2 * d**2 - 12 * e4 * d**3
                              + 4 * e4 * x * d**3 + e4 * d**4),
        -21 / (e4 * d**7) * (600 * e4 - 120 * E(x + d) - 680 * e4 * x + 300 * e4 * x**2
                             - 60 * e4 * x**3 + 5 * e4 * x**4 + 680 * e4 * d + 240 * E(x) * d
                             - 600 * e4 * x * d + 180 * e4 * x**2 * d - 20 * e4 * x**3 * d
                             + 300 * e4 * d**2 - 180 * e4 * x * d**2 + 30 * e4 * x**2 * d**2
                             + 60 * e4 * d**3 + 40 * E(x) * d**3 - 20 * e4 * x * d**3
                             + 5 * e4 * d**4 + 2 * E(x) * d**5),
        42 / d**7 * E(x - d - 4) * (-60 + 60 * E(2 * d) - 120 * d * E(d) - 20 * d**3 * E(d)
                                    - d**5 * E(d)),
    ]


def _source(fid: str, delta: float, verbatim: bool) -> PiecewiseSmoothFunction:
    d = _exact(delta)
    if fid == "ex1":
        bps = [-delta, 0.0, delta]
        exprs = _ex1_branches(d, verbatim)
    elif fid == "ex2":
        bps = [-2.0 - delta, -2.0, -2.0 + delta, 4.0 - delta, 4.0, 4.0 + delta]
        exprs = _ex2_branches(d, verbatim)
    else:
        raise UnknownFixture(fid)
    return PiecewiseSmoothFunction(bps, [ExprPiece(e) for e in exprs], MAX_ORDER)


def printed_source(fid: str, delta: float = 1.6) -> PiecewiseSmoothFunction:
    """Closed-form source exactly as published, misprints included."""
    _check_delta(fid, delta)
    return _source(fid, delta, verbatim=True)


def _check_delta(fid: str, delta: float) -> None:
    if fid == "ex2" and not delta < 3:
        raise ValidationError("the ex2 closed form requires delta < 3")


def _u_exact(fid: str) -> PiecewiseSmoothFunction:
    if fid == "ex1":
        return PiecewiseSmoothFunction([0.0], [ZERO, ExprPiece(sp.exp(X))], MAX_ORDER)
    return PiecewiseSmoothFunction(
        [-2.0, 4.0], [ExprPiece(sp.sin(X + 2)), ZERO, ExprPiece(sp.exp(X - 4))], MAX_ORDER
    )


def _ex3_source() -> PiecewiseSmoothFunction:
    right = 10 / (6 * X**2 + sp.Rational(4, 5))
    left = sp.tanh(3 * X) + 1
    return PiecewiseSmoothFunction([0.0], [ExprPiece(left), ExprPiece(right)], MAX_ORDER)


_CORRECTIONS = {
    "ex1": ("branch x >= delta: coefficient -120 e^delta corrected to -120 delta e^delta",),
    "ex2": ("branch -2-delta < x <= -2: term +80x corrected to -80x",),
}


def fixture(fid: str, delta: float | None = None) -> Fixture:
    """Return a benchmark fixture by id (``ex1``, ``ex2`` or ``ex3``)."""
    fid = str(fid).lower()
    if fid in ("1", "2", "3"):
        fid = "ex" + fid
    if fid not in FIXTURE_IDS:
        raise UnknownFixture(f"unknown fixture {fid!r}; choose from {', '.join(FIXTURE_IDS)}")
    if fid == "ex3":
        delta = 0.4 if delta is None else float(delta)
        return Fixture(
            "ex3", (-2.0, 2.0), delta, KernelSpec("quartic", delta), _ex3_source(), (0.0,),
            construct_constraint=True,
            description="f = 10/(6x^2+0.8) for x >= 0, tanh(3x)+1 for x < 0; constructed constraint",
        )
    delta = 1.6 if delta is None else float(delta)
    _check_delta(fid, delta)
    u = _u_exact(fid)
    desc = {
        "ex1": "u = e^x for x >= 0, 0 otherwise",
        "ex2": "u = sin(x+2) for x <= -2, 0 on (-2,4), e^(x-4) for x >= 4",
    }[fid]
    return Fixture(
        fid, (-8.0, 8.0), delta, KernelSpec("quartic", delta), _source(fid, delta, verbatim=False),
        (0.0,) if fid == "ex1" else (-2.0, 4.0), u_exact=u, b=u, description=desc,
        corrections=_CORRECTIONS[fid],
    )


def transcription_report(fid: str, n: int = 200, verbatim: bool = False) -> dict:
    """Max deviation between a closed-form source and quadrature of ``L u_exact``.

    Returns the overall maximum and the maximum per branch.
    """
    fx = fixture(fid)
    if fx.u_exact is None:
        raise ValidationError(f"{fid} has no manufactured solution")
    f = printed_source(fid, fx.delta) if verbatim else fx.f
    a1, a2 = fx.domain
    x = np.linspace(a1, a2, n + 2)[1:-1]
    ref = apply_L_quadrature(fx.u_exact, fx.spec, x)
    dev = np.abs(f.eval(0, x) - ref)
    branch = np.searchsorted(np.array(f.breakpoints), x, side="right")
    per_branch = {int(i): float(dev[branch == i].max()) for i in np.unique(branch)}
    return {"max": float(dev.max()), "per_branch": per_branch, "points": n}
