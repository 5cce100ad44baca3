"""Volume-constrained solves, the periodic solve and constraint construction.

The bounded problem ``L u = f`` on ``(a1, a2)``, ``u = b`` on the collar, is
discretized on a uniform grid.  Unknowns are the nodes strictly inside
``(a1, a2)``; collar nodes (endpoints included) carry ``b`` exactly.

Two backends share this layout:

``spectral``
    The window is embedded in a periodic box.  Beyond the right collar the
    box is filled with a Hermite polynomial joining the derivatives of
    ``b`` at the two outer collar edges, so the periodic data are as smooth
    as ``b`` itself.  The operator is applied with the exact Fourier
    multiplier of the kernel, and the linear system for the unknowns is
    solved by GMRES preconditioned with the dense product-integration
    matrix.

``dense``
    Product-integration collocation matrix and an LU factorization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.interpolate import BPoly
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import KrylovStall, NearZeroMultiplier, SingularSystem, ValidationError
from .kernels import KernelSpec, multiplier
from .operator import Grid, GridFunction, pi_matrix
from .piecewise import ExprPiece, FuncPiece, PiecewiseSmoothFunction, X, _exact, linear_combine
from .smoothing import SmoothingRecord, reconstruct, smooth, smoothed_constraint

log = logging.getLogger(__name__)

BACKENDS = ("spectral", "dense")


@dataclass(frozen=True)
class SolveConfig:
    backend: str = "spectral"
    n_interior: int = 81
    krylov_tol: float = 1e-12
    krylov_max_iter: int = 2000
    embedding_pad: float | None = None  # padding length; None means 4*delta
    hermite_order: int = 6

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}")
        if self.n_interior < 5:
            raise ValidationError("n_interior must be at least 5")
        if not self.krylov_tol > 0:
            raise ValidationError("krylov_tol must be positive")
        if self.krylov_max_iter < 1:
            raise ValidationError("krylov_max_iter must be positive")
        if self.embedding_pad is not None and not self.embedding_pad > 0:
            raise ValidationError("embedding_pad must be positive")
        if self.hermite_order < 0:
            raise ValidationError("hermite_order must be non-negative")


@dataclass
class DiscreteSolution:
    grid: Grid
    values: GridFunction = field(repr=False)
    level: int | None
    backend: str
    residual: float
    tolerance: float
    record: SmoothingRecord | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def verify(self) -> bool:
        return self.residual <= self.tolerance


# --------------------------------------------------------------------------
# helpers


def _sample(fn, x: np.ndarray, k: int = 0, side: str = "right") -> np.ndarray:
    return np.asarray(fn.eval(k, x, side=side), dtype=float)


def _hermite_padding(
    b, x_right: float, x_left_wrapped: float, x_left: float, q: int, xs: np.ndarray,
    trend=None,
):
    """Polynomial on [x_right, x_left_wrapped] matching b's derivatives up to q.

    ``trend(x, k)`` is subtracted from b before matching.
    """
    q = min(q, b.max_order)
    dr = [float(_sample(b, np.array([x_right]), k, "left")[0]) for k in range(q + 1)]
    dl = [float(_sample(b, np.array([x_left]), k, "right")[0]) for k in range(q + 1)]
    if trend is not None:
        dr = [v - trend(x_right, k) for k, v in enumerate(dr)]
        dl = [v - trend(x_left, k) for k, v in enumerate(dl)]
    poly = BPoly.from_derivatives([x_right, x_left_wrapped], [dr, dl])
    return poly(xs)


class _SpectralSystem:
    """Restriction of the periodic multiplier operator to the unknown nodes."""

    def __init__(self, spec: KernelSpec, grid: Grid, pad_nodes: int):
        self.grid = grid
        self.nw = grid.size
        self.nb = self.nw + pad_nodes
        xi = 2.0 * np.pi * np.fft.rfftfreq(self.nb, d=grid.h)
        self.symbol = multiplier(spec, xi)
        self.unknown = grid.unknown

    def apply_full(self, v: np.ndarray) -> np.ndarray:
        return np.fft.irfft(self.symbol * np.fft.rfft(v), n=self.nb)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        v = np.zeros(self.nb)
        v[self.unknown] = u
        return self.apply_full(v)[self.unknown]


def solve_constrained(
    f: PiecewiseSmoothFunction,
    b: PiecewiseSmoothFunction,
    spec: KernelSpec,
    cfg: SolveConfig,
    domain: tuple[float, float],
) -> DiscreteSolution:
    """Solve ``L u = f`` in ``domain`` with ``u = b`` on the collar."""
    a1, a2 = map(float, domain)
    grid = Grid(a1, a2, spec.delta, cfg.n_interior)
    grid.warn_if_misaligned()
    x = grid.nodes
    U, C = grid.unknown, grid.constrained
    if len(U) == 0:
        raise ValidationError("no interior unknowns")
    fu = _sample(f, x[U])
    bc = _sample(b, x[C])
    if cfg.backend == "dense":
        values, residual, scale, meta = _solve_dense(spec, grid, fu, bc)
    else:
        values, residual, scale, meta = _solve_spectral(spec, grid, fu, b, bc, cfg)
    tol = cfg.krylov_tol * scale
    if not np.all(np.isfinite(values)):
        raise SingularSystem("solution contains non-finite values")
    if residual > tol:
        if cfg.backend == "dense":
            raise SingularSystem(f"dense residual {residual:.3g} exceeds {tol:.3g}")
        raise KrylovStall(f"residual {residual:.3g} exceeds target {tol:.3g}")
    full = np.empty(grid.size)
    full[U] = values
    full[C] = bc
    return DiscreteSolution(grid, GridFunction(grid, full), None, cfg.backend, residual, tol, meta=meta)


def _solve_dense(spec, grid, fu, bc):
    A = pi_matrix(spec, grid)
    U, C = grid.unknown, grid.constrained
    Auu = A[np.ix_(U, U)]
    rhs = fu - A[np.ix_(U, C)] @ bc
    try:
        lu = scipy.linalg.lu_factor(Auu, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-14 * np.max(np.abs(np.diag(lu[0])))):
        raise SingularSystem("collocation matrix is numerically singular")
    u = scipy.linalg.lu_solve(lu, rhs)
    u = u + scipy.linalg.lu_solve(lu, rhs - Auu @ u)
    residual = float(np.max(np.abs(Auu @ u - rhs)))
    scale = max(float(np.max(np.abs(fu))), float(np.max(np.abs(rhs))), 1e-300)
    return u, residual, scale, {"method": "lu"}


def _solve_spectral(spec, grid, fu, b, bc, cfg: SolveConfig):
    h = grid.h
    pad_len = 4.0 * spec.delta if cfg.embedding_pad is None else cfg.embedding_pad
    pad_nodes = max(int(round(pad_len / h)), 2 * grid.n_collar + 1)
    system = _SpectralSystem(spec, grid, pad_nodes)
    x = grid.nodes
    nw, nb = system.nw, system.nb
    period = nb * h
    xs = x[-1] + h * np.arange(1, pad_nodes + 1)
    # L annihilates linear functions, so the chord of b through the outer
    # collar nodes is removed before the periodic wrap and added back after
    C, U = grid.constrained, grid.unknown
    slope = (bc[-1] - bc[0]) / (x[-1] - x[0])

    def trend(t, k=0):
        return bc[0] + slope * (t - x[0]) if k == 0 else (slope if k == 1 else 0.0)

    known = np.zeros(nb)
    known[C] = bc - trend(x[C])
    known[nw:] = _hermite_padding(b, x[-1], x[0] + period, x[0], cfg.hermite_order, xs, trend)
    rhs = fu - system.apply_full(known)[U]

    A_pi = pi_matrix(spec, grid)[np.ix_(U, U)]
    try:
        lu = scipy.linalg.lu_factor(A_pi)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    n = len(U)
    op = LinearOperator((n, n), matvec=system.matvec, dtype=float)
    prec = LinearOperator((n, n), matvec=lambda r: scipy.linalg.lu_solve(lu, r), dtype=float)

    scale = max(float(np.max(np.abs(fu))), float(np.max(np.abs(rhs))), 1e-300)
    u = scipy.linalg.lu_solve(lu, rhs)
    iterations = 0
    best = float(np.max(np.abs(system.matvec(u) - rhs)))
    # GMRES on the defect, repeated while it keeps improving the residual
    for _ in range(6):
        r = rhs - system.matvec(u)
        counter = {"n": 0}

        def cb(_x, counter=counter):
            counter["n"] += 1

        du, info = gmres(
            op, r, M=prec, rtol=1e-13, atol=0.0, restart=min(n, 60),
            maxiter=max(1, cfg.krylov_max_iter // 60), callback=cb, callback_type="pr_norm",
        )
        iterations += counter["n"]
        trial = u + du
        res = float(np.max(np.abs(system.matvec(trial) - rhs)))
        if not res < best:
            break
        improvement = best / max(res, 1e-300)
        u, best = trial, res
        if best <= 1e-15 * scale or improvement < 10.0:
            break
        if iterations >= cfg.krylov_max_iter:
            break
    meta = {"method": "gmres", "iterations": iterations, "pad_nodes": pad_nodes, "period": period}
    return u + trend(x[U]), best, scale, meta


# --------------------------------------------------------------------------
# torus


def solve_torus(f: GridFunction, spec: KernelSpec) -> GridFunction:
    """Periodic solve ``w_hat = f_hat / m`` with the zero mode pinned to 0."""
    grid = f.grid
    if not grid.is_periodic:
        raise ValidationError("solve_torus needs a periodic grid")
    n = grid.size
    fh = np.fft.rfft(f.values)
    xi = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.h)
    m = multiplier(spec, xi)
    fh[0] = 0.0
    active = np.abs(fh[1:]) > 0
    if np.any(np.abs(m[1:])[active] < 1e-14 * spec.alpha):
        raise NearZeroMultiplier("multiplier vanishes at a nonzero mode")
    wh = np.zeros_like(fh)
    wh[1:] = fh[1:] / m[1:]
    return GridFunction(grid, np.fft.irfft(wh, n=n))


class TrigInterpolant:
    """Real trigonometric interpolant of periodic samples, with derivatives."""

    def __init__(self, start: float, length: float, values: np.ndarray):
        self.start = float(start)
        self.length = float(length)
        self.n = len(values)
        self.coef = np.fft.rfft(values) / self.n
        self.xi = 2.0 * np.pi * np.arange(len(self.coef)) / self.length
        # weights so that the real part of the half spectrum rebuilds the signal
        self.weight = np.full(len(self.coef), 2.0)
        self.weight[0] = 1.0
        if self.n % 2 == 0:
            self.weight[-1] = 1.0

    def __call__(self, x, k: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        c = self.weight * self.coef * (1j * self.xi) ** k
        if self.n % 2 == 0 and k % 2 == 1:
            c[-1] = 0.0  # the Nyquist cosine has no consistent odd derivative on the grid
        for s in range(0, len(flat), 256):
            t = flat[s:s + 256, None] - self.start
            out[s:s + 256] = np.real(np.exp(1j * t * self.xi[None, :]) @ c)
        return out.reshape(x.shape)


def construct_compatible_constraint(
    f: PiecewiseSmoothFunction,
    spec: KernelSpec,
    M: int,
    domain: tuple[float, float],
    locations: Sequence[float] | None = None,
    points_per_delta: int = 64,
    blend_order: int = 6,
) -> PiecewiseSmoothFunction:
    """Constraint under which the solution has no transition-layer jumps.

    The source is smoothed to level ``M``, extended from
    ``(a1 - delta, a2 + delta)`` to a torus of length ``a2 - a1 + 4 delta``
    (a Hermite blend joins the two ends), and solved there.  The result is
    the periodic solution plus the analytic corrections, returned as a
    function on the whole line.
    """
    a1, a2 = map(float, domain)
    d = spec.delta
    record = smooth(f, spec, M, locations)
    fM = record.source
    length = a2 - a1 + 4.0 * d
    start = a1 - 2.0 * d
    n = int(math.ceil(length / d * points_per_delta - 1e-9))
    grid = Grid.periodic(start, length, n, d)
    x = grid.nodes
    values = _sample(fM, x)
    lo, hi = a1 - d, a2 + d
    outside = (x < lo) | (x > hi)
    if np.any(outside):
        xo = np.where(x[outside] < lo, x[outside] + length, x[outside])
        values[outside] = _hermite_padding(fM, hi, lo + length, lo, blend_order, xo)
    # the periodic problem is solvable only for mean-free data; since the
    # second kernel moment is 2, L[(x - x0)^2 / 2] = 1 and the mean is
    # carried exactly by a quadratic
    mean = float(values.mean())
    values = values - mean
    w = solve_torus(GridFunction(grid, values), spec)
    trig = TrigInterpolant(start, length, w.values)
    base = PiecewiseSmoothFunction([], [FuncPiece(trig, name="periodic solution")])
    x0 = _exact(0.5 * (a1 + a2))
    quad = PiecewiseSmoothFunction([], [ExprPiece((X - x0) ** 2 / 2)])
    return linear_combine([(1.0, base), (mean, quad)] + record.corrections())


# --------------------------------------------------------------------------
# full pipeline


def resolve(
    f: PiecewiseSmoothFunction,
    b: PiecewiseSmoothFunction,
    spec: KernelSpec,
    M: int | None,
    cfg: SolveConfig,
    domain: tuple[float, float],
    locations: Sequence[float] | None = None,
) -> DiscreteSolution:
    """Smooth, solve the smoothed problem and add the corrections back.

    ``M=None`` solves the unsmoothed problem directly.
    """
    if M is None:
        sol = solve_constrained(f, b, spec, cfg, domain)
        sol.level = None
        return sol
    record = smooth(f, spec, M, locations)
    bM = smoothed_constraint(b, record)
    sol = solve_constrained(record.source, bM, spec, cfg, domain)
    values = reconstruct(sol.values, record).values
    C = sol.grid.constrained
    values[C] = _sample(b, sol.grid.nodes[C])
    sol.values = GridFunction(sol.grid, values)
    sol.level = M
    sol.record = record
    return sol
