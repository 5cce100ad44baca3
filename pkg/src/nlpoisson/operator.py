"""Application of the nonlocal operator.

``L u(x) = int (u(y) - u(x)) K(x - y) dy = (u * K)(x) - alpha u(x)``.

Two paths are provided: adaptive quadrature on a piecewise-smooth function
(the trusted oracle) and a discrete convolution on a uniform grid using
product-integration weights (exact kernel moments against hat functions).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, signal

from .errors import MisalignedHorizon, QuadratureNonConvergence, ValidationError
from .kernels import KernelSpec, eval_kernel, multiplier
from .piecewise import PiecewiseSmoothFunction

ALIGN_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[a1, a2]`` with a collar of width ``delta`` on each side.

    ``n_interior`` counts the nodes of the closed interval ``[a1, a2]``.
    A periodic grid (``periodic_length`` set) has no collar; its nodes are
    ``a1 + h*i`` for ``i < n_interior`` with ``h = periodic_length / n_interior``.
    """

    a1: float
    a2: float
    delta: float
    n_interior: int
    periodic_length: float | None = None

    def __post_init__(self):
        if not self.a2 > self.a1:
            raise ValidationError("need a1 < a2")
        if self.delta <= 0:
            raise ValidationError("delta must be positive")
        if self.n_interior < 2:
            raise ValidationError("need at least two nodes")

    @classmethod
    def periodic(cls, start: float, length: float, n: int, delta: float) -> "Grid":
        return cls(start, start + length, delta, n, periodic_length=length)

    @property
    def is_periodic(self) -> bool:
        return self.periodic_length is not None

    @property
    def h(self) -> float:
        if self.is_periodic:
            return self.periodic_length / self.n_interior
        return (self.a2 - self.a1) / (self.n_interior - 1)

    @property
    def ratio(self) -> float:
        return self.delta / self.h

    @property
    def delta_aligned(self) -> bool:
        r = self.ratio
        return abs(r - round(r)) < ALIGN_TOL * max(1.0, r)

    @property
    def n_collar(self) -> int:
        return 0 if self.is_periodic else int(round(self.ratio))

    @property
    def size(self) -> int:
        return self.n_interior + 2 * self.n_collar

    @property
    def nodes(self) -> np.ndarray:
        return self.a1 + self.h * (np.arange(self.size) - self.n_collar)

    @property
    def omega(self) -> slice:
        """Nodes of the closed interval [a1, a2]."""
        return slice(self.n_collar, self.n_collar + self.n_interior)

    @property
    def unknown(self) -> np.ndarray:
        """Indices of nodes strictly inside (a1, a2)."""
        return np.arange(self.n_collar + 1, self.n_collar + self.n_interior - 1)

    @property
    def constrained(self) -> np.ndarray:
        """Indices of collar nodes, including the endpoints a1 and a2."""
        mask = np.ones(self.size, dtype=bool)
        mask[self.unknown] = False
        return np.flatnonzero(mask)

    def index_of(self, x: float) -> int:
        """Index of the node at ``x``; raises if ``x`` is not a node."""
        i = (x - self.nodes[0]) / self.h
        j = int(round(i))
        if abs(i - j) > 1e-9 or not 0 <= j < self.size:
            raise ValidationError(f"{x} is not a grid node")
        return j

    def warn_if_misaligned(self) -> None:
        if not self.is_periodic and not self.delta_aligned:
            warnings.warn(
                f"delta/h = {self.ratio:.6g} is not an integer; the collar is truncated to "
                f"{self.n_collar} nodes",
                MisalignedHorizon,
                stacklevel=3,
            )


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValidationError(
                f"expected {self.grid.size} values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("grid function values must be finite")

    @classmethod
    def sample(cls, grid: Grid, fn) -> "GridFunction":
        x = grid.nodes
        vals = fn.eval(0, x) if isinstance(fn, PiecewiseSmoothFunction) else fn(x)
        return cls(grid, np.asarray(vals, dtype=float))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes


# --------------------------------------------------------------------------
# quadrature oracle

QUAD_TOL = 1e-11


def _quad(fn, lo, hi, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, lo, hi, limit=200, full_output=1, **kw)[:2]


def apply_L_quadrature(
    u: PiecewiseSmoothFunction, spec: KernelSpec, x, tol: float = QUAD_TOL
):
    """Adaptive quadrature of ``int (u(y) - u(x)) K(x - y) dy``.

    Integration is split at ``x``, ``x +- delta`` and every breakpoint of
    ``u`` in between.  ``u`` is taken as zero outside ``u.support``.
    """
    xa = np.asarray(x, dtype=float)
    out = np.array([_apply_one(u, spec, float(v), tol) for v in np.atleast_1d(xa).ravel()])
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


def _apply_one(u: PiecewiseSmoothFunction, spec: KernelSpec, x: float, tol: float) -> float:
    d = spec.delta
    lo, hi = x - d, x + d
    cuts = {lo, x, hi}
    cuts.update(b for b in u.breakpoints if lo < b < hi)
    if u.support is not None:
        cuts.update(s for s in u.support if lo < s < hi)
    cuts = sorted(cuts)
    support = u.support

    def uval(y):
        if support is not None and not (support[0] <= y <= support[1]):
            return 0.0
        return u.eval(0, y)

    ux = uval(x)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        piece = u.piece_at(mid)
        zero_outside = support is not None and not (support[0] <= mid <= support[1])

        def diff(y, piece=piece, zero_outside=zero_outside):
            val = 0.0 if zero_outside else float(piece(np.array([y]), 0)[0])
            return val - ux

        if spec.family == "S" and (a == x or b == x):
            # algebraic endpoint weight |y - x|^(-beta) handled by the rule
            wvar = (-spec.beta, 0.0) if a == x else (0.0, -spec.beta)
            val, err = _quad(diff, a, b, weight="alg", wvar=wvar, epsabs=tol * 1e-2, epsrel=1e-13)
            val, err = spec.c * val, spec.c * err
        else:
            def integrand(y, diff=diff):
                return diff(y) * float(eval_kernel(spec, x - y))

            val, err = _quad(integrand, a, b, epsabs=tol * 1e-2, epsrel=1e-13)
        if not math.isfinite(val) or err > max(tol, 1e-13 * abs(val)):
            raise QuadratureNonConvergence(
                f"quadrature error estimate {err:.3g} on [{a}, {b}] at x={x}"
            )
        total += val
    return total


# --------------------------------------------------------------------------
# product-integration weights


@lru_cache(maxsize=64)
def pi_weights(spec: KernelSpec, h: float) -> np.ndarray:
    """Weights w_m, m = -n..n, with ``sum_m w_m u(x + m h) ~ (u * K)(x)``.

    Each weight is the integral of K against the hat function centred at
    ``m h``, computed from the exact moments A_0 and A_1 of the kernel.
    """
    d = spec.delta
    n = int(math.ceil(d / h - 1e-12))
    edges = np.minimum(h * np.arange(n + 1), d)
    a, b = edges[:-1], edges[1:]
    i0 = spec.moment(0, b) - spec.moment(0, a)
    i1 = spec.moment(1, b) - spec.moment(1, a)
    to_left = (b * i0 - i1) / h   # weight of node at a (cell index m)
    to_right = (i1 - a * i0) / h  # weight of node at a + h
    half = np.zeros(n + 1)
    half[:-1] += to_left
    half[1:] += to_right
    w = np.concatenate([half[:0:-1], [2.0 * half[0]], half[1:]])
    return w


def apply_L_grid(u: GridFunction, spec: KernelSpec, method: str | None = None) -> GridFunction:
    """Discrete ``u * K - alpha u`` at every node, zero outside the node range.

    ``method`` is ``"pi"`` (product-integration weights) or ``"multiplier"``
    (exact Fourier symbol, periodic grids only).  Periodic grids default to
    the multiplier, which inverts :func:`solver.solve_torus` exactly.
    """
    grid = u.grid
    if method is None:
        method = "multiplier" if grid.is_periodic else "pi"
    if method not in ("pi", "multiplier"):
        raise ValidationError(f"unknown method {method!r}")
    if method == "multiplier":
        if not grid.is_periodic:
            raise ValidationError("the multiplier path needs a periodic grid")
        n = grid.size
        xi = 2.0 * np.pi * np.fft.rfftfreq(n, d=grid.h)
        vals = np.fft.irfft(multiplier(spec, xi) * np.fft.rfft(u.values), n=n)
        return GridFunction(grid, vals)
    grid.warn_if_misaligned()
    w = pi_weights(spec, grid.h)
    if grid.is_periodic:
        n = grid.size
        kern = np.zeros(n)
        half = len(w) // 2
        for m, wm in zip(range(-half, half + 1), w):
            kern[m % n] += wm
        conv = np.fft.irfft(np.fft.rfft(u.values) * np.fft.rfft(kern), n=n)
    else:
        conv = signal.fftconvolve(u.values, w, mode="same")
    return GridFunction(grid, conv - float(np.sum(w)) * u.values)


def pi_matrix(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """Dense matrix of the product-integration operator on all grid nodes."""
    w = pi_weights(spec, grid.h)
    half = len(w) // 2
    n = grid.size
    offs = np.arange(n)[:, None] - np.arange(n)[None, :]
    A = np.zeros((n, n))
    band = np.abs(offs) <= half
    A[band] = w[half - offs[band]]
    A[np.diag_indices(n)] -= float(np.sum(w))
    return A
