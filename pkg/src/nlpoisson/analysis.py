"""Convergence studies and numerical checks of the regularity theory."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from numpy.polynomial import chebyshev

from .errors import InsufficientStencil, ValidationError
from .fixtures import Fixture, fixture
from .kernels import KernelSpec, L_phi, eval_kernel
from .operator import Grid, GridFunction, apply_L_quadrature
from .piecewise import PiecewiseSmoothFunction, constant, phi
from .solver import DiscreteSolution, SolveConfig, construct_compatible_constraint, resolve

SIGNIFICANCE = 20.0

# --------------------------------------------------------------------------
# convergence studies


def observed_orders(Ns: Sequence[int], errors: Sequence[float]) -> list[float]:
    """log(E1/E2) / log(N2/N1) for consecutive rows."""
    out = []
    for (n1, e1), (n2, e2) in zip(zip(Ns, errors), zip(Ns[1:], errors[1:])):
        if e1 > 0 and e2 > 0:
            out.append(math.log(e1 / e2) / math.log(n2 / n1))
        else:
            out.append(math.nan)
    return out


@dataclass
class ConvergenceReport:
    example: str
    level: int | None
    backend: str
    Ns: list[int]
    errors: list[float]
    orders: list[float] = field(default_factory=list)
    norm: str = "max over shared nodes"

    def __post_init__(self):
        if not self.orders:
            self.orders = observed_orders(self.Ns, self.errors)

    @property
    def level_label(self) -> str:
        return "none" if self.level is None else str(self.level)

    def rows(self) -> list[tuple[int, float, float | None]]:
        return [(n, e, None if i == 0 else self.orders[i - 1]) for i, (n, e) in enumerate(zip(self.Ns, self.errors))]

    @property
    def final_order(self) -> float:
        return self.orders[-1] if self.orders else math.nan


_constraint_cache: dict = {}


def compatible_constraint_for(fx: Fixture) -> PiecewiseSmoothFunction:
    """Level-4 constructed constraint for a fixture, cached per fixture."""
    key = (fx.id, fx.delta)
    if key not in _constraint_cache:
        _constraint_cache[key] = construct_compatible_constraint(fx.f, fx.spec, 4, fx.domain, fx.jumps)
    return _constraint_cache[key]


def fixture_constraint(fx: Fixture) -> PiecewiseSmoothFunction:
    return compatible_constraint_for(fx) if fx.construct_constraint else fx.b


def convergence_study(
    example: str | Fixture,
    Ns: Sequence[int],
    M: int | None,
    cfg: SolveConfig | None = None,
    spec: KernelSpec | None = None,
    reference_n: int = 401,
    reference_level: int = 4,
    jobs: int = 1,
) -> ConvergenceReport:
    """Errors and observed orders of the smoothed solver on a fixture.

    With a manufactured solution the error is measured against it on the
    nodes of the closed domain.  Otherwise a single fine-grid solution
    (``reference_n`` nodes, level ``reference_level``) is the reference and
    only nested grids are accepted.  ``jobs > 1`` runs the solves for
    different N in a thread pool.
    """
    fx = example if isinstance(example, Fixture) else fixture(example)
    spec = fx.spec if spec is None else spec
    cfg = SolveConfig() if cfg is None else cfg
    b = fixture_constraint(fx)
    ref_values = None
    if fx.u_exact is None:
        for n in Ns:
            if (reference_n - 1) % (n - 1) != 0:
                raise ValidationError(f"N={n} is not nested in the reference grid N={reference_n}")
        ref = resolve(fx.f, b, spec, reference_level, _with_n(cfg, reference_n), fx.domain, fx.jumps)
        ref_values = ref.values.values[ref.grid.omega]

    def error_at(n):
        sol = resolve(fx.f, b, spec, M, _with_n(cfg, n), fx.domain, fx.jumps)
        om = sol.grid.omega
        u = sol.values.values[om]
        if ref_values is None:
            exact = fx.u_exact.eval(0, sol.grid.nodes[om])
        else:
            exact = ref_values[:: (reference_n - 1) // (n - 1)]
        return float(np.max(np.abs(u - exact)))

    if jobs > 1 and len(Ns) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(error_at, Ns))
    else:
        errors = [error_at(n) for n in Ns]
    return ConvergenceReport(fx.id, M, cfg.backend, list(Ns), errors)


def _with_n(cfg: SolveConfig, n: int) -> SolveConfig:
    return replace(cfg, n_interior=int(n))


# --------------------------------------------------------------------------
# finite-difference jump estimation


@lru_cache(maxsize=256)
def fd_weights(offsets: tuple, k: int) -> np.ndarray:
    """Weights for the k-th derivative at 0 from samples at ``offsets`` (units of h)."""
    pts = [sp.nsimplify(o) for o in offsets]
    w = sp.finite_diff_weights(k, pts, 0)[k][-1]
    return np.array([float(v) for v in w])


def estimate_jump_fd(values: GridFunction, p: float, k: int, extra: int = 0) -> float:
    """One-sided finite-difference estimate of ``[u^(k)]_p``.

    Each side uses ``k + 3 + extra`` nodes strictly on that side of ``p``;
    the node at ``p`` itself is skipped because it only carries one limit.
    """
    if k < 0 or k > 4:
        raise ValidationError("estimate_jump_fd supports 0 <= k <= 4")
    grid = values.grid
    x = grid.nodes
    h = grid.h
    npts = k + 3 + extra
    s = (p - x[0]) / h
    on_node = abs(s - round(s)) < 1e-9
    if on_node:
        i0 = int(round(s))
        right = np.arange(i0 + 1, i0 + 1 + npts)
        left = np.arange(i0 - npts, i0)
    else:
        i0 = int(math.floor(s))
        right = np.arange(i0 + 1, i0 + 1 + npts)
        left = np.arange(i0 - npts + 1, i0 + 1)
    if left[0] < 0 or right[-1] >= grid.size:
        raise InsufficientStencil(f"need {npts} nodes on each side of {p}")
    v = values.values

    def one_side(idx):
        offs = tuple(round((x[i] - p) / h, 9) for i in idx)
        return float(fd_weights(offs, k) @ v[idx]) / h**k

    return one_side(right) - one_side(left)


# --------------------------------------------------------------------------
# cascades


@dataclass
class CascadeEntry:
    location: float
    order: int
    magnitude: float
    significance: float

    @property
    def flagged(self) -> bool:
        return self.significance > SIGNIFICANCE


@dataclass
class CascadeReport:
    entries: list[CascadeEntry]
    controls: list[CascadeEntry]

    def flagged(self) -> list[CascadeEntry]:
        return [e for e in self.entries if e.flagged]

    def at(self, location: float, order: int) -> CascadeEntry:
        for e in self.entries:
            if abs(e.location - location) < 1e-9 and e.order == order:
                return e
        raise KeyError((location, order))


def cascade_scan(
    u: DiscreteSolution | GridFunction,
    spec: KernelSpec,
    kmax: int,
    center: float = 0.0,
    n_controls: int = 10,
    seed: int = 0,
) -> CascadeReport:
    """Estimate derivative jumps at ``center +- j delta`` for j = 1..kmax.

    Orders 0..kmax+1 are examined.  Each candidate gets its own noise
    floor: the median absolute estimate at up to ``n_controls`` random
    nodes within one horizon of it, kept away from every point where a
    jump can legitimately sit (the multiples of delta from the centre and
    from either end of the domain).  A local floor keeps the test
    meaningful when the solution varies over orders of magnitude.
    """
    gf = u.values if isinstance(u, DiscreteSolution) else u
    grid = gf.grid
    d = spec.delta
    a1, a2 = grid.a1, grid.a2
    orders = range(0, min(kmax + 1, 4) + 1)
    width = (max(orders) + 3.5) * grid.h  # one-sided stencil reach plus a margin
    candidates = [center + s * j * d for j in range(1, kmax + 1) for s in (-1, 1)]
    candidates = sorted(c for c in candidates if a1 + width < c < a2 - width)
    nmax = int(math.ceil((a2 - a1) / d)) + 1
    structural = [center + j * d for j in range(-nmax, nmax + 1)]
    structural += [a1 + j * d for j in range(nmax + 1)] + [a2 - j * d for j in range(nmax + 1)]
    structural = np.array(structural)
    x = grid.nodes[grid.omega]
    ok = (x > a1 + width) & (x < a2 - width)
    ok &= np.min(np.abs(x[:, None] - structural[None, :]), axis=1) > width
    rng = np.random.default_rng(seed)
    tiny = np.finfo(float).tiny
    entries, controls = [], []
    for c in candidates:
        pool = x[ok & (np.abs(x - c) <= d)]
        if len(pool) < 3:
            raise InsufficientStencil(f"no room for control points near {c}")
        ctrl = np.sort(rng.choice(pool, size=min(n_controls, len(pool)), replace=False))
        for k in orders:
            cvals = [abs(estimate_jump_fd(gf, q, k)) for q in ctrl]
            floor = max(float(np.median(cvals)), tiny)
            for q, v in zip(ctrl, cvals):
                controls.append(CascadeEntry(float(q), k, v, v / floor))
            est = estimate_jump_fd(gf, c, k)
            entries.append(CascadeEntry(float(c), k, est, abs(est) / floor))
    return CascadeReport(entries, controls)


# --------------------------------------------------------------------------
# blow-up probes


@dataclass
class BlowupRow:
    h: float
    n_interior: int
    peak: float


def blowup_probe(
    spec: KernelSpec,
    f: PiecewiseSmoothFunction | None = None,
    j: int = 1,
    refinements: int = 3,
    domain: tuple[float, float] | None = None,
    n0: int = 65,
) -> list[BlowupRow]:
    """Near-jump maxima of |u^(j)| under repeated halving of h.

    Dense-backend solves of ``L u = f`` with ``u = 0`` on the collar;
    ``f`` defaults to the unit step at 0.  The derivative is estimated at
    the nodes in ``(0, 4h)`` and ``(-4h, 0)`` with one-sided stencils that
    do not cross the jump.

    The default domain ``(-delta/2, delta/2)`` keeps the boundary cascade
    away from the jump and makes ``delta/h`` large, so the singular part
    dominates the smooth background already on coarse grids.
    """
    if domain is None:
        domain = (-0.5 * spec.delta, 0.5 * spec.delta)
    if j < 1:
        raise ValidationError("probe order must be at least 1")
    f = phi(0, 0.0) if f is None else f
    zero = constant(0.0)
    rows = []
    for r in range(refinements + 1):
        n = (n0 - 1) * 2**r + 1
        cfg = SolveConfig(backend="dense", n_interior=n)
        sol = resolve(f, zero, spec, None, cfg, domain)
        rows.append(BlowupRow(sol.grid.h, n, _near_jump_peak(sol.values, 0.0, j)))
    return rows


def _near_jump_peak(gf: GridFunction, p: float, j: int) -> float:
    grid = gf.grid
    x, v, h = grid.nodes, gf.values, grid.h
    i0 = grid.index_of(p)
    npts = j + 2
    best = 0.0
    for m in range(1, 4):
        right = np.arange(i0 + m, i0 + m + npts)
        w = fd_weights(tuple(range(npts)), j)
        best = max(best, abs(float(w @ v[right])) / h**j)
        left = np.arange(i0 - m - npts + 1, i0 - m + 1)
        w = fd_weights(tuple(range(-npts + 1, 1)), j)
        best = max(best, abs(float(w @ v[left])) / h**j)
    return best


# --------------------------------------------------------------------------
# jump relation


def relation_order_limit(spec: KernelSpec) -> int:
    """Highest k for which ``[u^(k)] = -[f^(k)]/alpha`` holds at a jump.

    The relation at order k needs K in C^(k-1) across the origin.
    """
    return {"S": 0, "P": 1, "quartic": 1, "G": 6, "Q": 6}[spec.family]


@dataclass
class RelationRow:
    order: int
    u_jump: float
    f_jump: float
    predicted: float
    deviation: float


def one_sided_derivatives(
    fn: Callable[[np.ndarray], np.ndarray], p: float, span: float, kmax: int, npts: int = 16
) -> tuple[np.ndarray, np.ndarray]:
    """Left/right derivatives 0..kmax at ``p`` from Chebyshev fits on each side."""
    t = 0.5 * (1 - np.cos(np.pi * (np.arange(npts) + 0.5) / npts))
    out = []
    for sgn in (-1.0, 1.0):
        xs = p + sgn * span * t
        poly = chebyshev.Chebyshev.fit(xs, fn(xs), npts - 1, domain=sorted([p, p + sgn * span]))
        out.append(np.array([poly.deriv(k)(p) if k else poly(p) for k in range(kmax + 1)]))
    return out[0], out[1]


def verify_jump_relation(
    spec: KernelSpec,
    u: PiecewiseSmoothFunction,
    kmax: int,
    p: float = 0.0,
    span: float | None = None,
    detail: bool = False,
):
    """Max deviation of ``[u^(k)]_p = -[f^(k)]_p / alpha`` for ``f = L u``.

    ``f`` is computed by quadrature on one-sided neighbourhoods of ``p``
    and its jumps are read off one-sided Chebyshev fits.  The deviation at
    order k is ``|[u^(k)] + [f^(k)]/alpha| / max(1, |[u^(k)]|)``.
    """
    limit = relation_order_limit(spec)
    if kmax > limit:
        raise ValidationError(
            f"the jump relation holds up to order {limit} for the {spec.family} kernel"
        )
    span = 0.25 * spec.delta if span is None else span
    others = [b for b in u.breakpoints if b != p]
    near = [abs(b + s * spec.delta - p) for b in list(u.breakpoints) for s in (-1, 0, 1)]
    near = [v for v in near if v > 1e-12]
    if others or near:
        span = min([span] + [0.5 * v for v in near])
    left, right = one_sided_derivatives(lambda xs: apply_L_quadrature(u, spec, xs), p, span, kmax)
    rows = []
    for k in range(kmax + 1):
        uj = u.jump_at(p, k).magnitude
        fj = float(right[k] - left[k])
        pred = -fj / spec.alpha
        rows.append(RelationRow(k, uj, fj, pred, abs(uj - pred) / max(1.0, abs(uj))))
    worst = max(r.deviation for r in rows)
    return (worst, rows) if detail else worst


# --------------------------------------------------------------------------
# derivative identity for L phi_0


@dataclass
class IdentityCheck:
    hs: list[float]
    errors: list[float]

    @property
    def orders(self) -> list[float]:
        return [math.log(e1 / e2) / math.log(h1 / h2)
                for (h1, e1), (h2, e2) in zip(zip(self.hs, self.errors),
                                              zip(self.hs[1:], self.errors[1:]))]


def derivative_identity_check(
    spec: KernelSpec, h0: float | None = None, halvings: int = 3, n_points: int = 200, seed: int = 0
) -> IdentityCheck:
    """Centered differences of ``L phi_0`` against ``K`` off the breakpoints.

    Sample points keep a distance of ``2 h0`` from ``0`` and ``+-delta``.
    """
    if not spec.bounded:
        raise ValidationError(f"the {spec.family} kernel is unbounded at the origin")
    d = spec.delta
    h0 = d / 20 if h0 is None else h0
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.5 * d, 1.5 * d, 20 * n_points)
    far = np.min(np.abs(x[:, None] - np.array([-d, 0.0, d])[None, :]), axis=1) > 2 * h0
    x = x[far][:n_points]
    if len(x) < n_points:
        raise ValidationError("too few admissible sample points")
    lphi = L_phi(spec, 0)
    k = eval_kernel(spec, x)
    hs, errs = [], []
    for r in range(halvings + 1):
        h = h0 / 2**r
        fd = (lphi.eval(0, x + h) - lphi.eval(0, x - h)) / (2 * h)
        hs.append(h)
        errs.append(float(np.max(np.abs(fd - k))))
    return IdentityCheck(hs, errs)
