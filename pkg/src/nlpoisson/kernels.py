"""Radial, compactly supported kernels and their closed-form machinery.

Every family is normalized so that its second moment is 2, which makes the
Fourier multiplier behave like ``-xi**2`` at low frequency.  For each
family we keep a table of half-line moments

    A_j(s) = int_0^s t**j K(t) dt,   0 <= s <= delta,

as sympy expressions.  The image ``L phi_k`` of the one-sided monomial is
assembled from that table by binomial expansion.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import sympy as sp
from numpy.polynomial import chebyshev
from scipy import integrate

from .errors import SingularPoint, UnsupportedOrder, ValidationError
from .piecewise import (
    MAX_ORDER,
    ExprPiece,
    PiecewiseSmoothFunction,
    X,
    ZERO,
    _exact,
    register_numeric,
)

FAMILIES = ("S", "P", "G", "Q", "quartic")
ALIASES = {
    "s": "S",
    "truncated-power": "S",
    "p": "P",
    "power-complement": "P",
    "g": "G",
    "gaussian": "G",
    "q": "Q",
    "bump": "Q",
    "quartic": "quartic",
    "k": "quartic",
}

#: Highest k for which L phi_k is tabulated.
MAX_MOMENT = 6

INF = math.inf

_S = sp.Symbol("s", nonnegative=True)


# --------------------------------------------------------------------------
# bump-family moments: a_j(r) = int_0^r t^j exp(-1/(1-t^2)) dt on [0, 1]

_BUMP_DEG = 120
_bump_cache: dict[int, chebyshev.Chebyshev] = {}
_bump_lock = threading.Lock()


def _bump_density(t, j):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = ti**j * np.exp(-1.0 / (1.0 - ti * ti))
    return out


def _bump_quad(r: float, j: int) -> float:
    if r <= 0.0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            lambda t: float(_bump_density(t, j)), 0.0, min(r, 1.0),
            epsabs=1e-15, epsrel=1e-13, limit=200,
        )
    return val


def _bump_interpolant(j: int) -> chebyshev.Chebyshev:
    poly = _bump_cache.get(j)
    if poly is None:
        with _bump_lock:
            poly = _bump_cache.get(j)
            if poly is None:
                poly = chebyshev.Chebyshev.interpolate(
                    lambda r: np.array([_bump_quad(v, j) for v in np.atleast_1d(r)]),
                    _BUMP_DEG,
                    domain=[0.0, 1.0],
                )
                _bump_cache[j] = poly
    return poly


def bump_moment_numeric(j, r):
    """Vectorized a_j(r), clipped to [0, 1]."""
    poly = _bump_interpolant(int(j))
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return poly(r)


class bump_moment(sp.Function):
    """Symbolic handle for a_j(r); differentiates exactly in r."""

    nargs = 2

    def fdiff(self, argindex=2):
        if argindex != 2:
            raise sp.ArgumentIndexError(self, argindex)
        j, r = self.args
        return r**j * sp.exp(-1 / (1 - r**2))

    def _eval_evalf(self, prec):
        j, r = self.args
        if j.is_Integer and r.is_number:
            return sp.Float(float(bump_moment_numeric(int(j), float(r))), prec)
        return None


register_numeric("bump_moment", bump_moment_numeric, bump_moment)


# --------------------------------------------------------------------------
# kernel specification


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with horizon ``delta`` and exponent ``beta`` (S, P only)."""

    family: str
    delta: float
    beta: float | None = None

    def __post_init__(self):
        fam = ALIASES.get(str(self.family).lower(), self.family)
        if fam not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValidationError("delta must be positive and finite")
        object.__setattr__(self, "delta", float(self.delta))
        if fam in ("S", "P"):
            if self.beta is None or not (0.0 < float(self.beta) < 1.0):
                raise ValidationError(f"family {fam} needs 0 < beta < 1")
            object.__setattr__(self, "beta", float(self.beta))
        elif self.beta is not None:
            raise ValidationError(f"family {fam} takes no beta")

    # exact parameters
    @cached_property
    def _d(self):
        return _exact(self.delta)

    @cached_property
    def _b(self):
        return None if self.beta is None else _exact(self.beta)

    @cached_property
    def c_sym(self):
        d, b = self._d, self._b
        if self.family == "S":
            return (3 - b) / d ** (3 - b)
        if self.family == "P":
            return 3 * (3 + b) / (b * d**3)
        if self.family == "G":
            e = sp.E
            return 4 * e / (d**3 * (e * sp.sqrt(sp.pi) * sp.erf(1) - 2))
        if self.family == "Q":
            return sp.Float(1.0 / (self.delta**3 * _bump_quad(1.0, 2)))
        return 105 / d**3

    @cached_property
    def c(self) -> float:
        """Normalization constant."""
        return float(self.c_sym)

    @cached_property
    def alpha_sym(self):
        return 2 * self.moment_sym(0).subs(_S, self._d)

    @cached_property
    def alpha(self) -> float:
        """L1 norm of the kernel."""
        return float(sp.N(self.alpha_sym, 20))

    @property
    def origin_singularity_order(self) -> float:
        return {"S": 0, "P": 1, "G": INF, "Q": INF, "quartic": INF}[self.family]

    @property
    def horizon_jump_order(self) -> float:
        return {"S": 0, "P": 1, "G": 0, "Q": INF, "quartic": 4}[self.family]

    @property
    def max_level(self) -> int:
        """Highest smoothing level the kernel supports."""
        if self.family == "quartic":
            return 4
        if self.family in ("S", "P"):
            return int(self.origin_singularity_order)
        return MAX_MOMENT

    @property
    def bounded(self) -> bool:
        return self.family != "S"

    def label(self) -> str:
        if self.beta is None:
            return f"{self.family}(delta={self.delta:g})"
        return f"{self.family}(delta={self.delta:g}, beta={self.beta:g})"

    # moments
    @lru_cache(maxsize=None)
    def moment_sym(self, j: int):
        """A_j(s) as a sympy expression in the symbol ``s``."""
        if j < 0:
            raise ValidationError("moment index must be non-negative")
        d, b, c, s = self._d, self._b, self.c_sym, _S
        fam = self.family
        if fam == "S":
            return c * s ** (j + 1 - b) / (j + 1 - b)
        if fam == "P":
            return c * (s ** (j + 1) / (j + 1) - s ** (j + 1 + b) / ((j + 1 + b) * d**b))
        if fam == "quartic":
            return c * sum(
                sp.binomial(4, i) * (-1 / d) ** i * s ** (j + i + 1) / (j + i + 1) for i in range(5)
            )
        if fam == "G":
            return c * _gauss_moment(j, s, d)
        return c * d ** (j + 1) * bump_moment(j, s / d)

    def moment(self, j: int, s) -> np.ndarray:
        """Numerical A_j(s) for ``0 <= s <= delta`` (clipped)."""
        fn = _moment_fn(self, j)
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.delta)
        with np.errstate(all="ignore"):
            out = fn(s)
        return np.broadcast_to(np.asarray(out, dtype=float), s.shape).copy()

    def full_moment(self, j: int) -> float:
        """mu_j = A_j(delta)."""
        return float(sp.N(self.moment_sym(j).subs(_S, self._d), 20))


def _gauss_moment(j: int, s, d):
    """int_0^s t^j exp(-t^2/d^2) dt via the standard recursion."""
    if j == 0:
        return d * sp.sqrt(sp.pi) / 2 * sp.erf(s / d)
    if j == 1:
        return d**2 / 2 * (1 - sp.exp(-(s**2) / d**2))
    return -(d**2) / 2 * s ** (j - 1) * sp.exp(-(s**2) / d**2) + (j - 1) * d**2 / 2 * _gauss_moment(
        j - 2, s, d
    )


_moment_fns: dict = {}


def _moment_fn(spec: KernelSpec, j: int):
    key = (spec, j)
    fn = _moment_fns.get(key)
    if fn is None:
        fn = sp.lambdify(_S, spec.moment_sym(j), modules=[{"bump_moment": bump_moment_numeric}, "scipy", "numpy"])
        _moment_fns[key] = fn
    return fn


def make_kernel(family: str, delta: float, beta: float | None = None) -> KernelSpec:
    return KernelSpec(family, delta, beta)


# --------------------------------------------------------------------------
# evaluation


def eval_kernel(spec: KernelSpec, x):
    """Pointwise kernel value."""
    xa = np.asarray(x, dtype=float)
    z = np.abs(xa)
    d = spec.delta
    inside = z < d
    out = np.zeros_like(z)
    zi = z[inside]
    fam = spec.family
    if fam == "S":
        if np.any(zi == 0):
            raise SingularPoint("S kernel is unbounded at 0")
        out[inside] = spec.c * zi ** (-spec.beta)
    elif fam == "P":
        out[inside] = spec.c * (1.0 - (zi / d) ** spec.beta)
    elif fam == "G":
        out[inside] = spec.c * np.exp(-(zi / d) ** 2)
    elif fam == "Q":
        out[inside] = spec.c * _bump_density(zi / d, 0)
    else:
        out[inside] = spec.c * (1.0 - zi / d) ** 4
    if xa.ndim == 0:
        return float(out)
    return out


def alpha(spec: KernelSpec) -> float:
    return spec.alpha


# --------------------------------------------------------------------------
# L phi_k


@lru_cache(maxsize=None)
def L_phi(spec: KernelSpec, k: int) -> PiecewiseSmoothFunction:
    """``L phi_k = phi_k * K - alpha phi_k`` with breakpoints -delta, 0, delta."""
    if k < 0:
        raise ValidationError("order must be non-negative")
    if k > MAX_MOMENT:
        raise UnsupportedOrder(f"L phi_k is tabulated for k <= {MAX_MOMENT}")
    d = spec._d
    kf = sp.factorial(k)
    A = [spec.moment_sym(j) for j in range(k + 1)]
    mu = [a.subs(_S, d) for a in A]
    binom = [sp.binomial(k, j) for j in range(k + 1)]
    left = sum(binom[j] * X ** (k - j) / kf * (mu[j] - A[j].subs(_S, -X)) for j in range(k + 1))
    mid = sum(
        binom[j] * X ** (k - j) / kf * ((-1) ** j * A[j].subs(_S, X) + mu[j]) for j in range(k + 1)
    ) - spec.alpha_sym * X**k / kf
    right = sum(binom[j] * X ** (k - j) / kf * 2 * mu[j] for j in range(2, k + 1, 2))
    singular = []
    if spec.family == "S":
        singular.append((0.0, k + 1))
    elif spec.family == "P":
        singular.append((0.0, k + 2))
    return PiecewiseSmoothFunction(
        [-spec.delta, 0.0, spec.delta],
        [ZERO, ExprPiece(left), ExprPiece(mid), ExprPiece(right)],
        MAX_ORDER,
        singular=singular,
    )


# --------------------------------------------------------------------------
# Fourier multiplier


def _quartic_profile(w):
    """I(w) = int_0^1 (1-t)^4 cos(w t) dt."""
    w = np.abs(np.asarray(w, dtype=float))
    out = np.empty_like(w)
    small = w < 2.0
    ws = w[small] ** 2
    acc = np.zeros_like(ws)
    term = np.full_like(ws, 24.0 / math.factorial(5))
    for n in range(30):
        acc += term
        term = -term * ws / ((2 * n + 6) * (2 * n + 7))
    out[small] = acc
    wl = w[~small]
    iw = 1j * wl
    val = 24.0 * np.exp(iw) / iw**5
    for j in range(5):
        val = val - (math.factorial(4) / math.factorial(4 - j)) / iw ** (j + 1)
    out[~small] = val.real
    return out


def _multiplier_quad(spec: KernelSpec, xi: float) -> float:
    d = spec.delta
    if xi == 0.0:
        return 0.0

    def kern(z):
        return float(eval_kernel(spec, z)) if z > 0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if abs(xi) * d < 20.0:
            val, _ = integrate.quad(
                lambda z: kern(z) * (math.cos(xi * z) - 1.0), 0.0, d, epsabs=1e-14, epsrel=1e-12, limit=400
            )
            return 2.0 * val
        if spec.family == "S":
            # kernel singular at 0: integrate the algebraic weight explicitly
            val, _ = integrate.quad(
                lambda z: spec.c * math.cos(xi * z), 0.0, d, weight="alg", wvar=(-spec.beta, 0.0),
                epsabs=1e-14, epsrel=1e-12, limit=1000,
            )
        else:
            val, _ = integrate.quad(
                kern, 0.0, d, weight="cos", wvar=abs(xi), epsabs=1e-14, epsrel=1e-12, limit=1000
            )
        return 2.0 * val - spec.alpha


def multiplier(spec: KernelSpec, xi):
    """Fourier symbol m(xi) = int K(z) (cos(xi z) - 1) dz."""
    xa = np.asarray(xi, dtype=float)
    if spec.family == "quartic":
        out = 2.0 * spec.c * spec.delta * _quartic_profile(xa * spec.delta) - spec.alpha
        out = np.where(xa == 0.0, 0.0, out)
    else:
        flat = np.atleast_1d(xa).ravel()
        out = np.array([_multiplier_quad(spec, float(v)) for v in flat]).reshape(xa.shape)
    if xa.ndim == 0:
        return float(out)
    return out
