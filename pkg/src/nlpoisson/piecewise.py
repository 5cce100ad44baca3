"""Piecewise-smooth functions with exact one-sided jumps.

A :class:`PiecewiseSmoothFunction` is a sorted list of breakpoints plus one
smooth piece per open interval (including the two unbounded tails).  Pieces
are usually sympy expression trees in the symbol :data:`X`, differentiated
exactly and compiled to numpy on demand.  Purely numerical pieces (for
instance a trigonometric interpolant) are supported through
:class:`FuncPiece` and can be mixed with symbolic ones.

Point values at a breakpoint are right limits.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy as sp

from .errors import OrderExceeded, SingularPoint, UnboundedLimit, ValidationError

X = sp.Symbol("x", real=True)

#: Smoothness budget used for closed forms that are smooth on every piece.
MAX_ORDER = 16

#: Relative threshold below which a computed jump is snapped to zero.
JUMP_SNAP = 1e-13

# extra names available to lambdify and to the text parser
_NUMERIC_MODULES: list = [{}, "scipy", "numpy"]
_PARSE_LOCALS: dict = {"x": X}


def register_numeric(name: str, func: Callable, sym: object | None = None) -> None:
    """Make a custom sympy function usable in compiled and parsed pieces."""
    _NUMERIC_MODULES[0][name] = func
    if sym is not None:
        _PARSE_LOCALS[name] = sym


# --------------------------------------------------------------------------
# pieces


class Piece:
    """A smooth function on one interval, with derivatives of any order."""

    def __call__(self, x: np.ndarray, k: int = 0) -> np.ndarray:
        raise NotImplementedError

    def shift(self, p: float) -> "Piece":
        """Return the piece translated by ``p`` (x -> x - p)."""
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


class ExprPiece(Piece):
    """Closed-form piece backed by a sympy expression in :data:`X`."""

    def __init__(self, expr):
        self.expr = sp.sympify(expr)
        self._compiled: dict[int, Callable] = {}
        self._lock = threading.Lock()

    def derivative_expr(self, k: int):
        return sp.diff(self.expr, X, k) if k else self.expr

    def _fn(self, k: int) -> Callable:
        fn = self._compiled.get(k)
        if fn is None:
            with self._lock:
                fn = self._compiled.get(k)
                if fn is None:
                    fn = sp.lambdify(X, self.derivative_expr(k), modules=_NUMERIC_MODULES)
                    self._compiled[k] = fn
        return fn

    def __call__(self, x, k=0):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self._fn(k)(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    def shift(self, p):
        if p == 0:
            return self
        return ExprPiece(self.expr.subs(X, X - _exact(p)))

    @property
    def is_zero(self):
        return self.expr == 0

    def __repr__(self):
        return f"ExprPiece({self.expr})"


class FuncPiece(Piece):
    """Numerical piece given by ``fn(x, k)`` returning the k-th derivative."""

    def __init__(self, fn: Callable[[np.ndarray, int], np.ndarray], name: str = "numeric"):
        self.fn = fn
        self.name = name

    def __call__(self, x, k=0):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.fn(x, k), dtype=float).reshape(x.shape)

    def shift(self, p):
        if p == 0:
            return self
        fn = self.fn
        return FuncPiece(lambda x, k: fn(x - p, k), name=f"{self.name}(x-{p!r})")

    def __repr__(self):
        return f"FuncPiece({self.name})"


class SumPiece(Piece):
    """Symbolic part plus a weighted sum of numerical pieces."""

    def __init__(self, expr_part: ExprPiece, terms: Sequence[tuple[float, FuncPiece]]):
        self.expr_part = expr_part
        self.terms = tuple(terms)

    def __call__(self, x, k=0):
        out = self.expr_part(x, k)
        for c, piece in self.terms:
            out = out + c * piece(x, k)
        return out

    def shift(self, p):
        return SumPiece(self.expr_part.shift(p), [(c, t.shift(p)) for c, t in self.terms])

    def __repr__(self):
        return f"SumPiece({self.expr_part!r}, {list(self.terms)!r})"


ZERO = ExprPiece(0)


def _exact(v: float):
    """Exact rational for a float, using its shortest decimal repr."""
    if isinstance(v, sp.Basic):
        return v
    if float(v).is_integer():
        return sp.Integer(int(v))
    return sp.Rational(repr(float(v)))


def combine_pieces(terms: Iterable[tuple[float, Piece]]) -> Piece:
    """Weighted sum of pieces, summing symbolic parts exactly."""
    expr = sp.Integer(0)
    numeric: list[tuple[float, FuncPiece]] = []
    for c, piece in terms:
        if c == 0:
            continue
        cs = sp.Integer(1) if c == 1 else (sp.Integer(-1) if c == -1 else sp.Float(c))
        if isinstance(piece, ExprPiece):
            expr = expr + cs * piece.expr
        elif isinstance(piece, FuncPiece):
            numeric.append((float(c), piece))
        elif isinstance(piece, SumPiece):
            expr = expr + cs * piece.expr_part.expr
            numeric.extend((float(c) * w, t) for w, t in piece.terms)
        else:
            raise TypeError(f"unsupported piece type {type(piece).__name__}")
    base = ExprPiece(expr)
    if not numeric:
        return base
    return SumPiece(base, numeric)


# --------------------------------------------------------------------------
# functions


@dataclass(frozen=True)
class Jump:
    """Jump ``[psi^(k)]_p`` = right limit minus left limit."""

    location: float
    order: int
    magnitude: float


class PiecewiseSmoothFunction:
    """Breakpoints plus one smooth piece per interval.

    ``singular`` lists ``(point, order)`` pairs: derivatives of order
    ``>= order`` are unbounded at ``point`` and may not be evaluated there.
    ``support`` is an optional hint ``(lo, hi)`` outside which the function
    vanishes identically.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        pieces: Sequence[Piece],
        max_order: int = MAX_ORDER,
        support: tuple[float, float] | None = None,
        singular: Iterable[tuple[float, int]] = (),
    ):
        bps = tuple(float(b) for b in breakpoints)
        if any(not math.isfinite(b) for b in bps):
            raise ValidationError("breakpoints must be finite")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        if len(pieces) != len(bps) + 1:
            raise ValidationError(
                f"need {len(bps) + 1} pieces for {len(bps)} breakpoints, got {len(pieces)}"
            )
        if max_order < 0:
            raise ValidationError("max_order must be non-negative")
        self.breakpoints = bps
        self.pieces = tuple(pieces)
        self.max_order = int(max_order)
        self.support = None if support is None else (float(support[0]), float(support[1]))
        self.singular = frozenset((float(p), int(k)) for p, k in singular)
        self._bp_array = np.array(bps)

    # -- evaluation -------------------------------------------------------

    def _check_order(self, k: int) -> None:
        if k < 0:
            raise ValidationError("derivative order must be non-negative")
        if k > self.max_order:
            raise OrderExceeded(f"order {k} exceeds max_order {self.max_order}")

    def _singular_orders(self, p: float) -> int | None:
        orders = [k for q, k in self.singular if q == p]
        return min(orders) if orders else None

    def eval(self, k: int, x, side: str = "right"):
        """k-th derivative at ``x``; ``side`` picks the limit at breakpoints."""
        self._check_order(k)
        xa = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xa).ravel()
        if self.singular:
            for p, kmin in self.singular:
                if k >= kmin and np.any(flat == p):
                    raise SingularPoint(f"order-{k} derivative is unbounded at x={p}")
        idx = np.searchsorted(self._bp_array, flat, side="right" if side == "right" else "left")
        out = np.empty_like(flat)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.pieces[i](flat[mask], k)
        if not np.all(np.isfinite(out)):
            bad = flat[~np.isfinite(out)][0]
            raise SingularPoint(f"non-finite order-{k} derivative at x={bad}")
        if xa.ndim == 0:
            return float(out[0])
        return out.reshape(xa.shape)

    def __call__(self, x):
        return self.eval(0, x)

    def one_sided(self, p: float, k: int) -> tuple[float, float]:
        """Left and right limits of the k-th derivative at ``p``."""
        self._check_order(k)
        kmin = self._singular_orders(float(p))
        if kmin is not None and k >= kmin:
            raise UnboundedLimit(f"order-{k} limit at {p} is declared unbounded")
        i = int(np.searchsorted(self._bp_array, p, side="left"))
        on_bp = i < len(self.breakpoints) and self.breakpoints[i] == p
        right_piece = self.pieces[i + 1] if on_bp else self.pieces[i]
        left_piece = self.pieces[i]
        pa = np.array([float(p)])
        left = float(left_piece(pa, k)[0])
        right = float(right_piece(pa, k)[0])
        if not (math.isfinite(left) and math.isfinite(right)):
            raise UnboundedLimit(f"order-{k} one-sided limit at {p} is not finite")
        return left, right

    def jump_at(self, p: float, k: int) -> Jump:
        p = float(p)
        self._check_order(k)
        if p not in self.breakpoints:
            return Jump(p, k, 0.0)
        left, right = self.one_sided(p, k)
        mag = right - left
        if abs(mag) < JUMP_SNAP * (1.0 + abs(left) + abs(right)):
            mag = 0.0
        return Jump(p, k, mag)

    # -- transformations ---------------------------------------------------

    def shift(self, p: float) -> "PiecewiseSmoothFunction":
        """Translate so that ``g(x) = self(x - p)``."""
        p = float(p)
        support = None if self.support is None else (self.support[0] + p, self.support[1] + p)
        return PiecewiseSmoothFunction(
            [b + p for b in self.breakpoints],
            [piece.shift(p) for piece in self.pieces],
            self.max_order,
            support,
            [(q + p, k) for q, k in self.singular],
        )

    def piece_at(self, x: float) -> Piece:
        return self.pieces[int(np.searchsorted(self._bp_array, x, side="right"))]

    @property
    def is_symbolic(self) -> bool:
        return all(isinstance(p, ExprPiece) for p in self.pieces)

    def __repr__(self):
        return (
            f"PiecewiseSmoothFunction(breakpoints={list(self.breakpoints)}, "
            f"pieces={list(self.pieces)}, max_order={self.max_order})"
        )


def eval(fn: PiecewiseSmoothFunction, k: int, x):  # noqa: A001 - mirrors the documented API
    """k-th derivative of ``fn`` at ``x`` (right limit at breakpoints)."""
    return fn.eval(k, x)


def jump_at(fn: PiecewiseSmoothFunction, p: float, k: int) -> Jump:
    return fn.jump_at(p, k)


def phi(k: int, p: float = 0.0) -> PiecewiseSmoothFunction:
    """One-sided monomial ``(x-p)^k / k!`` on ``[p, inf)``, zero to the left."""
    if k < 0:
        raise ValidationError("phi order must be non-negative")
    right = ExprPiece((X - _exact(p)) ** k / sp.factorial(k))
    return PiecewiseSmoothFunction([p], [ZERO, right], MAX_ORDER)


def constant(value: float) -> PiecewiseSmoothFunction:
    return PiecewiseSmoothFunction([], [ExprPiece(_exact(value))], MAX_ORDER)


def from_expr(expr, max_order: int = MAX_ORDER) -> PiecewiseSmoothFunction:
    """A globally smooth function given by one expression."""
    return PiecewiseSmoothFunction([], [ExprPiece(expr)], max_order)


def linear_combine(
    fns: Iterable[tuple[float, PiecewiseSmoothFunction]],
) -> PiecewiseSmoothFunction:
    """Exact linear combination on the union of the breakpoint sets."""
    fns = [(float(c), f) for c, f in fns]
    if not fns:
        return constant(0.0)
    bps = sorted(set().union(*(f.breakpoints for _, f in fns)))
    # representative point inside each interval of the merged partition
    if bps:
        reps = [bps[0] - 1.0] + [0.5 * (a + b) for a, b in zip(bps, bps[1:])] + [bps[-1] + 1.0]
    else:
        reps = [0.0]
    pieces = []
    for r in reps:
        pieces.append(combine_pieces((c, f.piece_at(r)) for c, f in fns))
    max_order = min(f.max_order for _, f in fns)
    singular = set()
    for c, f in fns:
        if c != 0:
            singular |= f.singular
    support = None
    if all(f.support is not None for _, f in fns):
        support = (min(f.support[0] for _, f in fns), max(f.support[1] for _, f in fns))
    return PiecewiseSmoothFunction(bps, pieces, max_order, support, singular)


# --------------------------------------------------------------------------
# text format

_HEADER = "# nlpoisson piecewise v1"


def _expr_to_text(expr) -> str:
    floats = expr.atoms(sp.Float)
    if floats:
        expr = expr.xreplace({f: _exact(float(f)) for f in floats})
    return sp.sstr(expr)


def to_text(fn: PiecewiseSmoothFunction) -> str:
    """Serialize a symbolic function to the plain-text piece format."""
    lines = [_HEADER, f"max_order {fn.max_order}"]
    if fn.support is not None:
        lines.append(f"support {fn.support[0]!r} {fn.support[1]!r}")
    for p, k in sorted(fn.singular):
        lines.append(f"singular {p!r} {k}")
    lines.append("breakpoints " + " ".join(repr(b) for b in fn.breakpoints))
    for piece in fn.pieces:
        if isinstance(piece, ExprPiece):
            lines.append("piece " + _expr_to_text(piece.expr))
        elif isinstance(piece, SumPiece) and not piece.terms:
            lines.append("piece " + _expr_to_text(piece.expr_part.expr))
        else:
            raise ValidationError("numerical pieces cannot be serialized")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> PiecewiseSmoothFunction:
    """Parse the format written by :func:`to_text`."""
    max_order = MAX_ORDER
    support = None
    singular = []
    bps: list[float] | None = None
    pieces = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        try:
            if key == "max_order":
                max_order = int(rest)
            elif key == "support":
                lo, hi = rest.split()
                support = (float(lo), float(hi))
            elif key == "singular":
                p, k = rest.split()
                singular.append((float(p), int(k)))
            elif key == "breakpoints":
                bps = [float(t) for t in rest.replace(",", " ").split()]
            elif key == "piece":
                pieces.append(ExprPiece(sp.sympify(rest, locals=_PARSE_LOCALS)))
            else:
                raise ValidationError(f"unknown key {key!r}")
        except (sp.SympifyError, ValueError, TypeError) as exc:
            raise ValidationError(f"line {lineno}: {exc}") from exc
    if bps is None:
        bps = []
    return PiecewiseSmoothFunction(bps, pieces, max_order, support, singular)
