"""Successive smoothing of a discontinuous source and the matching corrections.

Level k removes the k-th derivative jump of the current source at every
jump location ``p``::

    c_{p,k} = -[f_{k-1}^{(k)}]_p / alpha
    f_k     = f_{k-1} - sum_p c_{p,k} (L phi_k)(. - p)

The solution of the smoothed problem is then corrected by
``sum c_{p,k} phi_k(. - p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import LevelExceedsKernelSmoothness, SingularJump, UnboundedLimit, ValidationError
from .kernels import KernelSpec, L_phi
from .operator import GridFunction
from .piecewise import PiecewiseSmoothFunction, linear_combine, phi


@dataclass(frozen=True)
class SmoothingRecord:
    """Outcome of :func:`smooth`.

    ``coefficients[j, k]`` belongs to ``locations[j]`` and order ``k``.
    ``sources[k]`` is f_k, with ``sources[0]`` the input f.
    """

    level: int
    locations: tuple[float, ...]
    coefficients: np.ndarray = field(repr=False)
    source: PiecewiseSmoothFunction = field(repr=False)
    spec: KernelSpec
    constraint: PiecewiseSmoothFunction | None = field(default=None, repr=False)
    sources: tuple[PiecewiseSmoothFunction, ...] = field(default=(), repr=False)

    def corrections(self) -> list[tuple[float, PiecewiseSmoothFunction]]:
        """Nonzero ``(c, phi_k(. - p))`` terms."""
        out = []
        for j, p in enumerate(self.locations):
            for k in range(self.level + 1):
                c = float(self.coefficients[j, k])
                if c != 0.0:
                    out.append((c, phi(k, p)))
        return out


def _empty_record(f, spec, locations):
    return SmoothingRecord(-1, tuple(locations), np.zeros((len(locations), 0)), f, spec, sources=(f,))


def smooth(
    f: PiecewiseSmoothFunction,
    spec: KernelSpec,
    M: int,
    locations: Sequence[float] | None = None,
) -> SmoothingRecord:
    """Run the smoothing recursion up to level ``M`` at the given locations."""
    locs = tuple(float(p) for p in (f.breakpoints if locations is None else locations))
    if len(set(locs)) != len(locs):
        raise ValidationError("jump locations must be distinct")
    if M < 0:
        return _empty_record(f, spec, locs)
    if M > spec.max_level:
        raise LevelExceedsKernelSmoothness(
            f"level {M} exceeds the {spec.family} kernel budget of {spec.max_level}"
        )
    if M > f.max_order:
        raise LevelExceedsKernelSmoothness(f"level {M} exceeds the source smoothness {f.max_order}")
    coeffs = np.zeros((len(locs), M + 1))
    current = f
    history = [f]
    for k in range(M + 1):
        for j, p in enumerate(locs):
            try:
                jump = current.jump_at(p, k).magnitude
            except UnboundedLimit as exc:
                raise SingularJump(f"order-{k} jump of the source at {p} is unbounded") from exc
            coeffs[j, k] = -jump / spec.alpha
        terms = [(1.0, current)]
        lphi = None
        for j, p in enumerate(locs):
            if coeffs[j, k] != 0.0:
                lphi = lphi or L_phi(spec, k)
                terms.append((-coeffs[j, k], lphi.shift(p)))
        if len(terms) > 1:
            current = linear_combine(terms)
        history.append(current)
    return SmoothingRecord(M, locs, coeffs, current, spec, sources=tuple(history))


def smoothed_constraint(b: PiecewiseSmoothFunction, record: SmoothingRecord) -> PiecewiseSmoothFunction:
    """``b_M = b - sum c_{p,k} phi_k(. - p)``."""
    terms = record.corrections()
    if not terms:
        return b
    return linear_combine([(1.0, b)] + [(-c, fn) for c, fn in terms])


def with_constraint(record: SmoothingRecord, b: PiecewiseSmoothFunction) -> SmoothingRecord:
    return replace(record, constraint=smoothed_constraint(b, record))


def correction_values(record: SmoothingRecord, x: np.ndarray) -> np.ndarray:
    """``sum c_{p,k} phi_k(x - p)`` at the points ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for c, fn in record.corrections():
        out += c * fn.eval(0, x)
    return out


def reconstruct(u_M: GridFunction, record: SmoothingRecord) -> GridFunction:
    """Add the analytic corrections back onto a grid solution."""
    return GridFunction(u_M.grid, u_M.values + correction_values(record, u_M.grid.nodes))
