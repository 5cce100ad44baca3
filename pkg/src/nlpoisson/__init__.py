"""Semi-analytic solver for 1-D nonlocal Poisson problems with discontinuous data.

The nonlocal operator ``L u = u * K - alpha u`` maps a jump in ``u`` to a jump
in ``L u``.  Subtracting the images of one-sided monomials ``phi_k`` removes
the jumps of the source level by level; the smoothed problem is solved on a
grid and the monomials are added back analytically.
"""

from .errors import (
    InsufficientStencil,
    KrylovStall,
    LevelExceedsKernelSmoothness,
    MisalignedHorizon,
    NearZeroMultiplier,
    NlPoissonError,
    NumericalError,
    OrderExceeded,
    QuadratureNonConvergence,
    SingularJump,
    SingularPoint,
    SingularSystem,
    UnboundedLimit,
    UnknownFixture,
    UnsupportedOrder,
    ValidationError,
)
from .fixtures import Fixture, printed_source, fixture, transcription_report
from .kernels import KernelSpec, L_phi, alpha, eval_kernel, make_kernel, multiplier
from .operator import Grid, GridFunction, apply_L_grid, apply_L_quadrature
from .piecewise import (
    Jump,
    PiecewiseSmoothFunction,
    constant,
    from_expr,
    from_text,
    jump_at,
    linear_combine,
    phi,
    to_text,
)
from .smoothing import SmoothingRecord, reconstruct, smooth, smoothed_constraint
from .solver import (
    DiscreteSolution,
    SolveConfig,
    construct_compatible_constraint,
    resolve,
    solve_constrained,
    solve_torus,
)

__version__ = "0.1.0"
