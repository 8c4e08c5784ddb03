"""Numerics for the Laplacian on the line coupled to two harmonic oscillators at x = +-1.

Channel decomposition, closed-form boundary bases, the truncated boundary
system, coupled resolvents, a.c. spectrum multiplicities and block-decay
reports for the resolvent-power differences.
"""

__version__ = "0.1.0"

from .params import (BranchPointError, ChannelIndex, ChannelScalars, ModelParams, MuUndefinedError,
                     channel_energy, channel_scalars, hermite_chi, q_minus, q_plus, zeta_branch)
from .basis import (BasisFunction, BasisKind, InteriorResonanceError, basis_distance, coeff_norm_bounds,
                    jump_full, jump_half, norm_sq_full, overlap_full)
from .free_resolvent import (GaussianSource, Grid, GridSource, QuadratureError, apply_phi, apply_phi_circ, apply_q,
                             cubic_bump, q_operator_norm)
from .boundary import (BoundaryVector, IllConditionedError, OpKind, TruncationBox, build, invertibility_scan,
                       solve)
from .resolvent import (ChannelFunctionSet, NonConvergentBoxError, ResolventOutput, convergence_study,
                        matching_residual, resolve_circ, resolve_full)
from .multiplicity import (Regime, RegimeTag, classify, mult_free_full_line, mult_one_osc, mult_two_osc)
from .traceclass import (DecayReport, cube_difference_report, factor_difference_report, fin_products_report,
                         q_block_report)
