"""Weighted Hardy-space objects at desk scale.

Muckenhoupt weights, intrinsic square functions evaluated as linear
programs over Hölder kernel classes, a discrete Calderón reproducing
formula with a tent-based atomic decomposition, and verification suites
for the inequalities relating them.
"""

from .grid_core import (Grid, HalfSpaceLadder, Rect, Refusal, SampledField, DyadicCube,
                        default_ladder, read_field_csv, write_field_csv)
from .weights import (Weight, CubeFamily, ap_quantity, a1_quantity, ap_constant,
                      critical_index, doubling_ratio, tail_integral, lp_w_norm,
                      weighted_maximal, subset_lower_bound)
from .kernel_family import (AmplitudeSolverConfig, TestKernel, intrinsic_amplitude,
                            tilde_amplitude, random_feasible_kernel, validate_c_alpha,
                            validate_c_alpha_eps, inclusion_constant)
from .square_functions import (AmplitudeField, amplitude_field, s_alpha, s_tilde, g_alpha,
                               g_star, g_tilde_star, s_psi)
from .hardy_atoms import (Atom, AdmissiblePsi, AtomicDecomposition, admissible_psi,
                          atomic_decompose, reconstruct, make_atom, validate_atom,
                          vanishes_weakly_check, maximal_fn, hp_w_norm)
from .verification import SuiteReport, run_suite, SUITES

__version__ = "0.1.0"
