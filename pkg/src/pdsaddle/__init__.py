"""Primal-dual splitting for weakly convex composite problems.

Library layout:

- ``operators``: linear maps with adjoints (dense, scalar, image gradient,
  Gaussian blur) and power-iteration norm estimates;
- ``prox``: the proximal catalog with weak-convexity moduli and a
  brute-force scalar oracle;
- ``saddle``: Lagrangian, duality gaps G and H, inf-sharpness scans, and the
  convergence constants;
- ``solver``: the dual-first and primal-first iterations with stepsize
  validation and trace recording;
- ``problems``: experiment builders (1-D saddle examples, sparse recovery,
  deblurring, TV denoising), noise, PSNR, PGM IO;
- ``cli``: the ``pdsaddle`` command.
"""

from .errors import OutOfBall, ProxUnavailable, StepsizeViolation
from .operators import (ImageGrid, LinearMap, divergence, gaussian_blur_map,
                        grad_map, identity_map, matrix_map, power_iteration,
                        scalar_map)
from .prox import (IntervalBox, ProxFunction, abs_norm_sq_shift,
                   abs_plus_square_well, abs_quadratic, abs_value,
                   brute_force_prox, elementwise_sq_l1, group_l1, l1_norm,
                   linf_ball_indicator, plus_quadratic, prox_conjugate,
                   quad_fit, quad_fit_conjugate, scale_function, shifted_l1)
from .saddle import (EpsilonBounds, RadiusReport, SaddleProblem, SharpnessReport,
                     dist_to_set, epsilon_bounds, feasible_sigma_interval, gap_G,
                     gap_H, gap_weak_convexity_check, lagrangian, radius_report,
                     rate_constant_B, reduce_fully_weakly_convex, sharpness_grid,
                     verify_inf_sharpness, verify_saddle_points)
from .solver import (IterateTrace, StepConfig, StoppingRules, TraceRow,
                     epsilon_monitor, solve_dual_first, solve_primal_first,
                     stopping, validate_steps)
from .problems import (ExperimentSpec, PgmError, deblur_spec, example_abs_bilinear,
                       example_wc_quartic, l1_convex, l1_weakly_convex, make_noise,
                       phantom, psnr, read_pgm, tv_spec, write_pgm)

__version__ = "0.1.0"
