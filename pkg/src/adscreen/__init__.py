"""Verification and calibration toolkit for screening with a good, ads,

and third-party payments: transformed-measure construction, optimality
condition batteries, price calibration, and an exact LP benchmark on
discretized instances.
"""

from .domain import (AdPaymentSchedule, CanonicalMechanism, DensityModel,
                     DiscreteInstance, DomainError, HalfPlane, Mechanism,
                     MenuItem, Region, TypeSpace, ad_tiered, constant_payment,
                     discretize, general_payment, good_only,
                     loglinear_density, menu, product_polynomial_density,
                     single_bundle, uniform_density)
from .measure import (MeasureDecomposition, build_measure, hinge_tail_integral,
                      ibp_residual, integrate_against, marginal_M,
                      mu_of_region, mu_total)
from .mechanisms import (best_response, check_ic_ir, indirect_utility,
                         revenue_continuous, revenue_discrete,
                         revenue_via_measure)
from .conditions import (ConditionReport, adversarial_probe, check_ad_tiered,
                         check_general_kappa_edges, check_good_only, check_mm,
                         check_single_bundle, classify_regime_uniform,
                         orthant_min)
from .calibrate import (CalibrationResult, NoRootError, solve_ad_tiered_prices,
                        solve_good_only_price, solve_single_bundle_price)
from .oracle import (LPProblem, LPSolution, brute_force_best, build_lp,
                     lp_solve, menu_grid_search, optimality_gap)
from .quadrature import DEFAULT_SPEC, SHARP_SPEC, QuadratureError, QuadratureSpec

__version__ = "0.1.0"
