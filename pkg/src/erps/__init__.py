"""Monte Carlo expectation values for continuous-variable circuits via the
epistemically restricted phase-space representation."""

__version__ = "0.1.0"

from .circuits import (AffineMap, Circuit, PolynomialShearMap, SymbolicMap, apply_circuit,
                       apply_map, beamsplitter, compose_symbolic, cubic_kick, displacement,
                       gate_library, is_symplectic, momentum_drift, position_kick, rotation,
                       shear, squeeze)
from .engine import (EstimateReport, EstimationConfig, chebyshev_bound, estimate_moments,
                     estimate_variance, plan_samples, run_estimate, run_estimates)
from .observables import check_admissible, observable_from_terms, pullback, quantize
from .oracle import TruncatedBasis, build_operator, exact_expectation, truncation_sweep
from .polynomial import Monomial, Polynomial
from .sampling import (PhasePoint, XiDistribution, assign_momentum, draw_phase_point,
                       draw_phase_points, draw_xi)
from .states import (CatState, CoherentState, FockState, GaussianPureState, GridState1D,
                     MixtureState, ProductState, SqueezedState, amplitude_phase_from_grid,
                     validate_state, vacuum_state)
