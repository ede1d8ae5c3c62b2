"""Simulation and explicit decay certificates for 1D and 3D discrete velocity kinetic models."""
from .errors import (AdmissibilityError, CompatibilityError, ConfigurationError, DomainError,
                     DVKError, NoCertificateError, SimulationError, UnboundedError,
                     UnclassifiableError)
from .fields import Field, Grid, integrate, l2_dist_sq, shift
from .interaction import CarlemanRate, ConstantRate, CustomRate, PowerLawRate, TypeFlags
from .solver import KineticState, StateStats, init_state, relaxation_step, strang_step, transport_step
from .rates import (FitResult, RateBound, Theorem, decay_bound_1d_type1, decay_bound_1d_type3,
                    decay_bound_3d_type1, decay_bound_3d_type3, fit_empirical_rate)
from .config import SimConfig, build_initial, parse_config
from .simulation import run

__version__ = "0.1.0"
