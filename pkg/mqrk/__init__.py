from .__about__ import __version__

from .errors import DomainError, IntegrationAborted, MqrkError, ProviderError, UnsupportedFunction, UsageError
from .problem import ExactProvider, FiniteDifferenceProvider, JetProvider, OdeProblem, PartialTable
from .methods import MethodSpec, RootChoice, Tableau, catalog, get_method, method_ids
from .shape import ShapeResult, ShapeStatus, compute_shape
from .stepper import StepRecord, Trajectory, integrate, mq_step
from .stability import StabilityPolynomial, derive_stability_poly, exp_match_order, real_stability_interval
from .harness import ConvergenceReport, get_problem, registry, run_convergence
