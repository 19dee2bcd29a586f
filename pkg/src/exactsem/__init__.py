"""Structural equation models and exact transformations between them."""

__version__ = "0.1.0"

from .errors import (CertificationError, EvaluationError, ExactSemError, NotApplicableError,
                     PreconditionError, SingularSystemError, SolverError, StructuralError,
                     ValidationError)
from .interventions import (FiniteDomain, Intervention, InterventionCatalog, InterventionFamily,
                            Interval, leq, probe_catalog)
from .noise import Bernoulli, NoiseModel, Normal, PointMass, Uniform
from .sem import Sem, SolverConfig, analyze_structure, apply_intervention, make_sem, sample, solve_given_noise
from .distributions import (EmpiricalLaw, EqualityVerdict, GaussianLaw, closed_form_law, compare_laws,
                            energy_test, pushforward)
from .transform import (CheckConfig, ExactnessReport, InterventionMap, OmegaRule, Transformation,
                        check_diagram, check_exact, check_omega, compose_transformations,
                        permutation_transformation)
from .constructors import (CertifiedTriple, DynamicalSpec, aggregate_micro_macro, equilibrate,
                           marginalize_childless, marginalize_nonintervened, simulate_dynamics)
