"""Scalar linear impulsive delay differential equations: solvers and checks."""

from .analysis import (
    HypothesesNotMet,
    estimate_k,
    fit_decay,
    input_probe,
    positivity_test,
    theorem2_report,
    theorem3_report,
    verify_exponential_estimate,
)
from .expansion import CauchyEvaluator, expansion_G, ode_product_G, recursion_G
from .fundamental import cauchy_function, check_lemma1, fundamental_function, fundamental_solution
from .integrator import MeshOptions, PiecewiseSolution, build_mesh, solve
from .model import (
    DelayTerm,
    DeviationDescriptor,
    FunctionDescriptor,
    ImpulseSchedule,
    ProblemSpec,
    SpecError,
    check_hypotheses,
    validate,
)
from .representation import RepresentationInput, evaluate_representation, representation_residual

__all__ = [
    "CauchyEvaluator",
    "DelayTerm",
    "DeviationDescriptor",
    "FunctionDescriptor",
    "HypothesesNotMet",
    "ImpulseSchedule",
    "MeshOptions",
    "PiecewiseSolution",
    "ProblemSpec",
    "RepresentationInput",
    "SpecError",
    "build_mesh",
    "cauchy_function",
    "check_hypotheses",
    "check_lemma1",
    "estimate_k",
    "evaluate_representation",
    "expansion_G",
    "fit_decay",
    "fundamental_function",
    "fundamental_solution",
    "input_probe",
    "ode_product_G",
    "positivity_test",
    "recursion_G",
    "representation_residual",
    "solve",
    "theorem2_report",
    "theorem3_report",
    "validate",
    "verify_exponential_estimate",
]
