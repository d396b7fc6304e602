"""Independent oracle, verification checks and convergence studies."""
from .checks import (Report, SamplePlan, audit_sizes, check_conformity, check_derham, check_domination,
                     check_exactness, check_traces)
from .convergence import ConvergenceReport, convergence_study
from .oracle import Oracle, OracleDomainError, oracle_eval

__all__ = [
    "ConvergenceReport", "Oracle", "OracleDomainError", "Report", "SamplePlan", "audit_sizes",
    "check_conformity", "check_derham", "check_domination", "check_exactness", "check_traces",
    "convergence_study", "oracle_eval",
]
