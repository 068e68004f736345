"""Tail bounds for random variables with a bounded size-bias coupling."""

from .bounds import BoundParams, BoundReport, best_report
from .errors import DomainError, PremiseError, SpecError
from .logprob import LogProb
from .special_fn import dickman_rho, dickman_tail, log_gamma
from .specs import Model, parse_spec

__all__ = [
    "BoundParams", "BoundReport", "best_report", "DomainError", "PremiseError", "SpecError",
    "LogProb", "dickman_rho", "dickman_tail", "log_gamma", "Model", "parse_spec",
]
__version__ = "0.1.0"
