"""G-Local pi-calculus: resources with local state under global usage policies."""

from .cfa import Estimate, faulty_traces, least_estimate, respects, unreleased_report, validate
from .parser import GlpSyntaxError, load, parse, parse_policy, parse_process, pretty
from .policy import PolicyAutomaton, admits
from .semantics import congruence_normalize, step
from .terms import label_boundaries

__version__ = "0.1.0"

__all__ = [
    "Estimate", "GlpSyntaxError", "PolicyAutomaton", "admits", "congruence_normalize",
    "faulty_traces", "label_boundaries", "least_estimate", "load", "parse", "parse_policy",
    "parse_process", "pretty", "respects", "step", "unreleased_report", "validate",
    "__version__",
]
