"""Model-based testing from ASD-style interface models."""

from .compose import CompositionPlan, alphabet_report, compose, unit_model
from .errors import (
    CompositionError, ConfigError, GenerationError, HarnessError, IfspecError, ModelError,
)
from .harness import Endpoint, run_case, run_suite
from .model import (
    ILLEGAL, EventDecl, Illegal, InterfaceModel, Legal, Param, RuleCase, Taken,
    ValidationReport, legal_transitions, reachable, step, validate,
)
from .testgen import (
    DomainSpec, StateGraph, TestCase, TestStep, TestSuite, build_test_model, coverage,
    expand_domains, explore, filter_suite, gen_longtests, gen_random, gen_shorttests,
)
from .text import ParseError, ParseFailure, parse, render_dot, serialize

__version__ = "0.1.0"

__all__ = [
    "CompositionPlan", "alphabet_report", "compose", "unit_model",
    "CompositionError", "ConfigError", "GenerationError", "HarnessError", "IfspecError",
    "ModelError", "Endpoint", "run_case", "run_suite",
    "ILLEGAL", "EventDecl", "Illegal", "InterfaceModel", "Legal", "Param", "RuleCase", "Taken",
    "ValidationReport", "legal_transitions", "reachable", "step", "validate",
    "DomainSpec", "StateGraph", "TestCase", "TestStep", "TestSuite", "build_test_model",
    "coverage", "expand_domains", "explore", "filter_suite", "gen_longtests", "gen_random",
    "gen_shorttests", "ParseError", "ParseFailure", "parse", "render_dot", "serialize",
]
