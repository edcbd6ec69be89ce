"""Shape analysis for graph transformation systems.

A model (start shape, rules, forbidden patterns) is explored over 3-valued
logical structures until the set of reachable shapes stabilises, which either
proves that no forbidden pattern is reachable or yields a rule trace.
"""

from .engine import (BOUND_EXCEEDED, SAFE, UNSAFE, AnalysisResult, CompatibilityConstraint, Limits,
                     Options, check_pattern, coerce, concrete_explore, derive_constraints, explore,
                     materialise, materialisations, replay, step)
from .errors import GTSError, ModelError, ParseError, PreconditionError, SignatureError
from .formula import evaluate, free_vars, parse, to_text
from .kleene import FALSE, MAYBE, TRUE, TruthValue, and_, info_join, info_le, logical_le, not_, or_
from .model import ModelFile, load_model, parse_model, print_model
from .rules import (ForbiddenPattern, GraphRule, ShapeRule, apply_concrete, apply_shape, find_matchings,
                    production_formula)
from .structure import (Antichain, Graph, Instrumentation, LogicalStructure, Signature,
                        canonical_abstraction, check_embedding, encode_graph, find_embedding,
                        max_insert)

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "Antichain", "BOUND_EXCEEDED", "CompatibilityConstraint", "FALSE",
    "ForbiddenPattern", "GTSError", "Graph", "GraphRule", "Instrumentation", "Limits", "LogicalStructure",
    "MAYBE", "ModelError", "ModelFile", "Options", "ParseError", "PreconditionError", "SAFE",
    "ShapeRule", "Signature", "SignatureError", "TRUE", "TruthValue", "UNSAFE", "and_", "apply_concrete",
    "apply_shape", "canonical_abstraction", "check_embedding", "check_pattern", "coerce",
    "concrete_explore", "derive_constraints", "encode_graph", "evaluate", "explore", "find_embedding",
    "find_matchings", "free_vars", "info_join", "info_le", "load_model", "logical_le", "materialise",
    "materialisations", "max_insert", "not_", "or_", "parse", "parse_model", "print_model",
    "production_formula", "replay", "step", "to_text",
]
