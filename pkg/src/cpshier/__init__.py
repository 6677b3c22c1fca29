"""Finite conditional type structures, belief hierarchies and terminality checks."""

__version__ = "0.1.0"

from .measure import Event, FiniteMeasure, FiniteSpace, make_measure, measure_of, pushforward
from .cps import (
    CPS,
    ConditioningFamily,
    CylinderFamily,
    cps_from_prior,
    lift_family,
    make_cps,
    marginal_cps,
    pushforward_cps,
    validate_cps,
)
from .structure import (
    MorphismCandidate,
    TypeStructure,
    completeness_status,
    disjoint_union,
    parse_structure,
    serialize_structure,
    verify_type_morphism,
)
from .hierarchy import (
    HierarchyPoint,
    check_coherence,
    finitely_terminal_at,
    refine,
    refine_to_fixpoint,
    terminal_over,
    unfold,
)

__all__ = [
    "CPS",
    "ConditioningFamily",
    "CylinderFamily",
    "Event",
    "FiniteMeasure",
    "FiniteSpace",
    "HierarchyPoint",
    "MorphismCandidate",
    "TypeStructure",
    "check_coherence",
    "completeness_status",
    "cps_from_prior",
    "disjoint_union",
    "finitely_terminal_at",
    "lift_family",
    "make_cps",
    "make_measure",
    "marginal_cps",
    "measure_of",
    "parse_structure",
    "pushforward",
    "pushforward_cps",
    "refine",
    "refine_to_fixpoint",
    "serialize_structure",
    "terminal_over",
    "unfold",
    "validate_cps",
    "verify_type_morphism",
]
