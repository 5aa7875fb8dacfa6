"""Imset representations and equivalence tools for directed causal graphs."""

from .graphs import (
    ColumnRelabel,
    CoveredFlip,
    CycleReversal,
    DirectedGraph,
    Family,
    GraphError,
    PartiallyDirectedGraph,
    apply_covered_flip,
    canonical_form,
    covered_edges,
    enumerate_dag_class,
    essential_graph,
    families,
    graph_from_json,
    graph_to_json,
    is_acyclic,
    markov_equivalent_dags,
    parse_graph,
    reverse_cycle,
    skeleton,
    v_structures,
)

__all__ = [
    "ColumnRelabel",
    "CoveredFlip",
    "CycleReversal",
    "DirectedGraph",
    "Family",
    "GraphError",
    "PartiallyDirectedGraph",
    "apply_covered_flip",
    "canonical_form",
    "covered_edges",
    "enumerate_dag_class",
    "essential_graph",
    "families",
    "graph_from_json",
    "graph_to_json",
    "is_acyclic",
    "markov_equivalent_dags",
    "parse_graph",
    "reverse_cycle",
    "skeleton",
    "v_structures",
]

__version__ = "0.1.0"
