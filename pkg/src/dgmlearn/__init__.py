"""Discriminative Gaifman models: neighborhood-local count features for relational learning."""

from .clauses import Clause, Literal, Var, parse_clause, parse_clauses
from .errors import ConfigError, DGMError, DGMWarning, ModelError, ParseError
from .gaifman import build_gaifman_graph, generate_neighborhoods, hop_distance, r_neighborhood
from .grounder import count_in_neighborhood, lge_embed, partial_ground
from .kb import KnowledgeBase, LabeledTuple, load_kb, parse_facts

__version__ = "0.1.0"
