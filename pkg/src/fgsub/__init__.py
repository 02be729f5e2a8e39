"""Finitely generated subgroups of free groups.

Stallings foldings, Whitehead's free factor test and a decision procedure
for echelon subgroups.
"""

from .words import Automorphism, Inner, LetterInversion, Permutation, Whitehead, Word, parse_word
from .stallings import LabeledGraph, SubgroupSpec, build_pointed_core, pullback_intersection
from .whitehead import free_factor_support, is_free_factor
from .echelon import Flag, is_echelon

__all__ = [
    "Automorphism",
    "Flag",
    "Inner",
    "LabeledGraph",
    "LetterInversion",
    "Permutation",
    "SubgroupSpec",
    "Whitehead",
    "Word",
    "build_pointed_core",
    "free_factor_support",
    "is_echelon",
    "is_free_factor",
    "parse_word",
    "pullback_intersection",
]
