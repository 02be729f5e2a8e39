"""Whitehead automorphisms acting on subgroup graphs.

Covers the free factor test, the free factor support (smallest free factor
containing a subgroup), reduction of a free factor to a standard rose, and
recovery of conjugating elements between subgroups with equal cores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

from .stallings import (
    LabeledGraph,
    SubgroupSpec,
    _propagate,
    build_pointed_core,
    contains,
    core,
    graph_rank,
    labeled_isomorphism,
    spanning_tree_basis,
    subgroup_graph,
    tree_paths,
)
from .words import Automorphism, Inner, Permutation, Whitehead, Word, letters

log = logging.getLogger(__name__)

_WH_CACHE: dict[int, tuple] = {}


def enumerate_whitehead(rank: int) -> list[Whitehead]:
    """All pairs (A, a), multipliers in letter order, subsets in binary order.

    The ``2n`` choices with ``A`` empty are identities and are included.
    """
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if rank not in _WH_CACHE:
        out = []
        for a in letters(rank):
            rest = [x for x in letters(rank) if abs(x) != abs(a)]
            for mask in range(1 << len(rest)):
                subset = frozenset(x for j, x in enumerate(rest) if mask >> j & 1)
                out.append(Whitehead(subset, a))
        _WH_CACHE[rank] = tuple(out)
    return list(_WH_CACHE[rank])


def nontrivial_whitehead(rank: int) -> list[Whitehead]:
    return [phi for phi in enumerate_whitehead(rank) if phi.subset]


def letters_at(g: LabeledGraph, v: int) -> frozenset:
    if v not in g.out:
        raise KeyError(f"unknown vertex {v}")
    return frozenset(g.out[v])


def _as_pointed(g: Union[LabeledGraph, SubgroupSpec]) -> LabeledGraph:
    g = subgroup_graph(g)
    if g.basepoint is None:
        g = g.with_basepoint(min(g.out))
    return g


def whitehead_image(phi, g: LabeledGraph, basis: Optional[list] = None) -> LabeledGraph:
    """Pointed core of ``phi(H)`` for the subgroup ``H`` of a pointed graph."""
    if basis is None:
        basis = spanning_tree_basis(g)
    return build_pointed_core(SubgroupSpec(g.rank, tuple(phi.apply(w) for w in basis)))


def core_edges(g: LabeledGraph) -> int:
    return core(g).num_edge_pairs


# -- fine actions -----------------------------------------------------------


@dataclass(frozen=True)
class FineReport:
    """Per-vertex case of a fine action and the number of case III vertices."""

    cases: dict
    p: int


def is_fine(phi: Whitehead, g: Union[LabeledGraph, SubgroupSpec]) -> Optional[FineReport]:
    """Classify every vertex of the core; ``None`` unless each vertex is in
    exactly one of the three configurations."""
    c = core(subgroup_graph(g))
    A, a = phi.subset, phi.multiplier
    cases = {}
    for v in c.out:
        L = letters_at(c, v)
        hits = []
        if not (L & A):
            hits.append("I")
        if L <= A:
            hits.append("II")
        if a in L and L <= A | {a}:
            hits.append("III")
        if len(hits) != 1:
            return None
        cases[v] = hits[0]
    return FineReport(cases, sum(1 for t in cases.values() if t == "III"))


@dataclass
class PreciseCheck:
    before: LabeledGraph
    after: LabeledGraph
    p: int
    holds: bool


def check_precise(phi: Whitehead, g: Union[LabeledGraph, SubgroupSpec], strict: bool = True) -> PreciseCheck:
    """Compare ``core(phi(H))`` against ``core(H)`` for a fine action.

    With ``p`` case III vertices the edge count must drop by exactly ``p``;
    with ``p == 0`` the cores must be isomorphic.
    """
    h = _as_pointed(g)
    report = is_fine(phi, h)
    if report is None:
        raise ValueError(f"action of {phi} is not fine")
    before = core(h)
    after = core(whitehead_image(phi, h))
    if report.p:
        holds = after.num_edge_pairs == before.num_edge_pairs - report.p
    else:
        holds = labeled_isomorphism(before, after) is not None
    if strict and not holds:
        raise AssertionError(f"{phi}: edge count {before.num_edge_pairs} -> {after.num_edge_pairs}, p={report.p}")
    return PreciseCheck(before, after, report.p, holds)


# -- greedy reduction --------------------------------------------------------


@dataclass
class RoseReduction:
    """Outcome of greedy Whitehead reduction of a subgroup.

    ``moves`` maps the input subgroup onto ``graph``; its core uses exactly
    the generator indices ``letters`` (indices before any renaming).  When
    normalised, ``graph`` is pointed on its core and lies in
    ``<a_1, ..., a_k>`` with ``k == len(letters)``.
    """

    moves: Automorphism
    letters: tuple
    graph: LabeledGraph
    trace: list = field(default_factory=list)

    @property
    def is_rose(self) -> bool:
        return self.graph.num_edge_pairs == 0 or core(self.graph).num_vertices == 1


def find_reducer(g: LabeledGraph) -> Optional[tuple[Whitehead, LabeledGraph]]:
    """First Whitehead automorphism (scan order) strictly shrinking the core."""
    target = core_edges(g)
    basis = spanning_tree_basis(g)
    for phi in nontrivial_whitehead(g.rank):
        img = whitehead_image(phi, g, basis)
        if core_edges(img) < target:
            return phi, img
    return None


def reduce_to_rose(spec: Union[SubgroupSpec, LabeledGraph], normalize: bool = True) -> RoseReduction:
    """Apply strictly reducing Whitehead moves until none exists.

    With ``normalize`` the move list ends with a conjugation putting the
    basepoint on the core and a permutation sending the surviving letters
    to an initial segment.
    """
    g = _as_pointed(spec)
    n = g.rank
    aut = Automorphism(n)
    trace = []
    if g.num_edge_pairs == 0:
        return RoseReduction(aut, (), g, trace)
    while core(g).num_vertices > 1:
        found = find_reducer(g)
        if found is None:
            break
        phi, img = found
        trace.append((phi, core_edges(g), core_edges(img)))
        log.debug("whitehead %s: %d -> %d edges", phi, trace[-1][1], trace[-1][2])
        aut = aut.then(phi)
        g = img
    c = core(g)
    support = tuple(sorted(c.labels()))
    if normalize:
        paths, _ = tree_paths(g)
        # the first core vertex in BFS order is where the hair attaches
        attach = min(c.out, key=lambda v: (len(paths[v]), v))
        u = paths[attach]
        if u:
            aut = aut.then(Inner(~u))
        rest = [i for i in range(1, n + 1) if i not in support]
        images = [0] * n
        for new, old in enumerate(support + tuple(rest), start=1):
            images[old - 1] = new
        if images != list(range(1, n + 1)):
            aut = aut.then(Permutation(tuple(images)))
        g = image_subgroup(aut, spec)
    return RoseReduction(aut, support, g, trace)


def image_subgroup(aut: Automorphism, spec) -> LabeledGraph:
    """Pointed core of ``aut(H)``."""
    h = _as_pointed(spec)
    return build_pointed_core(SubgroupSpec(h.rank, tuple(aut.apply(w) for w in spanning_tree_basis(h))))


def is_free_factor(spec: Union[SubgroupSpec, LabeledGraph]) -> bool:
    """Whitehead's test: reduce greedily; a free factor ends at a rose."""
    g = _as_pointed(spec)
    if g.num_edge_pairs == 0:
        return True
    return reduce_to_rose(g, normalize=False).is_rose


def free_factor_support(spec: Union[SubgroupSpec, LabeledGraph]) -> list[Word]:
    """Basis of the smallest free factor containing the subgroup."""
    g = _as_pointed(spec)
    if g.num_edge_pairs == 0:
        return []
    red = reduce_to_rose(g, normalize=True)
    inv = red.moves.inverse()
    return [inv.apply(Word((i,))) for i in range(1, len(red.letters) + 1)]


def rose_normalizer(spec: Union[SubgroupSpec, LabeledGraph]) -> Automorphism:
    """An automorphism sending the free factor onto ``<a_1, ..., a_k>``."""
    g = _as_pointed(spec)
    if g.num_edge_pairs == 0:
        return Automorphism(g.rank)
    red = reduce_to_rose(g, normalize=True)
    if not red.is_rose:
        raise ValueError("subgroup is not a free factor")
    return red.moves


def find_conjugator(g1: LabeledGraph, g2: LabeledGraph) -> Optional[Word]:
    """A word ``g`` with ``g H1 g^-1 == H2``, shortest among those found."""
    g1, g2 = _as_pointed(g1), _as_pointed(g2)
    if g1.rank != g2.rank:
        raise ValueError("rank mismatch")
    triv1, triv2 = g1.num_edge_pairs == 0, g2.num_edge_pairs == 0
    if triv1 or triv2:
        return Word() if triv1 and triv2 else None
    c1, c2 = core(g1), core(g2)
    if c1.num_vertices != c2.num_vertices or c1.num_edge_pairs != c2.num_edge_pairs:
        return None
    paths1, _ = tree_paths(g1)
    paths2, _ = tree_paths(g2)
    start = min(c1.out, key=lambda v: (len(paths1[v]), v))
    u1 = paths1[start]
    best = None
    for x in sorted(c2.out, key=lambda v: (len(paths2[v]), v)):
        phi = _propagate(c1, c2, start, x)
        if phi is None or len(phi) != c1.num_vertices:
            continue
        cand = paths2[x] * ~u1
        if best is None or len(cand) < len(best):
            best = cand
    if best is None:
        return None
    gens1, gens2 = spanning_tree_basis(g1), spanning_tree_basis(g2)
    ok = all(contains(g2, best * h * ~best) for h in gens1) and all(
        contains(g1, ~best * h * best) for h in gens2
    )
    if not ok:
        raise AssertionError("conjugator failed verification")
    return best


def conjugate_words(g: Word, words) -> list[Word]:
    return [g * Word(w) * ~g for w in words]


def subgroup_rank(spec) -> int:
    return graph_rank(_as_pointed(spec))
