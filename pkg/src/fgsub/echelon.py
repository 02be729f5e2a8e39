"""Echelon subgroups: flags, echelon bases and the recursive decision procedure.

The search explores, from the core of ``H``, the graphs reachable by
Whitehead moves that never increase the number of edges (the vertices of
``Lambda_r(E)`` reachable from ``core(H)``), looks for rank ``r - 1`` core
subgraphs of their Whitehead images, and pushes those through the rank
``r - 1`` graph until one uses a proper subset of the letters.  The subgroup
found there is decided recursively.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

from . import stallings as st
from .stallings import LabeledGraph, SubgroupSpec
from .whitehead import (
    enumerate_whitehead,
    find_conjugator,
    free_factor_support,
    is_free_factor,
    reduce_to_rose,
    rose_normalizer,
    subgroup_rank,
    whitehead_image,
)
from .words import Automorphism, Inner, Permutation, Whitehead, Word

log = logging.getLogger(__name__)


class SearchBudgetExceeded(RuntimeError):
    """The number of explored graph nodes passed ``max_nodes``."""


@dataclass
class Flag:
    """A chain of free factors ``B_1 <= ... <= B_r`` of ``F_rank``, each
    given by a basis."""

    rank: int
    levels: list

    def to_json(self) -> list:
        return [[str(w) for w in level] for level in self.levels]

    @classmethod
    def from_json(cls, rank: int, data: Sequence[Sequence[str]]) -> "Flag":
        from .words import parse_word

        return cls(rank, [[parse_word(t, rank) for t in level] for level in data])


@dataclass
class EchelonBasis:
    ordered: list
    prefix_ranks: list

    def to_json(self) -> dict:
        return {"basis": [str(w) for w in self.ordered], "prefix_ranks": list(self.prefix_ranks)}


@dataclass
class LambdaNode:
    """A reachable core graph.

    ``graph`` is the canonical representative, pointed at its canonical
    start vertex.  ``path`` lists (Whitehead move, conjugator) steps leading
    from the representative of ``seed`` to this one: each step maps the
    current subgroup ``K`` to ``c phi(K) c^-1``.
    """

    key: bytes
    graph: LabeledGraph
    path: tuple
    seed: int

    @property
    def edges(self) -> int:
        return self.graph.num_edge_pairs

    def automorphism(self, rank: int) -> Automorphism:
        return path_automorphism(rank, self.path)


def path_automorphism(rank: int, path) -> Automorphism:
    aut = Automorphism(rank)
    for phi, conj in path:
        if phi is not None and phi.subset:
            aut = aut.then(phi)
        if conj:
            aut = aut.then(Inner(conj))
    return aut


def _graph(spec: Union[SubgroupSpec, LabeledGraph]) -> LabeledGraph:
    return st.subgroup_graph(spec)


def _images(args) -> list:
    """Pointed cores of ``phi(K)`` for each ``phi``; module level so it pickles."""
    rep, phis = args
    basis = st.spanning_tree_basis(rep)
    return [whitehead_image(phi, rep, basis) for phi in phis]


class _Mapper:
    """Sequential ``map`` or a process pool; ordering is identical either way."""

    def __init__(self, jobs: int = 1):
        self.jobs = max(1, int(jobs))
        self._pool = None

    def map(self, fn, items: list) -> list:
        if self.jobs == 1 or len(items) < 2:
            return [fn(x) for x in items]
        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.jobs)
        return list(self._pool.map(fn, items, chunksize=max(1, len(items) // (4 * self.jobs))))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


class LambdaSearch:
    """Lazy closure of the rank ``r`` graph with edge bound ``E`` from seeds.

    New seeds can be added at any time, even while draining; :meth:`drain`
    yields each node once its children have been queued.
    """

    def __init__(self, rank: int, r: int, E: int, solver: Optional["EchelonSolver"] = None):
        self.rank = rank
        self.r = r
        self.E = E
        self.solver = solver
        self.phis = [phi for phi in enumerate_whitehead(rank) if phi.subset]
        self._identity = Whitehead(frozenset(), 1)
        self.nodes: dict[bytes, LambdaNode] = {}
        self.images: dict[bytes, list] = {}
        self.current_images: Optional[list] = None
        self.queue: deque = deque()
        self.seeds: list = []

    def __contains__(self, key: bytes) -> bool:
        return key in self.nodes

    def add_seed(self, graph: LabeledGraph, info=None) -> Optional[LambdaNode]:
        """Add a core graph as a new root; returns None if already reached."""
        c = st.core(graph) if graph.basepoint is not None else graph
        key = st.canonical_key(c)
        if key in self.nodes:
            return None
        if st.graph_rank(c) != self.r or c.num_edge_pairs > self.E:
            raise ValueError("seed is not a vertex of this graph")
        self.seeds.append(info)
        node = LambdaNode(key, st.canonical_form(c), (), len(self.seeds) - 1)
        self._insert(node)
        return node

    def _insert(self, node: LambdaNode) -> None:
        self.nodes[node.key] = node
        self.queue.append(node)
        if self.solver is not None:
            self.solver._count(self.r)

    def _prefetch(self, node: LambdaNode) -> None:
        if node.key in self.images:
            return
        mapper = self.solver.mapper if self.solver is not None else None
        batch = [node]
        if mapper is not None and mapper.jobs > 1:
            batch += [n for n in list(self.queue)[: 4 * mapper.jobs] if n.key not in self.images]
        phis = [self._identity] + self.phis
        items = [(n.graph, phis) for n in batch]
        results = mapper.map(_images, items) if mapper is not None else [_images(x) for x in items]
        for n, imgs in zip(batch, results):
            self.images[n.key] = list(zip(phis, imgs))

    def _child(self, node: LambdaNode, phi: Whitehead, img: LabeledGraph, c: LabeledGraph, key: bytes) -> None:
        rep = st.canonical_form(c)
        conj = find_conjugator(img, rep)
        self._insert(LambdaNode(key, rep, node.path + ((phi, conj),), node.seed))

    def _expand_cyclic(self, node: LambdaNode) -> None:
        # rank one: the core of phi(<u>) is the cycle of the cyclic reduction of phi(u)
        (u,) = st.spanning_tree_basis(node.graph)
        for phi in self.phis:
            v = phi.apply(u).cyclic_reduction()
            if len(v) > node.edges:
                continue
            c = st.cycle_graph(self.rank, v)
            key = st.canonical_key(c)
            if key not in self.nodes:
                self._child(node, phi, whitehead_image(phi, node.graph, [u]), c, key)

    def drain(self) -> Iterator[LambdaNode]:
        """Process queued nodes in order.  While a node is being yielded its
        Whitehead images (identity first) are in :attr:`current_images`,
        except in rank one where they are never built."""
        while self.queue:
            node = self.queue.popleft()
            if self.r == 1:
                self._expand_cyclic(node)
                self.current_images = None
                yield node
                continue
            self._prefetch(node)
            self.current_images = self.images.pop(node.key)
            for phi, img in self.current_images[1:]:
                c = st.core(img)
                if c.num_edge_pairs > node.edges:
                    continue
                key = st.canonical_key(c)
                if key not in self.nodes:
                    self._child(node, phi, img, c, key)
            yield node


def lambda_reachable(start: LabeledGraph, r: int, E: int, rank: Optional[int] = None) -> list[LambdaNode]:
    """All nodes reachable from ``start`` by edge-non-increasing Whitehead
    moves, in discovery order."""
    n = start.rank if rank is None else rank
    search = LambdaSearch(n, r, E)
    search.add_seed(start)
    for _ in search.drain():
        pass
    return list(search.nodes.values())


# -- core subgraphs ------------------------------------------------------------


def _pair_id(u: int, x: int, v: int) -> tuple:
    return (u, x) if x > 0 else (v, -x)


def _arcs(c: LabeledGraph) -> tuple[list, set]:
    """Maximal paths through degree-2 vertices, as lists of directed edges."""
    branch = {v for v, d in c.out.items() if len(d) >= 3}
    arcs, seen = [], set()
    for b in sorted(branch):
        for x in sorted(c.out[b], key=lambda y: (abs(y), y < 0)):
            v = c.out[b][x]
            if _pair_id(b, x, v) in seen:
                continue
            arc = [(b, x, v)]
            prev = x
            while v not in branch:
                (y,) = [z for z in c.out[v] if z != -prev]
                w = c.out[v][y]
                arc.append((v, y, w))
                prev, v = y, w
            for e in arc:
                seen.add(_pair_id(*e))
            arcs.append(arc)
    return arcs, branch


def enumerate_core_subgraphs(g: LabeledGraph, target_rank: int, max_edges: int) -> list[LabeledGraph]:
    """Connected core subgraphs of ``g`` with the given rank and at most
    ``max_edges`` edge pairs, one per isomorphism type.  Vertex ids are
    those of ``g``.
    """
    if target_rank < 1:
        return []
    c = st.core(g)
    if target_rank > st.graph_rank(c):
        return []
    arcs, branch = _arcs(c)
    if not branch:
        if target_rank == 1 and c.num_edge_pairs <= max_edges:
            return [c.with_basepoint(None)]
        return []
    out, keys = [], set()
    m = len(arcs)
    ends = [(a[0][0], a[-1][2]) for a in arcs]
    for mask in range(1, 1 << m):
        chosen = [i for i in range(m) if mask >> i & 1]
        nedges = sum(len(arcs[i]) for i in chosen)
        if nedges > max_edges:
            continue
        touch = Counter()
        for i in chosen:
            touch[ends[i][0]] += 1
            touch[ends[i][1]] += 1
        if len(chosen) - len(touch) + 1 != target_rank or min(touch.values()) < 2:
            continue
        sub: dict[int, dict[int, int]] = {}
        for i in chosen:
            for u, x, v in arcs[i]:
                sub.setdefault(u, {})[x] = v
                sub.setdefault(v, {})[-x] = u
        h = LabeledGraph(g.rank, sub)
        if not h.is_connected():
            continue
        key = st.canonical_key(h)
        if key not in keys:
            keys.add(key)
            out.append(h)
    return out


def _attach_to_basepoint(p: LabeledGraph, sub: LabeledGraph) -> LabeledGraph:
    """The subgraph ``sub`` of pointed ``p`` plus a shortest path to the basepoint."""
    paths, _ = st.tree_paths(p)
    target = min(sub.out, key=lambda v: (len(paths[v]), v))
    out = {u: dict(d) for u, d in sub.out.items()}
    v = p.basepoint
    for x in paths[target]:
        w = p.out[v][x]
        out.setdefault(v, {})[x] = w
        out.setdefault(w, {})[-x] = v
        v = w
    out.setdefault(p.basepoint, {})
    return st.renumber(LabeledGraph(p.rank, out, p.basepoint))


# -- verification --------------------------------------------------------------


def is_basis(words: Sequence[Word], rank: int) -> bool:
    if len(words) != rank:
        return False
    g = st.build_pointed_core(SubgroupSpec(rank, tuple(words)))
    return g.num_vertices == 1 and g.num_edge_pairs == rank


def verify_echelon_basis(spec: Union[SubgroupSpec, LabeledGraph], ordered: Sequence[Word]) -> tuple[bool, list]:
    """Prefix intersection ranks ``rank(H n <b_1..b_i>)`` and whether each
    step grows by at most one."""
    h = _graph(spec)
    n = h.rank
    ordered = [Word(w) for w in ordered]
    if not is_basis(ordered, n):
        raise ValueError("words do not form a basis of the ambient free group")
    ranks = []
    for i in range(1, n + 1):
        prefix = st.build_pointed_core(SubgroupSpec(n, tuple(ordered[:i])))
        ranks.append(st.graph_rank(st.pullback_intersection(h, prefix)))
    ok = all(b - a <= 1 for a, b in zip([0] + ranks, ranks))
    return ok, ranks


def verify_flag(spec: Union[SubgroupSpec, LabeledGraph], flag: Flag) -> bool:
    """Free factor levels, nested, with ``rank(H n B_i) == i``."""
    h = _graph(spec)
    n = h.rank
    if flag.rank != n or len(flag.levels) != st.graph_rank(h):
        return False
    graphs = []
    for level in flag.levels:
        try:
            sg = SubgroupSpec(n, tuple(level))
        except ValueError:
            return False
        if not is_free_factor(sg):
            return False
        graphs.append(st.build_pointed_core(sg))
    for lower, upper in zip(flag.levels, graphs[1:]):
        if not all(st.contains(upper, w) for w in lower):
            return False
    for i, g in enumerate(graphs, start=1):
        if st.graph_rank(st.pullback_intersection(h, g)) != i:
            return False
    return True


def minimalize_flag(flag: Flag, spec: Union[SubgroupSpec, LabeledGraph]) -> Flag:
    """Replace each level ``B_i`` by ``ffg(H n B_i)``."""
    h = _graph(spec)
    if not verify_flag(h, flag):
        raise ValueError("not a flag for this subgroup")
    levels = []
    for level in flag.levels:
        b = st.build_pointed_core(SubgroupSpec(h.rank, tuple(level)))
        levels.append(free_factor_support(st.pullback_intersection(h, b)))
    return Flag(h.rank, levels)


def flag_to_echelon_basis(flag: Flag, spec: Union[SubgroupSpec, LabeledGraph, None] = None) -> EchelonBasis:
    """Extend a basis of ``B_1`` to one of ``B_2`` and so on up to ``F_n``.

    Works top down: in coordinates where ``B_{j+1}`` is ``<a_1..a_m>``, the
    level ``B_j`` is normalised to an initial segment by moves of ``F_m``,
    which leave every higher initial segment in place.  Prefix ranks are
    filled in when the subgroup is supplied.
    """
    n = flag.rank
    levels = [list(level) for level in flag.levels]
    if not levels or subgroup_rank(SubgroupSpec(n, tuple(levels[-1]))) < n:
        levels.append([Word((i,)) for i in range(1, n + 1)])
    ambient = [subgroup_rank(SubgroupSpec(n, tuple(level))) for level in levels[1:]] + [n]
    coords = Automorphism(n)
    for j in range(len(levels) - 1, -1, -1):
        words = [coords.apply(w) for w in levels[j]]
        m = ambient[j]
        if any(w.max_index > m for w in words):
            raise ValueError("flag levels are not nested")
        sg = SubgroupSpec(m, tuple(words))
        if not is_free_factor(sg):
            raise ValueError("flag level is not a free factor")
        coords = coords.then(Automorphism(n, rose_normalizer(sg).moves))
    back = coords.inverse()
    ordered = [back.apply(Word((i,))) for i in range(1, n + 1)]
    ranks = verify_echelon_basis(spec, ordered)[1] if spec is not None else []
    return EchelonBasis(ordered, ranks)


# -- the decision procedure ----------------------------------------------------


@dataclass
class Witness:
    """Data behind a positive answer at one recursion level."""

    gamma1: LambdaNode
    phi: Whitehead
    gamma2: LabeledGraph
    k2: LabeledGraph
    seed_conj: Word
    gamma3: LambdaNode
    letters: tuple


@dataclass
class EchelonSolver:
    """Decides echelon-ness, recursing on rank.  Memoised on cores."""

    max_nodes: Optional[int] = None
    jobs: int = 1
    stats: Counter = field(default_factory=Counter)
    memo: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mapper = _Mapper(self.jobs)
        self.explored = 0

    def _count(self, r: int) -> None:
        self.explored += 1
        self.stats[f"lambda_{r}"] += 1
        if self.max_nodes is not None and self.explored > self.max_nodes:
            raise SearchBudgetExceeded(f"explored more than {self.max_nodes} graph nodes")

    def close(self) -> None:
        self.mapper.close()

    # public entry -------------------------------------------------------------

    def is_echelon(self, spec: Union[SubgroupSpec, LabeledGraph]) -> Optional[Flag]:
        h = _graph(spec)
        try:
            flag = self._solve(h)
        finally:
            self.close()
        if flag is None:
            return None
        flag = minimalize_flag(flag, h)
        if not verify_flag(h, flag):
            raise AssertionError("computed flag failed verification")
        return flag

    # recursion ----------------------------------------------------------------

    def _solve(self, h: LabeledGraph) -> Optional[Flag]:
        """Flag for the subgroup of pointed ``h`` in ``F_{h.rank}``, or None."""
        n = h.rank
        r = st.graph_rank(h)
        if r == 0:
            return Flag(n, [])
        if r == 1:
            return Flag(n, [free_factor_support(h)])
        red = reduce_to_rose(h, normalize=True)
        k = len(red.letters)
        hk = LabeledGraph(k, red.graph.out, red.graph.basepoint)
        rep = st.canonical_form(st.core(hk))
        key = (k, st.canonical_key(rep))
        if key not in self.memo:
            self.memo[key] = None
            self.memo[key] = self._search(rep)
        found = self.memo[key]
        if found is None:
            return None
        conj = find_conjugator(rep, hk)
        levels_k = [[conj * w * ~conj for w in level] for level in found.levels]
        back = red.moves.inverse()
        return Flag(n, [[back.apply(w) for w in level] for level in levels_k])

    def _search(self, h: LabeledGraph) -> Optional[Flag]:
        """Search for ``h`` pointed on its core with ffg(h) the whole group."""
        n = h.rank
        r = st.graph_rank(h)
        E = h.num_edge_pairs
        log.info("searching rank %d subgroup of F_%d with %d edges", r, n, E)
        top = LambdaSearch(n, r, E, self)
        root = top.add_seed(h)
        root_conj = find_conjugator(h, root.graph)
        low = LambdaSearch(n, r - 1, E, self)
        for node1 in top.drain():
            for phi, img in top.current_images:
                for sub in enumerate_core_subgraphs(img, r - 1, E):
                    if st.canonical_key(sub) in low:
                        continue
                    k2 = _attach_to_basepoint(img, sub)
                    seed = low.add_seed(sub)
                    low.seeds[seed.seed] = (node1, phi, sub, k2, find_conjugator(k2, seed.graph))
                    for node3 in low.drain():
                        labels = tuple(sorted(node3.graph.labels()))
                        if len(labels) == n:
                            continue
                        sub_flag = self._solve_in_letters(node3.graph, labels)
                        if sub_flag is None:
                            continue
                        s1, s_phi, s_sub, s_k2, s_conj = low.seeds[node3.seed]
                        w = Witness(s1, s_phi, s_sub, s_k2, s_conj, node3, labels)
                        return self._assemble(h, root_conj, w, sub_flag)
        log.info("rank %d subgroup is not echelon (%d + %d nodes)", r, len(top.nodes), len(low.nodes))
        return None

    def _solve_in_letters(self, g: LabeledGraph, labels: tuple) -> Optional[Flag]:
        """Solve for ``g`` (labels inside ``labels``) inside ``<labels>``;
        the flag is returned in the coordinates of ``g``."""
        n = g.rank
        s = len(labels)
        perm = _compress(labels, n)
        basis = [perm.apply(w) for w in st.spanning_tree_basis(g)]
        sub = st.build_pointed_core(SubgroupSpec(s, tuple(basis)))
        flag = self._solve(sub)
        if flag is None:
            return None
        flag = minimalize_flag(flag, sub)
        back = perm.inverse()
        return Flag(n, [[back.apply(w) for w in level] for level in flag.levels])

    def _assemble(self, h: LabeledGraph, root_conj: Word, w: Witness, sub_flag: Flag) -> Flag:
        n = h.rank
        validate_witness(h, w, sub_flag)
        to_gamma1 = Automorphism(n, (Inner(root_conj),) if root_conj else ()).then(w.gamma1.automorphism(n))
        to_img = to_gamma1.then(w.phi) if w.phi.subset else to_gamma1
        to_gamma3 = Automorphism(n, (Inner(w.seed_conj),) if w.seed_conj else ()).then(w.gamma3.automorphism(n))
        rho = to_gamma3.inverse().then(to_img.inverse())
        levels = [[rho.apply(x) for x in level] for level in sub_flag.levels]
        levels.append([Word((i,)) for i in range(1, n + 1)])
        return Flag(n, levels)


def _compress(labels: tuple, n: int) -> Permutation:
    """Permutation sending ``labels`` to ``1..len(labels)`` in order."""
    rest = [i for i in range(1, n + 1) if i not in labels]
    images = [0] * n
    for new, old in enumerate(tuple(labels) + tuple(rest), start=1):
        images[old - 1] = new
    return Permutation(tuple(images))


def _replay(start: LabeledGraph, path, r: int, E: int) -> LabeledGraph:
    """Re-run a search path, checking every step stays in the rank ``r``
    graph with edge bound ``E`` and never gains edges."""
    cur = start
    for phi, conj in path:
        before = st.core(cur).num_edge_pairs
        img = whitehead_image(phi, cur)
        if conj:
            img = st.build_pointed_core(
                SubgroupSpec(cur.rank, tuple(conj * x * ~conj for x in st.spanning_tree_basis(img)))
            )
        c = st.core(img)
        if c.num_edge_pairs > before or c.num_edge_pairs > E or st.graph_rank(c) != r:
            raise AssertionError("search path leaves the graph of admissible cores")
        cur = img
    return cur


def validate_witness(h: LabeledGraph, w: Witness, sub_flag: Flag) -> None:
    """Independent re-check of the five search conditions for a witness."""
    n = h.rank
    r = st.graph_rank(h)
    E = st.core(h).num_edge_pairs
    # (i) path from core(H) to Gamma_1
    root = st.canonical_form(st.core(h))
    end1 = _replay(root, w.gamma1.path, r, E)
    if st.labeled_isomorphism(st.core(end1), w.gamma1.graph) is None:
        raise AssertionError("condition (i) failed")
    # (ii) Gamma_2 is a core subgraph of core(phi(pi_1(Gamma_1)))
    img = whitehead_image(w.phi, w.gamma1.graph)
    c = st.core(img)
    for u, d in w.gamma2.out.items():
        for x, v in d.items():
            if c.out.get(u, {}).get(x) != v:
                raise AssertionError("condition (ii) failed: not a subgraph")
    if st.graph_rank(w.gamma2) != r - 1 or w.gamma2.num_edge_pairs > E:
        raise AssertionError("condition (ii) failed: wrong rank or size")
    if st.labeled_isomorphism(st.core(w.k2), w.gamma2) is None:
        raise AssertionError("condition (ii) failed: attached subgroup has another core")
    # (iii) path from Gamma_2 to Gamma_3
    seed_rep = st.canonical_form(w.gamma2)
    end3 = _replay(seed_rep, w.gamma3.path, r - 1, E)
    if st.labeled_isomorphism(st.core(end3), w.gamma3.graph) is None:
        raise AssertionError("condition (iii) failed")
    # (iv) proper letter subset
    labels = w.gamma3.graph.labels()
    if len(labels) >= n or tuple(sorted(labels)) != w.letters:
        raise AssertionError("condition (iv) failed")
    # (v) the recursive flag is a flag for pi_1(Gamma_3)
    if not verify_flag(w.gamma3.graph, sub_flag):
        raise AssertionError("condition (v) failed")


def is_echelon(
    spec: Union[SubgroupSpec, LabeledGraph], max_nodes: Optional[int] = None, jobs: int = 1
) -> Optional[Flag]:
    """A minimal flag certifying that the subgroup is echelon, or None."""
    return EchelonSolver(max_nodes=max_nodes, jobs=jobs).is_echelon(spec)


def echelon_certificate(spec: SubgroupSpec, flag: Flag) -> dict:
    basis = flag_to_echelon_basis(flag, spec)
    ok, ranks = verify_echelon_basis(spec, basis.ordered)
    if not ok or not verify_flag(spec, flag):
        raise AssertionError("certificate failed verification")
    return {
        "rank": spec.rank,
        "generators": [str(g) for g in spec.generators],
        "echelon": True,
        "flag": flag.to_json(),
        "basis": [str(b) for b in basis.ordered],
        "prefix_ranks": ranks,
    }
