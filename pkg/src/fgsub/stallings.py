"""Folded labeled graphs representing subgroups of a free group.

A ``LabeledGraph`` is stored as a deterministic automaton: for each vertex a
map from signed letter to target vertex.  Because graphs are folded this map
is single valued, and the reverse of the edge ``(u, x) -> v`` is
``(v, -x) -> u``.  Graphs with a basepoint represent subgroups, graphs
without one represent conjugacy classes (via their core).
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

from .words import Automorphism, Word, letter_key, letter_str, letters, parse_word


class Edge(NamedTuple):
    source: int
    label: int
    target: int


@dataclass(frozen=True)
class SubgroupSpec:
    """A subgroup of ``F_rank`` given by generating words."""

    rank: int
    generators: tuple

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"ambient rank must be >= 1, got {self.rank}")
        gens = tuple(Word(g) for g in self.generators)
        for g in gens:
            if g.max_index > self.rank:
                raise ValueError(f"generator {g} is outside F_{self.rank}")
        object.__setattr__(self, "generators", gens)

    @classmethod
    def parse(cls, rank: int, texts: Iterable[str]) -> "SubgroupSpec":
        return cls(rank, tuple(parse_word(t, rank) for t in texts))


class LabeledGraph:
    """A finite folded graph labeled by the letters of ``F_rank``.

    Instances are treated as immutable.  ``basepoint`` is ``None`` for
    unpointed graphs.  Vertex ids are opaque; compare graphs with
    :func:`labeled_isomorphism` or :func:`canonical_key`.
    """

    __slots__ = ("rank", "out", "basepoint")

    def __init__(self, rank: int, out: dict, basepoint: Optional[int] = None):
        self.rank = rank
        self.out = out
        self.basepoint = basepoint

    # -- basic structure ---------------------------------------------------

    @property
    def vertices(self) -> list[int]:
        return list(self.out)

    @property
    def num_vertices(self) -> int:
        return len(self.out)

    @property
    def num_edge_pairs(self) -> int:
        return sum(1 for d in self.out.values() for x in d if x > 0)

    def edges(self) -> Iterator[Edge]:
        """Every directed edge, reverses included."""
        for u, d in self.out.items():
            for x, v in d.items():
                yield Edge(u, x, v)

    def edge_pairs(self) -> Iterator[Edge]:
        """One representative per reverse pair, the positively labeled one."""
        for u, d in self.out.items():
            for x in sorted(d, key=letter_key):
                if x > 0:
                    yield Edge(u, x, d[x])

    def degree(self, v: int) -> int:
        return len(self.out[v])

    def labels(self) -> set[int]:
        """Generator indices appearing on some edge."""
        return {abs(x) for d in self.out.values() for x in d}

    def is_connected(self) -> bool:
        if not self.out:
            return True
        start = next(iter(self.out))
        return len(_reachable(self.out, start)) == len(self.out)

    def is_folded(self) -> bool:
        for u, d in self.out.items():
            for x, v in d.items():
                if self.out.get(v, {}).get(-x) != u:
                    return False
        return True

    def with_basepoint(self, v: Optional[int]) -> "LabeledGraph":
        if v is not None and v not in self.out:
            raise KeyError(f"unknown vertex {v}")
        return LabeledGraph(self.rank, self.out, v)

    def subgraph(self, vertices: Iterable[int], basepoint: Optional[int] = None) -> "LabeledGraph":
        keep = set(vertices)
        out = {u: {x: v for x, v in self.out[u].items() if v in keep} for u in self.out if u in keep}
        return LabeledGraph(self.rank, out, basepoint)

    def trace(self, w: Sequence[int], start: Optional[int] = None) -> Optional[int]:
        """Endpoint of the path reading ``w`` from ``start``, or None."""
        v = self.basepoint if start is None else start
        for x in w:
            v = self.out[v].get(x)
            if v is None:
                return None
        return v

    def __repr__(self) -> str:
        return (
            f"LabeledGraph(rank={self.rank}, vertices={self.num_vertices}, "
            f"edge_pairs={self.num_edge_pairs}, basepoint={self.basepoint})"
        )


PointedGraph = LabeledGraph


def _reachable(out: dict, start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in out[u].values():
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


# -- folding -----------------------------------------------------------------


class _Folder:
    """Incremental Stallings folding with union-find over vertices."""

    def __init__(self):
        self.parent: list[int] = []
        self.out: list[dict] = []
        self.pending: list[tuple[int, int, int]] = []

    def new_vertex(self) -> int:
        self.parent.append(len(self.parent))
        self.out.append({})
        return len(self.parent) - 1

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def add_edge(self, u: int, x: int, v: int) -> None:
        self.pending.append((u, x, v))
        self.pending.append((v, -x, u))
        self._drain()

    def add_path(self, start: int, w: Sequence[int], end: int) -> None:
        if not w:
            if self.find(start) != self.find(end):
                self._merge(self.find(start), self.find(end))
                self._drain()
            return
        u = start
        # follow existing edges as far as possible
        i = 0
        while i < len(w) - 1:
            nxt = self.out[self.find(u)].get(w[i])
            if nxt is None:
                break
            u = self.find(nxt)
            i += 1
        for x in w[i:-1]:
            v = self.new_vertex()
            self.add_edge(u, x, v)
            u = v
        self.add_edge(u, w[-1], end)

    def _merge(self, a: int, b: int) -> None:
        if len(self.out[a]) < len(self.out[b]):
            a, b = b, a
        self.parent[b] = a
        moved = self.out[b]
        self.out[b] = {}
        for x, t in moved.items():
            self.pending.append((a, x, t))

    def _drain(self) -> None:
        # pending items are directed edges; each direction is checked on its own
        while self.pending:
            u, x, v = self.pending.pop()
            u, v = self.find(u), self.find(v)
            w = self.out[u].get(x)
            if w is not None:
                w = self.find(w)
                if w != v:
                    self._merge(w, v)
                    self.pending.append((u, x, v))
                    continue
            self.out[u][x] = v

    def graph(self, rank: int, basepoint: int) -> LabeledGraph:
        out = {}
        for v in range(len(self.parent)):
            if self.find(v) != v:
                continue
            out[v] = {x: self.find(t) for x, t in self.out[v].items()}
        return LabeledGraph(rank, out, self.find(basepoint))


def fold(rank: int, generators: Iterable[Sequence[int]]) -> LabeledGraph:
    """Fold the bouquet of generator loops; returns a pointed folded graph
    (not yet pruned to its pointed core)."""
    f = _Folder()
    base = f.new_vertex()
    for w in generators:
        w = Word(w)
        if w.max_index > rank:
            raise ValueError(f"word {w} is outside F_{rank}")
        if w:
            f.add_path(base, w, base)
    return f.graph(rank, base)


def _prune(g: LabeledGraph, protected: Optional[int]) -> LabeledGraph:
    """Repeatedly delete vertices of degree <= 1 other than ``protected``."""
    out = {u: dict(d) for u, d in g.out.items()}
    queue = deque(u for u, d in out.items() if len(d) <= 1 and u != protected)
    while queue:
        u = queue.popleft()
        if u not in out or len(out[u]) > 1 or u == protected:
            continue
        for x, v in out.pop(u).items():
            if v == u:
                continue
            del out[v][-x]
            if len(out[v]) <= 1 and v != protected:
                queue.append(v)
    return LabeledGraph(g.rank, out, protected)


def pointed_core(g: LabeledGraph) -> LabeledGraph:
    """Prune hanging trees, never deleting the basepoint.  Vertex ids kept."""
    if g.basepoint is None:
        raise ValueError("pointed_core needs a basepoint")
    return _prune(g, g.basepoint)


def core(g: LabeledGraph) -> LabeledGraph:
    """The core: prune all vertices of degree <= 1.  Vertex ids kept.

    The basepoint survives only if it lies on the core.
    """
    c = _prune(g, None)
    if not c.out:
        raise ValueError("graph is a tree and has no core")
    bp = g.basepoint if g.basepoint in c.out else None
    return LabeledGraph(g.rank, c.out, bp)


def bfs_order(g: LabeledGraph, start: int) -> list[int]:
    order = [start]
    seen = {start}
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        d = g.out[u]
        for x in sorted(d, key=letter_key):
            v = d[x]
            if v not in seen:
                seen.add(v)
                order.append(v)
    return order


def renumber(g: LabeledGraph, start: Optional[int] = None) -> LabeledGraph:
    """Renumber vertices 0, 1, ... in BFS order from ``start`` (default: the
    basepoint, else the smallest id)."""
    if not g.out:
        return LabeledGraph(g.rank, {}, None)
    if start is None:
        start = g.basepoint if g.basepoint is not None else min(g.out)
    order = bfs_order(g, start)
    if len(order) != len(g.out):
        raise ValueError("graph is not connected")
    new = {v: i for i, v in enumerate(order)}
    out = {new[u]: {x: new[v] for x, v in g.out[u].items()} for u in order}
    bp = new[g.basepoint] if g.basepoint is not None else None
    return LabeledGraph(g.rank, out, bp)


def build_pointed_core(spec: Union[SubgroupSpec, tuple]) -> LabeledGraph:
    """Stallings folding of the generators followed by pointed-core pruning.

    The result is numbered in BFS order from the basepoint, which is vertex 0.
    """
    if not isinstance(spec, SubgroupSpec):
        spec = SubgroupSpec(*spec)
    return renumber(pointed_core(fold(spec.rank, spec.generators)))


def graph_rank(g: LabeledGraph) -> int:
    """Rank of the fundamental group: edge pairs - vertices + 1."""
    if not g.out:
        return 0
    if not g.is_connected():
        raise ValueError("rank is only defined for connected graphs")
    return g.num_edge_pairs - g.num_vertices + 1


rank = graph_rank


def rose(rank: int, indices: Optional[Iterable[int]] = None) -> LabeledGraph:
    """One vertex with a loop for each generator index (default: all)."""
    idx = range(1, rank + 1) if indices is None else indices
    d = {}
    for i in idx:
        d[i] = 0
        d[-i] = 0
    return LabeledGraph(rank, {0: d}, 0)


def cycle_graph(rank: int, w: Sequence[int]) -> LabeledGraph:
    """The core of ``<w>`` for a cyclically reduced nonempty word ``w``."""
    n = len(w)
    if n == 0:
        raise ValueError("empty word has no cycle")
    out: dict[int, dict[int, int]] = {i: {} for i in range(n)}
    for i, x in enumerate(w):
        j = (i + 1) % n
        out[i][x] = j
        out[j][-x] = i
    return LabeledGraph(rank, out)


def pullback_intersection(g1: LabeledGraph, g2: LabeledGraph) -> LabeledGraph:
    """Pointed core of the basepoint component of the fibre product."""
    if g1.rank != g2.rank:
        raise ValueError(f"rank mismatch: {g1.rank} vs {g2.rank}")
    start = (g1.basepoint, g2.basepoint)
    ids = {start: 0}
    order = [start]
    out: dict[int, dict[int, int]] = {0: {}}
    i = 0
    while i < len(order):
        u1, u2 = order[i]
        d1, d2 = g1.out[u1], g2.out[u2]
        src = ids[order[i]]
        i += 1
        for x in sorted(d1, key=letter_key):
            v2 = d2.get(x)
            if v2 is None:
                continue
            pair = (d1[x], v2)
            if pair not in ids:
                ids[pair] = len(order)
                order.append(pair)
                out[ids[pair]] = {}
            out[src][x] = ids[pair]
    return renumber(pointed_core(LabeledGraph(g1.rank, out, 0)))


def contains(g: LabeledGraph, w: Sequence[int]) -> bool:
    """Membership of a reduced word in the subgroup of a pointed folded graph."""
    return g.trace(Word(w)) == g.basepoint


def tree_paths(g: LabeledGraph, start: Optional[int] = None) -> tuple[dict, set]:
    """BFS spanning tree from ``start``; returns (vertex -> path word, tree edges)."""
    start = g.basepoint if start is None else start
    paths = {start: Word()}
    tree = set()
    queue = deque([start])
    while queue:
        u = queue.popleft()
        d = g.out[u]
        for x in sorted(d, key=letter_key):
            v = d[x]
            if v not in paths:
                paths[v] = paths[u] * Word((x,))
                tree.add((u, x))
                tree.add((v, -x))
                queue.append(v)
    return paths, tree


def spanning_tree_basis(g: LabeledGraph) -> list[Word]:
    """Free basis of the subgroup read off a BFS spanning tree.

    One word per non-tree edge pair, in BFS order of the positively labeled
    edge's source, then by label.
    """
    paths, tree = tree_paths(g)
    basis = []
    for u in bfs_order(g, g.basepoint):
        d = g.out[u]
        for x in sorted(d, key=letter_key):
            if x < 0 or (u, x) in tree:
                continue
            basis.append(paths[u] * Word((x,)) * ~paths[d[x]])
    return basis


def _propagate(g1: LabeledGraph, g2: LabeledGraph, s1: int, s2: int) -> Optional[dict]:
    phi = {s1: s2}
    used = {s2}
    stack = [s1]
    while stack:
        u = stack.pop()
        d1, d2 = g1.out[u], g2.out[phi[u]]
        if len(d1) != len(d2):
            return None
        for x, v in d1.items():
            t = d2.get(x)
            if t is None:
                return None
            if v in phi:
                if phi[v] != t:
                    return None
            else:
                if t in used:
                    return None
                phi[v] = t
                used.add(t)
                stack.append(v)
    return phi


def labeled_isomorphism(
    g1: LabeledGraph, g2: LabeledGraph, pointed: bool = False
) -> Optional[dict]:
    """A label-preserving vertex bijection ``g1 -> g2``, or None.

    With ``pointed=True`` the basepoints must correspond.
    """
    if g1.num_vertices != g2.num_vertices or g1.num_edge_pairs != g2.num_edge_pairs:
        return None
    if not g1.out:
        return {}
    if pointed:
        starts1, candidates = g1.basepoint, [g2.basepoint]
    else:
        starts1, candidates = min(g1.out), sorted(g2.out)
    for s2 in candidates:
        phi = _propagate(g1, g2, starts1, s2)
        if phi is not None and len(phi) == g1.num_vertices:
            return phi
    return None


def _encoding(g: LabeledGraph, start: int, order_labels: list[int]) -> tuple:
    num = {start: 0}
    order = [start]
    code = []
    i = 0
    while i < len(order):
        d = g.out[order[i]]
        i += 1
        for x in order_labels:
            v = d.get(x)
            if v is None:
                code.append(-1)
                continue
            if v not in num:
                num[v] = len(order)
                order.append(v)
            code.append(num[v])
    return tuple(code)


def canonical_start(g: LabeledGraph, pointed: bool = False) -> tuple[int, tuple]:
    """The start vertex realising the least traversal encoding, and the code."""
    labs = letters(max(g.labels(), default=0))
    if pointed:
        return g.basepoint, _encoding(g, g.basepoint, labs)
    # only vertices with the least letter signature can start the least code
    sig = {v: (len(d), sorted(d, key=letter_key)) for v, d in g.out.items()}
    low = min(sig.values())
    best = None
    for v in g.out:
        if sig[v] != low:
            continue
        code = _encoding(g, v, labs)
        if best is None or code < best[1]:
            best = (v, code)
    return best


def canonical_key(g: LabeledGraph, pointed: bool = False) -> bytes:
    """Isomorphism-invariant encoding of a connected folded graph.

    Equal keys exactly when the graphs are label-isomorphic (basepoint
    preserving when ``pointed``).
    """
    if not g.out:
        return b"()"
    _, code = canonical_start(g, pointed)
    top = max(g.labels(), default=0)
    return (f"{top}:{len(g.out)}:" + ",".join(map(str, code))).encode()


def canonical_form(g: LabeledGraph) -> LabeledGraph:
    """Renumbered copy pointed at the canonical start vertex (vertex 0)."""
    start, _ = canonical_start(g)
    return renumber(g.with_basepoint(start))


def apply_aut_to_subgroup(aut: Automorphism, g: Union[LabeledGraph, SubgroupSpec]) -> LabeledGraph:
    """Pointed core of the image subgroup under ``aut``."""
    if isinstance(g, SubgroupSpec):
        gens = g.generators
        n = g.rank
    else:
        gens = spanning_tree_basis(g)
        n = g.rank
    if aut.rank != n:
        raise ValueError(f"rank mismatch: automorphism of F_{aut.rank} on subgroup of F_{n}")
    return build_pointed_core(SubgroupSpec(n, tuple(aut.apply(w) for w in gens)))


def is_trivial(g: LabeledGraph) -> bool:
    return g.num_edge_pairs == 0


def same_subgroup(g1: LabeledGraph, g2: LabeledGraph) -> bool:
    """Equality of subgroups given by pointed cores."""
    return labeled_isomorphism(g1, g2, pointed=True) is not None


def subgroup_graph(spec_or_graph: Union[SubgroupSpec, LabeledGraph]) -> LabeledGraph:
    if isinstance(spec_or_graph, SubgroupSpec):
        return build_pointed_core(spec_or_graph)
    return spec_or_graph


# -- serialisation -------------------------------------------------------------


def to_dict(g: LabeledGraph) -> dict:
    h = renumber(g)
    return {
        "rank": h.rank,
        "basepoint": h.basepoint,
        "vertices": sorted(h.out),
        "edges": [
            {"from": e.source, "to": e.target, "label": letter_str(e.label)}
            for u in sorted(h.out)
            for e in LabeledGraph(h.rank, {u: h.out[u]}).edge_pairs()
        ],
    }


def to_json(g: LabeledGraph) -> str:
    return json.dumps(to_dict(g), indent=2)


def from_dict(data: dict) -> LabeledGraph:
    n = int(data["rank"])
    out: dict[int, dict[int, int]] = {int(v): {} for v in data["vertices"]}
    for e in data["edges"]:
        u, v = int(e["from"]), int(e["to"])
        x = parse_word(e["label"], n)
        if len(x) != 1:
            raise ValueError(f"bad edge label {e['label']!r}")
        x = x[0]
        for a, lab, b in ((u, x, v), (v, -x, u)):
            if a not in out or b not in out:
                raise ValueError(f"edge endpoint not among vertices: {e}")
            if out[a].get(lab, b) != b:
                raise ValueError(f"graph is not folded at vertex {a}")
            out[a][lab] = b
    bp = data.get("basepoint")
    bp = None if bp is None else int(bp)
    if bp is not None and bp not in out:
        raise ValueError(f"basepoint {bp} is not a vertex")
    return LabeledGraph(n, out, bp)


def from_json(text: str) -> LabeledGraph:
    return from_dict(json.loads(text))


def to_dot(g: LabeledGraph, name: str = "G") -> str:
    """DOT text with one arrow per edge pair; the basepoint is drawn as ``*``."""
    d = to_dict(g)
    lines = [f"digraph {name} {{", f'  // rank={d["rank"]}']
    for v in d["vertices"]:
        if v == d["basepoint"]:
            lines.append(f'  {v} [label="*", shape=doublecircle];')
        else:
            lines.append(f'  {v} [label="", shape=point];')
    for e in d["edges"]:
        lines.append(f'  {e["from"]} -> {e["to"]} [label="{e["label"]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_RANK = re.compile(r"//\s*rank=(\d+)")
_DOT_NODE = re.compile(r"^\s*(\d+)\s*\[label=\"([^\"]*)\"")
_DOT_EDGE = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*\[label=\"([A-Za-z])\"\]")


def from_dot(text: str) -> LabeledGraph:
    """Read back DOT produced by :func:`to_dot`."""
    m = _DOT_RANK.search(text)
    if not m:
        raise ValueError("DOT text lacks the rank comment")
    data = {"rank": int(m.group(1)), "basepoint": None, "vertices": [], "edges": []}
    for line in text.splitlines():
        e = _DOT_EDGE.match(line)
        if e:
            data["edges"].append({"from": int(e.group(1)), "to": int(e.group(2)), "label": e.group(3)})
            continue
        v = _DOT_NODE.match(line)
        if v:
            data["vertices"].append(int(v.group(1)))
            if v.group(2) == "*":
                data["basepoint"] = int(v.group(1))
    return from_dict(data)
