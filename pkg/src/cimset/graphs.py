"""Loopless directed graphs on at most 16 nodes.

Nodes are labelled 1..n externally and bit (i-1) internally, so a set of
nodes is an int bitmask.  Graphs are stored as one parent mask per node,
which makes families, skeletons and covered-edge tests cheap bit fiddling.
Cycles are allowed everywhere; operations that only make sense for DAGs
(Markov equivalence, essential graphs) check acyclicity up front.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Iterator

MAX_NODES = 16


class GraphError(ValueError):
    """Malformed graph input or an operation applied out of its domain."""


# -- node sets as bitmasks ---------------------------------------------------

def mask_from_nodes(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << (v - 1)
    return m


def nodes_from_mask(mask: int) -> tuple[int, ...]:
    """Sorted 1-based node ids of a bitmask."""
    out = []
    v = 1
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return tuple(out)


def iter_submasks(mask: int) -> Iterator[int]:
    """All submasks of mask, descending, ending with 0."""
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True, order=True)
class Family:
    """A parent set together with its distinguished child, written A -> b."""

    parents: int
    child: int

    def __post_init__(self):
        if self.parents & (1 << (self.child - 1)):
            raise GraphError(f"child {self.child} cannot be its own parent")

    @property
    def support(self) -> int:
        """Bitmask of parents plus the child."""
        return self.parents | (1 << (self.child - 1))

    def __str__(self):
        ps = "".join(str(v) for v in nodes_from_mask(self.parents)) or "0"
        return f"{ps}->{self.child}"


@dataclass(frozen=True)
class DirectedGraph:
    """A loopless directed graph given by one parent mask per node.

    Parameters
    ----------
    n : int
        Node count, 1 <= n <= 16.
    parents : tuple of int
        Entry b-1 is the bitmask of pa(b).

    Examples
    --------
    >>> g = DirectedGraph(2, (0, 1))   # the single edge 1 -> 2
    >>> g.edges()
    ((1, 2),)
    """

    n: int
    parents: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.n <= MAX_NODES:
            raise GraphError(f"node count {self.n} outside 1..{MAX_NODES}")
        if len(self.parents) != self.n:
            raise GraphError("need exactly one parent set per node")
        full = (1 << self.n) - 1
        for b, pa in enumerate(self.parents, start=1):
            if pa & ~full:
                raise GraphError(f"parent of node {b} outside 1..{self.n}")
            if pa & (1 << (b - 1)):
                raise GraphError(f"self-loop at node {b}")

    def pa(self, b: int) -> int:
        return self.parents[b - 1]

    def fa(self, b: int) -> int:
        """Family mask pa(b) | {b}."""
        return self.parents[b - 1] | (1 << (b - 1))

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.parents[v - 1] & (1 << (u - 1)))

    def edges(self) -> tuple[tuple[int, int], ...]:
        """All edges (u, v) meaning u -> v, sorted."""
        out = []
        for v in range(1, self.n + 1):
            for u in nodes_from_mask(self.parents[v - 1]):
                out.append((u, v))
        return tuple(sorted(out))

    def with_parents(self, b: int, new_pa: int) -> "DirectedGraph":
        ps = list(self.parents)
        ps[b - 1] = new_pa
        return DirectedGraph(self.n, tuple(ps))


@dataclass(frozen=True)
class CoveredFlip:
    """Flip move on the covered edge b -> c with common parent set A."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.b == self.c:
            raise GraphError("flip endpoints must differ")
        if self.a & (1 << (self.b - 1)) or self.a & (1 << (self.c - 1)):
            raise GraphError("flip endpoints cannot lie in the shared parent set")


@dataclass(frozen=True)
class CycleReversal:
    nodes: tuple[int, ...]

    def __post_init__(self):
        if len(self.nodes) < 2 or len(set(self.nodes)) != len(self.nodes):
            raise GraphError("cycle needs at least 2 distinct nodes")


@dataclass(frozen=True)
class ColumnRelabel:
    old: Family
    new: Family

    def __post_init__(self):
        if self.old.support != self.new.support:
            raise GraphError("relabel must keep the support set")


# -- parsing and serialization -----------------------------------------------

def _graph_from_edge_list(n: int, edges: Iterable[tuple[int, int]]) -> DirectedGraph:
    if not isinstance(n, int) or isinstance(n, bool):
        raise GraphError("node count must be an integer")
    if not 1 <= n <= MAX_NODES:
        raise GraphError(f"node count {n} outside 1..{MAX_NODES}")
    parents = [0] * n
    for u, v in edges:
        if not (1 <= u <= n and 1 <= v <= n):
            raise GraphError(f"edge ({u}, {v}) mentions a node outside 1..{n}")
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        parents[v - 1] |= 1 << (u - 1)  # duplicates collapse
    return DirectedGraph(n, tuple(parents))


def graph_from_json(obj: dict) -> DirectedGraph:
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise GraphError('graph JSON needs keys "n" and "edges"')
    edges = []
    for e in obj["edges"]:
        if not (isinstance(e, (list, tuple)) and len(e) == 2):
            raise GraphError(f"bad edge entry {e!r}")
        u, v = e
        if not isinstance(u, int) or not isinstance(v, int):
            raise GraphError(f"bad edge entry {e!r}")
        edges.append((u, v))
    return _graph_from_edge_list(obj["n"], edges)


def graph_to_json(g: DirectedGraph) -> dict:
    return {"n": g.n, "edges": [list(e) for e in g.edges()]}


def parse_graph(text: str) -> DirectedGraph:
    """Parse either graph format.

    Text format: first line ``n=<int>``, then one ``<u> -> <v>`` line per
    edge; ``#`` starts a comment.  A leading ``{`` switches to the JSON
    format ``{"n": ..., "edges": [[u, v], ...]}``.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise GraphError(f"bad graph JSON: {e}") from None
        return graph_from_json(obj)

    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            head = line.replace(" ", "")
            if not head.startswith("n="):
                raise GraphError(f"line {lineno}: expected n=<int> first")
            try:
                n = int(head[2:])
            except ValueError:
                raise GraphError(f"line {lineno}: bad node count {head[2:]!r}") from None
            continue
        if "->" not in line:
            raise GraphError(f"line {lineno}: expected <u> -> <v>")
        left, _, right = line.partition("->")
        try:
            u, v = int(left), int(right)
        except ValueError:
            raise GraphError(f"line {lineno}: bad edge {line!r}") from None
        edges.append((u, v))
    if n is None:
        raise GraphError("empty graph text")
    return _graph_from_edge_list(n, edges)


# -- combinatorial structure -------------------------------------------------

def families(g: DirectedGraph) -> list[Family]:
    """One family pa(b) -> b per node, in node order."""
    return [Family(g.pa(b), b) for b in range(1, g.n + 1)]


def skeleton(g: DirectedGraph) -> dict[tuple[int, int], int]:
    """Underlying undirected edge multiset.

    Returns a map {(i, j): multiplicity} with i < j; a 2-cycle shows up
    as multiplicity 2, absent pairs are omitted.
    """
    counts: dict[tuple[int, int], int] = {}
    for u, v in g.edges():
        key = (u, v) if u < v else (v, u)
        counts[key] = counts.get(key, 0) + 1
    return counts


def v_structures(g: DirectedGraph) -> set[tuple[int, int, int]]:
    """Triples (i, k, j), i < j, with i -> k <- j and i, j nonadjacent."""
    out = set()
    for k in range(1, g.n + 1):
        ps = nodes_from_mask(g.pa(k))
        for i, j in itertools.combinations(ps, 2):
            if not g.has_edge(i, j) and not g.has_edge(j, i):
                out.add((i, k, j))
    return out


def is_acyclic(g: DirectedGraph) -> bool:
    """Standard peel-off topological test."""
    remaining = (1 << g.n) - 1
    while remaining:
        for b in range(1, g.n + 1):
            bit = 1 << (b - 1)
            if remaining & bit and not (g.pa(b) & remaining):
                remaining &= ~bit
                break
        else:
            return False
    return True


def covered_edges(g: DirectedGraph) -> set[tuple[int, int]]:
    """Edges i -> j with pa(j) = pa(i) + {i}; exactly the flippable ones."""
    out = set()
    for u, v in g.edges():
        if g.pa(v) == g.fa(u):
            out.add((u, v))
    return out


def apply_covered_flip(g: DirectedGraph, edge: tuple[int, int]) -> DirectedGraph:
    """Reverse the covered edge i -> j.

    Only the two endpoint families change: pa(j) loses i, pa(i) gains j.
    Flipping back restores the graph exactly.
    """
    i, j = edge
    if not g.has_edge(i, j):
        raise GraphError(f"no edge {i} -> {j}")
    if g.pa(j) != g.fa(i):
        raise GraphError(f"edge {i} -> {j} is not covered")
    ps = list(g.parents)
    ps[j - 1] &= ~(1 << (i - 1))
    ps[i - 1] |= 1 << (j - 1)
    return DirectedGraph(g.n, tuple(ps))


def flip_move(g: DirectedGraph, edge: tuple[int, int]) -> CoveredFlip:
    """The (A, b, c) record of flipping the covered edge b -> c of g."""
    b, c = edge
    if not g.has_edge(b, c) or g.pa(c) != g.fa(b):
        raise GraphError(f"edge {b} -> {c} is not covered")
    return CoveredFlip(g.pa(b), b, c)


def reverse_cycle(g: DirectedGraph, cycle: Iterable[int]) -> DirectedGraph:
    """Reverse a directed cycle, rotating each cycle family's child.

    For cycle node v with cycle successor w, the new parent set of v is
    fa(w) - {v}: v inherits w's family with itself as the child, so the
    multiset of family sets {fa(v)} is preserved while every cycle edge
    ends up reversed.  A 2-cycle is permitted and swaps the two childs.
    """
    nodes = tuple(cycle)
    k = len(nodes)
    if k < 2 or len(set(nodes)) != k:
        raise GraphError("cycle needs at least 2 distinct nodes")
    for t in range(k):
        u, v = nodes[t], nodes[(t + 1) % k]
        if not g.has_edge(u, v):
            raise GraphError(f"missing cycle edge {u} -> {v}")
    ps = list(g.parents)
    for t in range(k):
        v, w = nodes[t], nodes[(t + 1) % k]
        ps[v - 1] = g.fa(w) & ~(1 << (v - 1))
    return DirectedGraph(g.n, tuple(ps))


def markov_equivalent_dags(g: DirectedGraph, h: DirectedGraph) -> bool:
    """Same skeleton and same v-structures; both inputs must be DAGs."""
    if not is_acyclic(g) or not is_acyclic(h):
        raise GraphError("Markov equivalence is defined for acyclic graphs")
    if g.n != h.n:
        raise GraphError("node counts differ")
    return skeleton(g) == skeleton(h) and v_structures(g) == v_structures(h)


def enumerate_dag_class(g: DirectedGraph) -> list[DirectedGraph]:
    """Closure of {g} under covered-edge flips, i.e. g's Markov class.

    Output sorted by the parent mask sequence so the order is reproducible.
    """
    if not is_acyclic(g):
        raise GraphError("class enumeration requires an acyclic input")
    seen = {g.parents: g}
    frontier = [g]
    while frontier:
        nxt = []
        for cur in frontier:
            for edge in sorted(covered_edges(cur)):
                flipped = apply_covered_flip(cur, edge)
                if flipped.parents not in seen:
                    seen[flipped.parents] = flipped
                    nxt.append(flipped)
        frontier = nxt
    return [seen[key] for key in sorted(seen)]


@dataclass(frozen=True)
class PartiallyDirectedGraph:
    """Essential-graph output: some edges directed, some not."""

    n: int
    directed: frozenset[tuple[int, int]]
    undirected: frozenset[tuple[int, int]]

    def __post_init__(self):
        und = {tuple(sorted(e)) for e in self.undirected}
        for u, v in self.directed:
            if tuple(sorted((u, v))) in und:
                raise GraphError(f"edge {u}-{v} both directed and undirected")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "directed": [list(e) for e in sorted(self.directed)],
            "undirected": [list(e) for e in sorted(self.undirected)],
        }


def essential_graph(g: DirectedGraph) -> PartiallyDirectedGraph:
    """Leave an edge directed iff its orientation agrees across the class."""
    cls = enumerate_dag_class(g)
    directed = set()
    undirected = set()
    for u, v in g.edges():
        if any(m.has_edge(v, u) for m in cls):
            undirected.add((min(u, v), max(u, v)))
        else:
            directed.add((u, v))
    return PartiallyDirectedGraph(g.n, frozenset(directed), frozenset(undirected))


# -- relabeling and canonical forms ------------------------------------------

def relabel_graph(g: DirectedGraph, perm: tuple[int, ...]) -> DirectedGraph:
    """Apply the node relabeling i -> perm[i-1]."""
    if sorted(perm) != list(range(1, g.n + 1)):
        raise GraphError("perm must be a permutation of 1..n")
    ps = [0] * g.n
    for b in range(1, g.n + 1):
        ps[perm[b - 1] - 1] = mask_from_nodes(perm[p - 1] for p in nodes_from_mask(g.pa(b)))
    return DirectedGraph(g.n, tuple(ps))


def canonical_form(g: DirectedGraph) -> bytes:
    """Minimum serialized parent sequence over all node relabelings.

    Two graphs are isomorphic iff their canonical forms agree.  Exhaustive
    over all n! permutations, so capped at n <= 8.
    """
    if g.n > 8:
        raise GraphError("canonical form is exhaustive and capped at n <= 8")
    best = None
    for perm in itertools.permutations(range(1, g.n + 1)):
        cand = relabel_graph(g, perm).parents
        if best is None or cand < best:
            best = cand
    return bytes([g.n]) + b"".join(m.to_bytes(2, "big") for m in best)
