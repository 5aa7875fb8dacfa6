"""Exact integer lattice algebra around the map phi.

Everything here runs on native Python ints, so arithmetic is exact at any
magnitude and the overflow question does not arise.  The pieces: the flip
vectors spanning the kernel of phi, a column-style Hermite normal form
used both for canonical lattice comparison and for integer kernel
extraction, the constructive decomposition of kernel vectors into flips,
and enumeration of imset fibers plus their connectivity under discrete
moves.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

from .graphs import (
    CoveredFlip,
    CycleReversal,
    DirectedGraph,
    Family,
    GraphError,
    apply_covered_flip,
    covered_edges,
    iter_submasks,
    nodes_from_mask,
    popcount,
    reverse_cycle,
)
from .imsets import (
    CharImset,
    FamilyVectorLike,
    ImsetError,
    IntMatrix,
    _family_items,
    all_families,
    char_imset,
    family_vector,
    make_family_exponent,
)


class LatticeError(ValueError):
    """Bad lattice input or a search over budget."""


class NotInKernelError(LatticeError):
    """Raised when a vector fails to reduce to zero; carries the residual."""

    def __init__(self, residual: dict[Family, int]):
        self.residual = residual
        desc = ", ".join(f"{f}:{v:+d}" for f, v in sorted(
            residual.items(), key=lambda fv: (fv[0].child, fv[0].parents)))
        super().__init__(f"not in kernel, residual {desc}")


# -- flip vectors ------------------------------------------------------------

@dataclass(frozen=True)
class FlipVector:
    """The kernel generator e_{A->b} + e_{A|b->c} - e_{A->c} - e_{A|c->b}."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.b == self.c:
            raise LatticeError("flip endpoints must differ")
        if self.a & ((1 << (self.b - 1)) | (1 << (self.c - 1))):
            raise LatticeError("endpoints cannot lie in the shared set")

    def entries(self) -> dict[Family, int]:
        bb, cb = 1 << (self.b - 1), 1 << (self.c - 1)
        return {
            Family(self.a, self.b): 1,
            Family(self.a | bb, self.c): 1,
            Family(self.a, self.c): -1,
            Family(self.a | cb, self.b): -1,
        }


def flip_vectors(n: int) -> list[FlipVector]:
    """All generators with b < c; there are C(n,2) * 2^(n-2) of them."""
    if n < 2:
        raise LatticeError("flip vectors need at least 2 nodes")
    out = []
    for b, c in itertools.combinations(range(1, n + 1), 2):
        others = ((1 << n) - 1) & ~(1 << (b - 1)) & ~(1 << (c - 1))
        for a in sorted(iter_submasks(others)):
            out.append(FlipVector(a, b, c))
    return out


# -- Hermite normal form and integer kernels ---------------------------------

def _echelon(cols: list[list[int]], nrows: int) -> int:
    """Column-reduce in place over the first nrows coordinates; returns rank.

    Deterministic: rows are cleared lowest index first, and the pivot among
    candidates is the entry of smallest magnitude (ties to the leftmost
    column).  After the call, columns [rank:] are zero on the first nrows
    coordinates, and entries at each pivot row left of its pivot lie in
    [0, pivot).
    """
    r = 0
    for row in range(nrows):
        while True:
            nz = [j for j in range(r, len(cols)) if cols[j][row] != 0]
            if not nz:
                break
            if len(nz) == 1:
                j = nz[0]
                cols[r], cols[j] = cols[j], cols[r]
                break
            j0 = min(nz, key=lambda j: (abs(cols[j][row]), j))
            piv = cols[j0][row]
            for j in nz:
                if j == j0:
                    continue
                q = cols[j][row] // piv
                if q:
                    base = cols[j0]
                    cols[j] = [a - q * b for a, b in zip(cols[j], base)]
        if r < len(cols) and cols[r][row] != 0:
            if cols[r][row] < 0:
                cols[r] = [-a for a in cols[r]]
            piv = cols[r][row]
            for j in range(r):
                q = cols[j][row] // piv
                if q:
                    base = cols[r]
                    cols[j] = [a - q * b for a, b in zip(cols[j], base)]
            r += 1
    return r


def hermite_normal_form(columns: Iterable[Iterable[int]]) -> list[tuple[int, ...]]:
    """Canonical basis of the integer column span.

    Two generator sets span the same lattice exactly when their forms are
    equal, so this is the comparison key for lattices_equal.
    """
    cols = [list(c) for c in columns]
    if not cols:
        return []
    m = len(cols[0])
    if any(len(c) != m for c in cols):
        raise LatticeError("generators must share one ambient dimension")
    rank = _echelon(cols, m)
    return [tuple(c) for c in cols[:rank]]


def _matrix_columns(m: IntMatrix) -> list[list[int]]:
    return [[row[j] for row in m.data] for j in range(len(m.cols))]


@dataclass(frozen=True)
class LatticeBasis:
    """Integer lattice given by generator columns over a coordinate legend."""

    legend: tuple
    vectors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if any(len(v) != len(self.legend) for v in self.vectors):
            raise LatticeError("generator length must match the legend")

    def rank(self) -> int:
        return len(hermite_normal_form(self.vectors))

    def to_int_matrix(self) -> IntMatrix:
        data = tuple(
            tuple(v[i] for v in self.vectors) for i in range(len(self.legend))
        )
        return IntMatrix(tuple(self.legend), tuple(range(len(self.vectors))), data)


def flip_lattice(n: int) -> LatticeBasis:
    """The lattice spanned by all flip vectors, in all_families coordinates."""
    fams = all_families(n)
    index = {f: i for i, f in enumerate(fams)}
    vectors = []
    for fv in flip_vectors(n):
        col = [0] * len(fams)
        for fam, val in fv.entries().items():
            col[index[fam]] = val
        vectors.append(tuple(col))
    return LatticeBasis(tuple(fams), tuple(vectors))


def integer_kernel_basis(m: IntMatrix) -> LatticeBasis:
    """Basis of {v integer : Mv = 0} by exact column elimination.

    The identity block stacked under M tracks the column operations; the
    tracker parts of the columns whose M-part vanished form the kernel
    basis, with no floating point anywhere.
    """
    nrows, ncols = len(m.rows), len(m.cols)
    cols = _matrix_columns(m)
    for j in range(ncols):
        cols[j] = cols[j] + [1 if i == j else 0 for i in range(ncols)]
    rank = _echelon(cols, nrows)
    vectors = tuple(tuple(c[nrows:]) for c in cols[rank:])
    return LatticeBasis(tuple(m.cols), vectors)


def lattices_equal(b1: LatticeBasis, b2: LatticeBasis) -> bool:
    """Canonical Hermite forms coincide."""
    if len(b1.legend) != len(b2.legend):
        raise LatticeError("ambient dimensions differ")
    return hermite_normal_form(b1.vectors) == hermite_normal_form(b2.vectors)


# -- constructive decomposition into flips -----------------------------------

def _reduction_statistic(vec: Mapping[Family, int]) -> int:
    total = 0
    for fam, val in vec.items():
        if val and fam.parents >> fam.child:
            total += popcount(fam.parents)
    return total


def decompose_kernel_vector(
    v: FamilyVectorLike,
    n: int | None = None,
    *,
    with_trace: bool = False,
):
    """Write a kernel vector as a signed combination of flip vectors.

    Repeatedly picks a nonzero coordinate at a family F -> b whose largest
    member c = max(F) exceeds the child, and adds a multiple of the flip on
    (F - {c}, b, c) that clears it.  The weighted count of nonzero
    out-of-order coordinates drops every step, so the loop terminates; the
    leftover is supported on families with max(F) < b only, where phi is
    injective, hence it is zero exactly when v was in the kernel.

    Returns the list of (coefficient, FlipVector) terms whose signed sum is
    v; with_trace=True also returns the statistic trace.  Raises
    NotInKernelError with the residual otherwise.
    """
    n, items = _family_items(v, n)
    vec: dict[Family, int] = {}
    for fam, coeff in items:
        if coeff:
            vec[fam] = vec.get(fam, 0) + coeff
    vec = {f: c for f, c in vec.items() if c}
    terms: list[tuple[int, FlipVector]] = []
    trace = [_reduction_statistic(vec)]
    while True:
        eligible = [f for f in vec if f.parents >> f.child]
        if not eligible:
            break
        fam = max(eligible, key=lambda f: (f.parents, -f.child))
        kappa = vec[fam]
        c = fam.parents.bit_length()
        b = fam.child
        a = fam.parents & ~(1 << (c - 1))
        flip = FlipVector(a, b, c)
        for f2, delta in flip.entries().items():
            new = vec.get(f2, 0) + kappa * delta
            if new:
                vec[f2] = new
            else:
                vec.pop(f2, None)
        terms.append((-kappa, flip))
        trace.append(_reduction_statistic(vec))
    if vec:
        raise NotInKernelError(dict(vec))
    if with_trace:
        return terms, trace
    return terms


def recompose(terms: Iterable[tuple[int, FlipVector]]) -> dict[Family, int]:
    """Signed sum of flip terms, for checking decompositions."""
    out: dict[Family, int] = {}
    for coeff, flip in terms:
        for fam, delta in flip.entries().items():
            new = out.get(fam, 0) + coeff * delta
            if new:
                out[fam] = new
            else:
                out.pop(fam, None)
    return out


# -- fibers ------------------------------------------------------------------

@dataclass(frozen=True)
class Fiber:
    """All graphs sharing one characteristic imset, exactly deduplicated."""

    imset: CharImset
    graphs: tuple[DirectedGraph, ...]


FIBER_MAX_NODES = 6
FIBER_CANDIDATE_CAP = 10 ** 9


def fiber_enumerate(c: CharImset, jobs: int = 1) -> Fiber:
    """Every graph whose characteristic imset equals c.

    The pair coordinates fix the skeleton (multiplicity 2 forces both edge
    directions), which restricts each node's parent set to a window between
    its forced parents and its neighborhood.  The search assigns parent
    sets node by node and prunes on every coordinate that has just become
    fully determined, then confirms full imset equality per survivor.
    """
    n = c.n
    if n > FIBER_MAX_NODES:
        raise LatticeError(f"fiber enumeration capped at n <= {FIBER_MAX_NODES}")
    for b in range(n):
        if c.values[1 << b] != 1:
            raise LatticeError(
                f"fiber requires singleton coordinates 1, got "
                f"{c.values[1 << b]} at {{{b + 1}}}"
            )
    neighbors = [0] * (n + 1)
    forced = [0] * (n + 1)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            mult = c.values[(1 << (i - 1)) | (1 << (j - 1))]
            if mult >= 1:
                neighbors[i] |= 1 << (j - 1)
                neighbors[j] |= 1 << (i - 1)
            if mult == 2:
                forced[i] |= 1 << (j - 1)
                forced[j] |= 1 << (i - 1)

    candidates: list[list[int]] = []
    for b in range(1, n + 1):
        free = neighbors[b] & ~forced[b]
        candidates.append(sorted(forced[b] | s for s in iter_submasks(free)))
    space = 1
    for cand in candidates:
        space *= len(cand)
    if space > FIBER_CANDIDATE_CAP:
        counts = " * ".join(str(len(cand)) for cand in candidates)
        raise LatticeError(
            f"fiber search space {counts} = {space} exceeds the "
            f"{FIBER_CANDIDATE_CAP} candidate cap"
        )

    def consistent(parents: list[int], k: int) -> bool:
        # check every coordinate that the assignment of pa(k) completes
        kbit = 1 << (k - 1)
        assigned = (1 << k) - 1
        rest = assigned & ~kbit
        for s in iter_submasks(rest):
            mask = s | kbit
            count = 0
            for a in nodes_from_mask(mask):
                if not (mask & ~(1 << (a - 1))) & ~parents[a - 1]:
                    count += 1
            if count != c.values[mask]:
                return False
        return True

    def search(first_choices: list[int]) -> list[DirectedGraph]:
        found = []
        parents = [0] * n

        def walk(k: int):
            choices = first_choices if k == 1 else candidates[k - 1]
            for p in choices:
                parents[k - 1] = p
                if not consistent(parents, k):
                    continue
                if k == n:
                    g = DirectedGraph(n, tuple(parents))
                    if char_imset(g) == c:
                        found.append(g)
                else:
                    walk(k + 1)

        walk(1)
        return found

    if jobs <= 1 or len(candidates[0]) <= 1:
        graphs = search(candidates[0])
    else:
        jobs = min(jobs, len(candidates[0]))
        shards = [candidates[0][i::jobs] for i in range(jobs)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(search, shards))
        graphs = [g for part in parts for g in part]
    graphs.sort(key=lambda g: g.parents)
    return Fiber(c, tuple(graphs))


def fiber_of_graph(g: DirectedGraph, jobs: int = 1) -> Fiber:
    return fiber_enumerate(char_imset(g), jobs=jobs)


# -- moves and connectivity --------------------------------------------------

def directed_cycles(g: DirectedGraph) -> list[tuple[int, ...]]:
    """All simple directed cycles, each rotated to start at its least node."""
    out = []
    for k in range(2, g.n + 1):
        for combo in itertools.combinations(range(1, g.n + 1), k):
            first = combo[0]
            for rest in itertools.permutations(combo[1:]):
                seq = (first,) + rest
                if all(g.has_edge(seq[t], seq[(t + 1) % k]) for t in range(k)):
                    out.append(seq)
    return out


@dataclass(frozen=True)
class MoveComponents:
    """Partition of a fiber's graph indices under the declared move set."""

    moves: tuple[str, ...]
    components: tuple[tuple[int, ...], ...]


def fiber_move_components(
    fiber: Fiber, moves: Iterable[type] = (CoveredFlip, CycleReversal)
) -> MoveComponents:
    """Connected components of the fiber under single applications of moves.

    An edge joins two members when one covered flip, or one cycle reversal
    whose result stays inside the fiber, maps one to the other.
    """
    move_set = set(moves)
    bad = move_set - {CoveredFlip, CycleReversal}
    if bad:
        raise LatticeError(f"unknown move kinds {sorted(m.__name__ for m in bad)}")
    if not fiber.graphs:
        raise LatticeError("fiber is empty")
    index = {g.parents: i for i, g in enumerate(fiber.graphs)}
    parent = list(range(len(fiber.graphs)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for i, g in enumerate(fiber.graphs):
        if CoveredFlip in move_set:
            for edge in covered_edges(g):
                h = apply_covered_flip(g, edge)
                j = index.get(h.parents)
                if j is not None:
                    union(i, j)
        if CycleReversal in move_set:
            for cyc in directed_cycles(g):
                h = reverse_cycle(g, cyc)
                j = index.get(h.parents)
                if j is not None:
                    union(i, j)

    groups: dict[int, list[int]] = {}
    for i in range(len(fiber.graphs)):
        groups.setdefault(find(i), []).append(i)
    comps = tuple(tuple(groups[r]) for r in sorted(groups))
    names = tuple(sorted(m.__name__ for m in move_set))
    return MoveComponents(names, comps)


# -- cycle reversal binomials ------------------------------------------------

def cycle_generator_exponents(seq: Iterable[int], n: int | None = None):
    """The two monomial exponents of the reversal binomial of a k-cycle.

    For nodes (i1, ..., ik) these are the family multisets of the directed
    cycle i1 -> i2 -> ... -> ik -> i1 and of its reversal; phi agrees on
    the two, which is what makes the difference a kernel element.
    """
    nodes = tuple(seq)
    k = len(nodes)
    if len(set(nodes)) != k:
        raise LatticeError("cycle nodes must be distinct")
    if k < 3:
        raise LatticeError("cycle generators start at length 3")
    if n is None:
        n = max(nodes)
    if max(nodes) > n or min(nodes) < 1:
        raise LatticeError(f"cycle nodes outside 1..{n}")
    fwd = {
        Family(1 << (nodes[t] - 1), nodes[(t + 1) % k]): 1 for t in range(k)
    }
    bwd = {
        Family(1 << (nodes[(t + 1) % k] - 1), nodes[t]): 1 for t in range(k)
    }
    return make_family_exponent(n, fwd), make_family_exponent(n, bwd)
