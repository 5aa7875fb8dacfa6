"""Characteristic and standard imsets and the linear maps between them.

A characteristic imset is stored dense (one integer per nonempty subset,
indexed by bitmask), a standard imset sparse (it has at most 2n nonzero
coordinates when it comes from a graph).  The two are superset zeta /
Moebius transforms of each other, and both arise from the family variable
vector of a graph through the linear maps phi_n and psi_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .graphs import (
    DirectedGraph,
    Family,
    iter_submasks,
    nodes_from_mask,
    popcount,
)


class ImsetError(ValueError):
    """Inconsistent imset data or mismatched operands."""


@dataclass(frozen=True)
class CharImset:
    """Dense integer vector over nonempty subsets of [n].

    values has length 2^n; entry at index m is the coordinate of the subset
    with bitmask m, entry 0 is unused and fixed to 0.  Coordinates satisfy
    0 <= value <= |subset|; a graph imset has every singleton equal to 1.
    """

    n: int
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != 1 << self.n:
            raise ImsetError("need one value per subset bitmask")
        if self.values[0] != 0:
            raise ImsetError("the empty-set slot must be 0")
        for m, v in enumerate(self.values[1:], start=1):
            if not 0 <= v <= popcount(m):
                raise ImsetError(
                    f"coordinate {nodes_from_mask(m)} = {v} outside 0..|A|"
                )

    def value(self, mask: int) -> int:
        return self.values[mask]


@dataclass(frozen=True)
class StdImset:
    """Sparse signed vector over all subsets of [n], empty set included.

    entries are (bitmask, value) pairs, sorted, zero values omitted; the
    values sum to 0.
    """

    n: int
    entries: tuple[tuple[int, int], ...]

    def __post_init__(self):
        masks = [m for m, _ in self.entries]
        if masks != sorted(set(masks)):
            raise ImsetError("entries must be sorted with unique masks")
        if any(m >= 1 << self.n for m in masks):
            raise ImsetError("entry mask outside the subset lattice")
        if any(v == 0 for _, v in self.entries):
            raise ImsetError("zero entries must be omitted")
        if sum(v for _, v in self.entries) != 0:
            raise ImsetError("standard imset values must sum to 0")

    def value(self, mask: int) -> int:
        for m, v in self.entries:
            if m == mask:
                return v
        return 0

    def dense(self) -> list[int]:
        out = [0] * (1 << self.n)
        for m, v in self.entries:
            out[m] = v
        return out


@dataclass(frozen=True)
class FamilyExponent:
    """Nonnegative integer vector over families, stored sparse.

    The family variable vector of a graph is the special case with one
    count-1 entry per node; higher counts appear as monomial exponents in
    fiber work.
    """

    n: int
    entries: tuple[tuple[Family, int], ...]

    def __post_init__(self):
        fams = [f for f, _ in self.entries]
        if fams != sorted(set(fams), key=lambda f: (f.child, f.parents)):
            raise ImsetError("entries must be sorted by (child, parents)")
        if any(c < 1 for _, c in self.entries):
            raise ImsetError("stored counts must be at least 1")
        for f in fams:
            if f.support >= 1 << self.n:
                raise ImsetError(f"family {f} outside 1..{self.n}")

    def degree(self) -> int:
        return sum(c for _, c in self.entries)

    def as_dict(self) -> dict[Family, int]:
        return dict(self.entries)


FamilyVectorLike = Union[FamilyExponent, Mapping[Family, int]]


def _family_items(u: FamilyVectorLike, n: int | None) -> tuple[int, list[tuple[Family, int]]]:
    if isinstance(u, FamilyExponent):
        return u.n, list(u.entries)
    if n is None:
        raise ImsetError("node count required for plain family mappings")
    return n, list(u.items())


def make_family_exponent(n: int, counts: Mapping[Family, int]) -> FamilyExponent:
    entries = sorted(
        ((f, c) for f, c in counts.items() if c != 0),
        key=lambda fc: (fc[0].child, fc[0].parents),
    )
    return FamilyExponent(n, tuple(entries))


# -- imsets of a graph -------------------------------------------------------

def char_imset(g: DirectedGraph) -> CharImset:
    """Count, for each set A, the members whose parents absorb A.

    c(A) = #{a in A : A - {a} is contained in pa(a)}; the contribution of
    node a is +1 on exactly the sets {a} | S for submasks S of pa(a).

    Examples
    --------
    >>> from .graphs import DirectedGraph
    >>> char_imset(DirectedGraph(2, (2, 1))).value(3)   # the 2-cycle
    2
    """
    vals = [0] * (1 << g.n)
    for a in range(1, g.n + 1):
        bit = 1 << (a - 1)
        for s in iter_submasks(g.pa(a)):
            vals[s | bit] += 1
    return CharImset(g.n, tuple(vals))


def std_imset(g: DirectedGraph) -> StdImset:
    """Signed sum of family and parent indicators, sum(delta_fa - delta_pa)."""
    acc: dict[int, int] = {}
    for b in range(1, g.n + 1):
        acc[g.fa(b)] = acc.get(g.fa(b), 0) + 1
        acc[g.pa(b)] = acc.get(g.pa(b), 0) - 1
    entries = tuple(sorted((m, v) for m, v in acc.items() if v != 0))
    return StdImset(g.n, entries)


def family_vector(g: DirectedGraph) -> FamilyExponent:
    """The 0/1 exponent marking each node's actual family."""
    return make_family_exponent(g.n, {Family(g.pa(b), b): 1 for b in range(1, g.n + 1)})


# -- the linear maps phi and psi ---------------------------------------------

def phi_apply(u: FamilyVectorLike, n: int | None = None) -> list[int]:
    """Image of a family-indexed vector under phi_n.

    Returns the dense vector over subset bitmasks (index 0 stays 0):
    phi(u)(S) = sum over b in S, A containing S - {b} of u(A -> b).
    Signed inputs are allowed; for a family variable vector the result is
    the characteristic imset.
    """
    n, items = _family_items(u, n)
    out = [0] * (1 << n)
    for fam, coeff in items:
        bit = 1 << (fam.child - 1)
        for s in iter_submasks(fam.parents):
            out[s | bit] += coeff
    return out


def psi_apply(u: FamilyVectorLike, n: int | None = None) -> list[int]:
    """Image under psi_n, which sends e_{A -> b} to delta_{A|b} - delta_A."""
    n, items = _family_items(u, n)
    out = [0] * (1 << n)
    for fam, coeff in items:
        out[fam.support] += coeff
        out[fam.parents] -= coeff
    return out


# -- zeta / Moebius transforms over the superset lattice ---------------------

def _superset_zeta(v: list[int], n: int) -> None:
    for i in range(n):
        bit = 1 << i
        for m in range(1 << n):
            if not m & bit:
                v[m] += v[m | bit]


def _superset_moebius(v: list[int], n: int) -> None:
    for i in range(n):
        bit = 1 << i
        for m in range(1 << n):
            if not m & bit:
                v[m] -= v[m | bit]


def char_from_std(s: StdImset) -> CharImset:
    """c(A) = sum of s(B) over supersets B of A."""
    v = s.dense()
    _superset_zeta(v, s.n)
    # the empty-set slot collects the full sum, which is 0 by invariant
    v[0] = 0
    return CharImset(s.n, tuple(v))


def std_from_char(c: CharImset) -> StdImset:
    """Moebius inversion of char_from_std; s(empty) is fixed by the zero sum."""
    v = list(c.values)
    _superset_moebius(v, c.n)
    v[0] = -sum(v[1:])
    entries = tuple((m, val) for m, val in enumerate(v) if val != 0)
    return StdImset(c.n, entries)


# -- dense matrices of phi and psi -------------------------------------------

@dataclass(frozen=True)
class IntMatrix:
    """Exact integer matrix with row and column legends."""

    rows: tuple
    cols: tuple
    data: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.data) != len(self.rows):
            raise ImsetError("row legend does not match the data")
        if any(len(r) != len(self.cols) for r in self.data):
            raise ImsetError("column legend does not match the data")

    def to_json(self) -> dict:
        return {
            "rows": [_legend_json(r) for r in self.rows],
            "cols": [_legend_json(c) for c in self.cols],
            "data": [list(r) for r in self.data],
        }


def _legend_json(item):
    if isinstance(item, Family):
        return {"parents": list(nodes_from_mask(item.parents)), "child": item.child}
    if isinstance(item, int):
        return list(nodes_from_mask(item))
    return item


def all_families(n: int) -> list[Family]:
    """Every family A -> b on [n], ordered by child then parent mask.

    Under this order the columns with max(A) < b appear with their support
    masks A | {b} in increasing order, the linear extension that makes the
    corresponding square submatrix of phi upper triangular.
    """
    out = []
    for b in range(1, n + 1):
        others = ((1 << n) - 1) & ~(1 << (b - 1))
        masks = sorted(s for s in iter_submasks(others))
        out.extend(Family(a, b) for a in masks)
    return out


def phi_matrix(n: int) -> IntMatrix:
    """Dense matrix of phi_n: rows are nonempty subsets, columns families."""
    if not 1 <= n <= 8:
        raise ImsetError("dense phi matrix limited to 1 <= n <= 8")
    fams = all_families(n)
    rows = tuple(range(1, 1 << n))
    data = []
    for s in rows:
        row = []
        for f in fams:
            bit = 1 << (f.child - 1)
            row.append(1 if (s & bit) and not (s & ~bit & ~f.parents) else 0)
        data.append(tuple(row))
    return IntMatrix(rows, tuple(fams), tuple(data))


def psi_matrix(n: int) -> IntMatrix:
    """Dense matrix of psi_n: rows are all subsets, empty set included."""
    if not 1 <= n <= 8:
        raise ImsetError("dense psi matrix limited to 1 <= n <= 8")
    fams = all_families(n)
    rows = tuple(range(0, 1 << n))
    data = [[0] * len(fams) for _ in rows]
    for j, f in enumerate(fams):
        data[f.support][j] += 1
        data[f.parents][j] -= 1
    return IntMatrix(rows, tuple(fams), tuple(tuple(r) for r in data))


# -- equivalence and skeleton extraction -------------------------------------

def imset_equivalent(g: DirectedGraph, h: DirectedGraph) -> bool:
    """Coordinatewise equality of the two characteristic imsets."""
    if g.n != h.n:
        raise ImsetError("node counts differ")
    return char_imset(g).values == char_imset(h).values


def imset_differences(g: DirectedGraph, h: DirectedGraph) -> list[tuple[int, int, int]]:
    """All (mask, c_g, c_h) triples where the two imsets disagree."""
    if g.n != h.n:
        raise ImsetError("node counts differ")
    cg, ch = char_imset(g), char_imset(h)
    return [
        (m, cg.values[m], ch.values[m])
        for m in range(1, 1 << g.n)
        if cg.values[m] != ch.values[m]
    ]


def skeleton_from_char(c: CharImset) -> dict[tuple[int, int], int]:
    """Pair coordinates of a graph imset are exactly the edge multiplicities."""
    for b in range(c.n):
        if c.values[1 << b] != 1:
            raise ImsetError(f"singleton coordinate {b + 1} must be 1")
    out = {}
    for i in range(1, c.n + 1):
        for j in range(i + 1, c.n + 1):
            m = c.values[(1 << (i - 1)) | (1 << (j - 1))]
            if m:
                out[(i, j)] = m
    return out


# -- serialization -----------------------------------------------------------

def imset_to_json(imset: CharImset | StdImset) -> dict:
    if isinstance(imset, CharImset):
        entries = [
            {"set": list(nodes_from_mask(m)), "value": v}
            for m, v in enumerate(imset.values)
            if v != 0
        ]
        return {"n": imset.n, "kind": "char", "entries": entries}
    entries = [
        {"set": list(nodes_from_mask(m)), "value": v} for m, v in imset.entries
    ]
    return {"n": imset.n, "kind": "std", "entries": entries}


def imset_from_json(obj: dict) -> CharImset | StdImset:
    if not isinstance(obj, dict) or "n" not in obj or "kind" not in obj:
        raise ImsetError('imset JSON needs keys "n", "kind" and "entries"')
    n = obj["n"]
    if not isinstance(n, int) or not 1 <= n <= 16:
        raise ImsetError("node count outside 1..16")
    seen = {}
    for e in obj.get("entries", []):
        try:
            nodes, value = e["set"], e["value"]
        except (TypeError, KeyError):
            raise ImsetError(f"bad entry {e!r}") from None
        if not isinstance(value, int):
            raise ImsetError(f"entry value {value!r} must be an integer")
        mask = 0
        for v in nodes:
            if not isinstance(v, int) or not 1 <= v <= n:
                raise ImsetError(f"entry node {v!r} outside 1..{n}")
            mask |= 1 << (v - 1)
        if mask in seen:
            raise ImsetError(f"duplicate entry for set {sorted(nodes)}")
        seen[mask] = value
    if obj["kind"] == "char":
        vals = [0] * (1 << n)
        for m, v in seen.items():
            if m == 0:
                raise ImsetError("characteristic imsets have no empty-set entry")
            vals[m] = v
        return CharImset(n, tuple(vals))
    if obj["kind"] == "std":
        entries = tuple(sorted((m, v) for m, v in seen.items() if v != 0))
        return StdImset(n, entries)
    raise ImsetError(f'unknown imset kind {obj["kind"]!r}')
