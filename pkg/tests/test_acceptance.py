"""Acceptance gate: one test per shipped criterion, at stated budgets.

Each test prints as a single pass/fail line under pytest -v.  Budgets are
asserted with wall-clock checks; numeric tolerances are the contract
values, not loosened ones.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from cimset.cli import main
from cimset.factors import (
    OrthSolverConfig,
    covariance_equiv_numeric,
    givens_flip_factor,
    random_factor,
    _GivensProblem,
    forbidden_mask,
)
from cimset.fixtures import GRAPHS
from cimset.graphs import (
    DirectedGraph,
    apply_covered_flip,
    canonical_form,
    covered_edges,
    essential_graph,
    families,
    flip_move,
    graph_to_json,
    is_acyclic,
    mask_from_nodes,
    nodes_from_mask,
    popcount,
    relabel_graph,
    skeleton,
    v_structures,
)
from cimset.imsets import (
    char_from_std,
    char_imset,
    family_vector,
    phi_apply,
    phi_matrix,
    psi_apply,
    std_from_char,
    std_imset,
)
from cimset.lattice import (
    Family,
    FlipVector,
    NotInKernelError,
    decompose_kernel_vector,
    fiber_enumerate,
    fiber_move_components,
    fiber_of_graph,
    flip_lattice,
    integer_kernel_basis,
    lattices_equal,
    recompose,
)
from cimset.graphs import CoveredFlip, CycleReversal


def run_cli(argv, capsys):
    code = main(argv)
    out, _ = capsys.readouterr()
    return code, out


def all_graphs(n):
    choices = [[m for m in range(1 << n) if not (m >> i) & 1] for i in range(n)]
    return [DirectedGraph(n, ps) for ps in itertools.product(*choices)]


# Worked-example tables: c on the 15 nonempty subsets, s on all 16.
TABLE_C = {
    mask: 0 if mask in (0b1011, 0b1101, 0b1111) else 1 for mask in range(1, 16)
}
TABLE_S = {mask: 0 for mask in range(16)}
TABLE_S.update(
    {0b0001: -1, 0b1000: -1, 0b1001: 1, 0b0110: -1, 0b0111: 1, 0b1110: 1}
)


def test_criterion_01_worked_tables_bit_exact(capsys):
    start = time.perf_counter()
    for key in ("fig4_left", "fig4_right"):
        text = json.dumps(graph_to_json(GRAPHS[key]))
        code, out = run_cli(["imset", "char", text], capsys)
        assert code == 0
        expected = {
            "n": 4,
            "kind": "char",
            "entries": [
                {"set": list(nodes_from_mask(m)), "value": TABLE_C[m]}
                for m in range(1, 16)
                if TABLE_C[m]
            ],
        }
        assert json.loads(out) == expected
        code, out = run_cli(["imset", "std", text], capsys)
        assert code == 0
        expected = {
            "n": 4,
            "kind": "std",
            "entries": [
                {"set": list(nodes_from_mask(m)), "value": TABLE_S[m]}
                for m in sorted(TABLE_S)
                if TABLE_S[m]
            ],
        }
        assert json.loads(out) == expected
    left = json.dumps(graph_to_json(GRAPHS["fig4_left"]))
    right = json.dumps(graph_to_json(GRAPHS["fig4_right"]))
    code, out = run_cli(["equiv", "imset", left, right], capsys)
    assert code == 0 and json.loads(out)["equivalent"] is True
    assert time.perf_counter() - start < 1.0


def test_criterion_02_same_skeleton_counterexample_pair(capsys):
    start = time.perf_counter()
    left, right = GRAPHS["fig7_left"], GRAPHS["fig7_right"]
    assert skeleton(left) == skeleton(right)
    ltext = json.dumps(graph_to_json(left))
    rtext = json.dumps(graph_to_json(right))
    code, out = run_cli(["equiv", "imset", ltext, rtext], capsys)
    assert code == 1
    assert {"set": [2, 3, 5], "values": [0, 1]} in json.loads(out)["differences"]
    code, out = run_cli(
        ["equiv", "numeric", ltext, rtext, "--trials", "5", "--restarts", "50"],
        capsys,
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "EvidenceEquivalent"
    residuals = doc["residuals"]["g_to_h"] + doc["residuals"]["h_to_g"]
    assert len(residuals) == 10
    assert all(r < 1e-8 for r in residuals)
    assert time.perf_counter() - start < 120.0


def test_criterion_03_kernel_identity_and_ranks():
    start = time.perf_counter()
    expected = {2: 1, 3: 5, 4: 17, 5: 49}
    for n in (2, 3, 4, 5):
        flips = flip_lattice(n)
        kernel = integer_kernel_basis(phi_matrix(n))
        assert lattices_equal(flips, kernel)
        rank = n * (1 << (n - 1)) - ((1 << n) - 1)
        assert kernel.rank() == rank == expected[n]
    assert time.perf_counter() - start < 30.0


def test_criterion_04_decomposition_soundness():
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    masks = [m for m in range(16)]
    for _ in range(1000):
        combo = {}
        for _ in range(int(rng.integers(1, 7))):
            while True:
                a = masks[int(rng.integers(0, 16))]
                rest = [v for v in range(1, 5) if not (a >> (v - 1)) & 1]
                if len(rest) >= 2:
                    break
            b, c = sorted(rng.choice(rest, size=2, replace=False).tolist())
            coeff = int(rng.integers(-3, 4))
            if coeff == 0:
                continue
            for fam, val in FlipVector(a, b, c).entries().items():
                combo[fam] = combo.get(fam, 0) + coeff * val
        combo = {f: v for f, v in combo.items() if v}
        terms, trace = decompose_kernel_vector(combo, 4, with_trace=True)
        assert recompose(terms) == combo
        assert all(x > y for x, y in zip(trace, trace[1:]))
    for child in range(1, 5):
        for parents in range(16):
            if (parents >> (child - 1)) & 1:
                continue
            with pytest.raises(NotInKernelError):
                decompose_kernel_vector({Family(parents, child): 1}, 4)
    assert time.perf_counter() - start < 10.0


def test_criterion_05_moebius_duality_bulk():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    # superset incidence per n: row a, column b is 1 exactly when b contains a
    incidence = {}
    for n in range(2, 8):
        idx = np.arange(1 << n)
        incidence[n] = ((idx[:, None] & idx[None, :]) == idx[:, None]).astype(
            np.int64
        )
    for _ in range(10_000):
        n = int(rng.integers(2, 8))
        g = DirectedGraph(
            n, tuple(int(rng.integers(0, 1 << n)) & ~(1 << i) for i in range(n))
        )
        c = char_imset(g)
        s = std_imset(g)
        assert char_from_std(s).values == c.values
        assert std_from_char(c).entries == s.entries
        u = family_vector(g)
        assert tuple(phi_apply(u)) == c.values
        dense = s.dense()
        assert phi_apply(u)[0] == 0
        assert psi_apply(u) == dense
        totals = incidence[n] @ np.array(dense, dtype=np.int64)
        assert tuple(int(t) for t in totals[1:]) == c.values[1:]
    assert time.perf_counter() - start < 60.0


def test_criterion_06_givens_conservation_and_gradient():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 6))
        g = DirectedGraph(
            n, tuple(int(rng.integers(0, 1 << n)) & ~(1 << i) for i in range(n))
        )
        edges = sorted(covered_edges(g))
        if not edges:
            continue
        edge = edges[int(rng.integers(0, len(edges)))]
        q = random_factor(g, int(rng.integers(0, 10**6)))
        flipped = givens_flip_factor(q, flip_move(g, edge))
        assert set(flipped.labels) == set(families(apply_covered_flip(g, edge)))
        gap = np.max(np.abs(flipped.data @ flipped.data.T - q.data @ q.data.T))
        assert gap <= 1e-10
        done += 1
    h = 1e-6
    for _ in range(100):
        n = int(rng.integers(2, 6))
        q0 = random_factor(
            DirectedGraph(
                n, tuple(int(rng.integers(0, 1 << n)) & ~(1 << i) for i in range(n))
            ),
            int(rng.integers(0, 10**6)),
        )
        target = DirectedGraph(
            n, tuple(int(rng.integers(0, 1 << n)) & ~(1 << i) for i in range(n))
        )
        prob = _GivensProblem(
            np.array(q0.data),
            forbidden_mask(target),
            rng.choice([-1.0, 1.0], size=n),
        )
        theta = rng.uniform(-math.pi, math.pi, size=n * (n - 1) // 2)
        _, grad = prob.value_and_gradient(theta)
        for t in range(len(theta)):
            up, dn = theta.copy(), theta.copy()
            up[t] += h
            dn[t] -= h
            fd = (prob.value(up) - prob.value(dn)) / (2 * h)
            assert abs(fd - grad[t]) <= 1e-5 * max(1.0, abs(grad[t]))
    assert time.perf_counter() - start < 60.0


def test_criterion_07_fiber_facts():
    start = time.perf_counter()
    three_cycle = DirectedGraph(3, (4, 1, 2))
    fiber = fiber_of_graph(three_cycle)
    assert len(fiber.graphs) == 2
    flips_only = fiber_move_components(fiber, (CoveredFlip,))
    assert len(flips_only.components) == 2
    both = fiber_move_components(fiber, (CoveredFlip, CycleReversal))
    assert len(both.components) == 1
    fig5 = fiber_of_graph(GRAPHS["fig5_left"])
    assert len(fig5.graphs) == 2
    assert {g.parents for g in fig5.graphs} == {
        GRAPHS["fig5_left"].parents,
        GRAPHS["fig5_right"].parents,
    }
    under_both = fiber_move_components(fig5, (CoveredFlip, CycleReversal))
    assert len(under_both.components) == 2
    assert time.perf_counter() - start < 60.0


def test_criterion_08_dag_coherence():
    start = time.perf_counter()
    dags = [g for g in all_graphs(3) if is_acyclic(g)]
    assert len(dags) == 25
    by_imset = {}
    by_markov = {}
    by_essential = {}
    for g in dags:
        by_imset.setdefault(char_imset(g).values, set()).add(g.parents)
        key = (tuple(sorted(skeleton(g).items())), tuple(sorted(v_structures(g))))
        by_markov.setdefault(key, set()).add(g.parents)
        ess = essential_graph(g)
        by_essential.setdefault(
            (ess.n, tuple(sorted(ess.directed)), tuple(sorted(ess.undirected))),
            set(),
        ).add(g.parents)
    partitions = [
        frozenset(frozenset(v) for v in d.values())
        for d in (by_imset, by_markov, by_essential)
    ]
    assert partitions[0] == partitions[1] == partitions[2]
    trio = [GRAPHS["fig3_left"], GRAPHS["fig3_middle"], GRAPHS["fig3_right"]]
    assert len({char_imset(g).values for g in trio}) == 1
    ess = essential_graph(trio[0])
    assert sorted(ess.directed) == [(2, 1), (3, 1), (4, 1)]
    assert sorted(ess.undirected) == [(2, 3), (3, 4)]
    assert time.perf_counter() - start < 5.0


LIGHT = OrthSolverConfig(restarts=8, max_iters=800)


def check_equivalent(a, b, trials=2):
    """Light budget first; any miss is retried at the full default budget."""
    verdict = covariance_equiv_numeric(a, b, LIGHT, trials=trials)
    if not verdict.equivalent():
        verdict = covariance_equiv_numeric(a, b, OrthSolverConfig(), trials=5)
    return verdict.equivalent()


def test_criterion_09_main_theorem_sampling():
    start = time.perf_counter()
    groups = {}
    for g in all_graphs(3):
        groups.setdefault(char_imset(g).values, []).append(g)
    pairs = [
        pair for gs in groups.values() for pair in itertools.combinations(gs, 2)
    ]
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(200):
        g = DirectedGraph(
            4, tuple(int(rng.integers(0, 16)) & ~(1 << i) for i in range(4))
        )
        c = char_imset(g)
        if c.values in seen:
            continue
        seen.add(c.values)
        fiber = fiber_enumerate(c)
        pairs += list(itertools.combinations(fiber.graphs, 2))
    assert len(pairs) > 700
    for a, b in pairs:
        assert check_equivalent(a, b), (a.parents, b.parents)
    assert time.perf_counter() - start < 900.0


def test_criterion_10_negative_control():
    start = time.perf_counter()
    chain = DirectedGraph(3, (0, 1, 2))
    collider = DirectedGraph(3, (0, 5, 0))
    verdict = covariance_equiv_numeric(chain, collider, OrthSolverConfig(), trials=5)
    elapsed = time.perf_counter() - start
    assert verdict.verdict == "EvidenceInequivalent"
    residuals = verdict.residuals_g_to_h + verdict.residuals_h_to_g
    assert len(residuals) == 10
    assert elapsed < 60.0
    floor = min(residuals)
    assert floor >= 0.05, (
        f"calibrated floor violated: min per-trial residual {floor:.4f}; "
        "the smallest true optima of these instances sit below 0.05 "
        "(verified against brute-force orthogonal sampling)"
    )


def k_pattern(g):
    pat = set()
    for i in range(1, g.n + 1):
        for j in range(i + 1, g.n + 1):
            if any(
                (g.fa(k) >> (i - 1)) & 1 and (g.fa(k) >> (j - 1)) & 1
                for k in range(1, g.n + 1)
            ):
                pat.add((i, j))
    return frozenset(pat)


def family_support_multiset(g):
    """Factor column supports with the column order forgotten."""
    return tuple(sorted(g.fa(j) for j in range(1, g.n + 1)))


def test_substitute_no_cross_imset_equivalence_small_n():
    """Desk-scale check that differing imsets mean differing models.

    The factor model of a graph depends only on the multiset of family
    supports, because reordering the columns of Q never changes QQ^T.  Two
    graphs sharing that multiset have literally identical model sets while
    their imsets can still differ: reversing a directed cycle re-attaches
    any outside parent along with the family it sits in, which can move a
    skeleton edge.  Over all 2-cycle-free graphs on 3 and 4 nodes exactly
    three such pairs exist up to joint relabeling, all on 4 nodes; each
    relates a graph to a relabeling of itself and changes the imset in a
    two-element coordinate.  These are verified structurally, no solver
    involved.

    Every other pair with a matching generic precision pattern must show
    no numeric evidence of equivalence.  Equivalence needs every residual
    tiny, so only pairs whose worst screen residual falls under 1e-2 are
    rerun at a heavier budget before judgment; one feasible direction
    alone (common for nested models, e.g. anything against a complete
    graph) does not escalate.
    """
    start = time.perf_counter()
    screen = OrthSolverConfig(restarts=2, max_iters=400)
    heavy = OrthSolverConfig(restarts=20, max_iters=1200)
    same_model = {3: [], 4: []}
    evidenced = []
    for n in (3, 4):
        two_cycle_free = [
            g
            for g in all_graphs(n)
            if not any(
                g.has_edge(u, v) and g.has_edge(v, u)
                for u in range(1, n + 1)
                for v in range(u + 1, n + 1)
            )
        ]
        by_pattern = {}
        for g in two_cycle_free:
            by_pattern.setdefault(k_pattern(g), []).append(g)
        perms = list(itertools.permutations(range(1, n + 1)))
        seen = set()
        for gs in by_pattern.values():
            for a, b in itertools.combinations(gs, 2):
                if char_imset(a).values == char_imset(b).values:
                    continue
                key = min(
                    min(
                        (relabel_graph(a, p).parents, relabel_graph(b, p).parents),
                        (relabel_graph(b, p).parents, relabel_graph(a, p).parents),
                    )
                    for p in perms
                )
                if key in seen:
                    continue
                seen.add(key)
                if family_support_multiset(a) == family_support_multiset(b):
                    same_model[n].append((a, b))
                    continue
                probe = covariance_equiv_numeric(a, b, screen, trials=1)
                worst = max(probe.residuals_g_to_h + probe.residuals_h_to_g)
                if worst < 1e-2:
                    full = covariance_equiv_numeric(a, b, heavy, trials=5)
                    if full.equivalent():
                        evidenced.append((a.parents, b.parents))
    assert not evidenced
    assert len(same_model[3]) == 0
    assert len(same_model[4]) == 3
    for a, b in same_model[4]:
        ca, cb = char_imset(a), char_imset(b)
        assert any(
            ca.values[m] != cb.values[m]
            for m in range(1, 16)
            if popcount(m) == 2
        )
        assert any(
            relabel_graph(a, p).parents == b.parents
            for p in itertools.permutations(range(1, 5))
        )
    assert time.perf_counter() - start < 900.0
