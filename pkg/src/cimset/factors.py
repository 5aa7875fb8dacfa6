"""Numeric covariance-equivalence machinery.

A graph's precision matrices are the products QQ^T over matrices Q whose
jth column is supported on the family of j.  Covered flips act on factors
as explicit Givens rotations that preserve QQ^T, and equivalence of two
graphs is probed by searching the orthogonal group for a transform
carrying a random factor of one graph into the sparsity of the other.
Verdicts are evidence, not proofs: the search is non-convex, so a large
residual never certifies inequivalence.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .graphs import (
    CoveredFlip,
    DirectedGraph,
    Family,
    mask_from_nodes,
    nodes_from_mask,
)
from .graphs import families as graph_families


class FactorError(ValueError):
    """Bad factor data or an operation applied to unsuitable inputs."""


@dataclass(frozen=True, eq=False)
class FactorMatrix:
    """Real n x n matrix with family-labelled columns.

    Column j may be nonzero only on the support of labels[j] (the parents
    plus the child); row indices are node ids minus one.
    """

    n: int
    labels: tuple[Family, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.shape != (self.n, self.n):
            raise FactorError(f"factor must be {self.n} x {self.n}")
        if len(self.labels) != self.n:
            raise FactorError("need one column label per column")
        for j, lab in enumerate(self.labels):
            sup = lab.support
            for i in range(self.n):
                if not sup & (1 << i) and arr[i, j] != 0.0:
                    raise FactorError(
                        f"entry ({i + 1}, {j + 1}) outside the support of {lab}"
                    )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def column_index(self, label: Family) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise FactorError(f"no column labelled {label}") from None

    def to_json(self) -> dict:
        return {
            "labels": [
                {"parents": list(nodes_from_mask(f.parents)), "child": f.child}
                for f in self.labels
            ],
            "data": [[float(x) for x in row] for row in self.data],
        }


def factor_from_json(obj: dict) -> FactorMatrix:
    try:
        labels = tuple(
            Family(mask_from_nodes(e["parents"]), e["child"]) for e in obj["labels"]
        )
        data = np.array(obj["data"], dtype=float)
    except (TypeError, KeyError, ValueError) as e:
        raise FactorError(f"bad factor JSON: {e}") from None
    return FactorMatrix(len(labels), labels, data)


def random_factor(g: DirectedGraph, seed: int) -> FactorMatrix:
    """Standard-normal fill of the permitted support, deterministic per seed.

    Diagonal entries are redrawn until their magnitude reaches 0.1, keeping
    the factor comfortably away from rank deficiency.
    """
    rng = np.random.default_rng(seed)
    data = np.zeros((g.n, g.n))
    labels = tuple(graph_families(g))
    for j, lab in enumerate(labels):
        for v in nodes_from_mask(lab.support):
            x = rng.standard_normal()
            if v == lab.child:
                while abs(x) < 0.1:
                    x = rng.standard_normal()
            data[v - 1, j] = x
    return FactorMatrix(g.n, labels, data)


def _check_full_rank(q: np.ndarray):
    scale = float(np.linalg.norm(q)) / math.sqrt(q.shape[0])
    if scale == 0.0 or abs(np.linalg.det(q / scale)) < 1e-12:
        raise FactorError("factor is rank deficient")


def precision_from_factor(q: FactorMatrix) -> np.ndarray:
    """QQ^T, symmetric positive definite for full-rank factors."""
    _check_full_rank(q.data)
    return q.data @ q.data.T


# -- structural-equation route ------------------------------------------------

@dataclass(frozen=True, eq=False)
class SemParams:
    """Edge weights and noise variances of a linear structural model.

    lam[i, j] is the coefficient on the edge j -> i, so its support is the
    transpose of the graph's adjacency; omega holds the positive noise
    variances.
    """

    graph: DirectedGraph
    lam: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.graph.n
        lam = np.array(self.lam, dtype=float)
        omega = np.array(self.omega, dtype=float)
        if lam.shape != (n, n) or omega.shape != (n,):
            raise FactorError("parameter shapes do not match the graph")
        if np.any(omega <= 0):
            raise FactorError("noise variances must be strictly positive")
        for i in range(n):
            for j in range(n):
                if lam[i, j] != 0.0 and not self.graph.has_edge(j + 1, i + 1):
                    raise FactorError(f"lam[{i + 1}, {j + 1}] needs edge {j + 1} -> {i + 1}")
        lam.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "omega", omega)


def random_sem(g: DirectedGraph, seed: int) -> SemParams:
    rng = np.random.default_rng(seed)
    lam = np.zeros((g.n, g.n))
    for u, v in g.edges():
        lam[v - 1, u - 1] = rng.standard_normal()
    omega = rng.uniform(0.5, 2.0, size=g.n)
    return SemParams(g, lam, omega)


def precision_from_sem(p: SemParams) -> np.ndarray:
    """(I - lam)^T diag(1/omega) (I - lam); errors on singular I - lam."""
    n = p.graph.n
    a = np.eye(n) - p.lam
    if abs(np.linalg.det(a)) < 1e-12:
        raise FactorError("I - lam is singular")
    return a.T @ np.diag(1.0 / p.omega) @ a


def factor_from_sem(p: SemParams) -> FactorMatrix:
    """The induced factor (I - lam)^T diag(omega^(-1/2)); same QQ^T."""
    a = np.eye(p.graph.n) - p.lam
    q = a.T @ np.diag(1.0 / np.sqrt(p.omega))
    return FactorMatrix(p.graph.n, tuple(graph_families(p.graph)), q)


# -- Givens flips on factors --------------------------------------------------

def givens_flip_factor(q: FactorMatrix, flip: CoveredFlip) -> FactorMatrix:
    """Realize a covered flip on the factor without moving QQ^T.

    The two columns labelled A -> b and A|b -> c are rotated in their
    plane by the angle with tan(theta) = v_b / u_b, which zeroes row b of
    the second column; the labels become A|c -> b and A -> c, and the new
    zero patterns match the flipped graph's families.
    """
    a, b, c = flip.a, flip.b, flip.c
    j1 = q.column_index(Family(a, b))
    j2 = q.column_index(Family(a | (1 << (b - 1)), c))
    u = q.data[:, j1].copy()
    v = q.data[:, j2].copy()
    ub, vb = u[b - 1], v[b - 1]
    if ub == 0.0:
        raise FactorError(f"degenerate rotation: pivot entry ({b}, {j1 + 1}) is zero")
    r = math.hypot(ub, vb)
    cos, sin = ub / r, vb / r
    data = np.array(q.data)
    data[:, j1] = cos * u + sin * v
    data[:, j2] = -sin * u + cos * v
    data[b - 1, j2] = 0.0  # analytically exact, keep the support strict
    labels = list(q.labels)
    labels[j1] = Family(a | (1 << (c - 1)), b)
    labels[j2] = Family(a, c)
    return FactorMatrix(q.n, tuple(labels), data)


def relabel_column(q: FactorMatrix, old: Family, new: Family) -> FactorMatrix:
    """Swap a column's label for another family with the same support."""
    j = q.column_index(old)
    if old.support != new.support:
        raise FactorError(f"{old} and {new} have different supports")
    if q.data[new.child - 1, j] == 0.0:
        raise FactorError(f"entry at row {new.child} is zero, cannot relabel")
    labels = list(q.labels)
    labels[j] = new
    return FactorMatrix(q.n, tuple(labels), np.array(q.data))


# -- orthogonal feasibility ---------------------------------------------------

@dataclass(frozen=True)
class OrthSolverConfig:
    restarts: int = 50
    max_iters: int = 2000
    step_tol: float = 1e-12
    tau: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.restarts <= 0 or self.max_iters <= 0:
            raise FactorError("counts must be positive")
        if self.step_tol <= 0 or self.tau <= 0:
            raise FactorError("tolerances must be positive")
        if self.seed < 0:
            raise FactorError("seed must be nonnegative")


def forbidden_mask(h: DirectedGraph) -> np.ndarray:
    """Boolean matrix of the entries a factor for h must keep at zero."""
    n = h.n
    out = np.ones((n, n), dtype=bool)
    for j in range(n):
        out[j, j] = False
        for i in nodes_from_mask(h.pa(j + 1)):
            out[i - 1, j] = False
    return out


def _rotate_columns(m: np.ndarray, i: int, j: int, cos: float, sin: float):
    ci = cos * m[:, i] + sin * m[:, j]
    cj = -sin * m[:, i] + cos * m[:, j]
    m[:, i] = ci
    m[:, j] = cj


def _rotate_rows(m: np.ndarray, i: int, j: int, cos: float, sin: float):
    ri = cos * m[i, :] - sin * m[j, :]
    rj = sin * m[i, :] + cos * m[j, :]
    m[i, :] = ri
    m[j, :] = rj


class _GivensProblem:
    """Objective machinery for one (Q0, target-sparsity) instance."""

    def __init__(self, q0: np.ndarray, forbidden: np.ndarray, signs: np.ndarray):
        self.q0 = q0
        self.forbidden = forbidden
        self.signs = signs
        self.n = q0.shape[0]
        self.pairs = [
            (i, j) for i in range(self.n) for j in range(i + 1, self.n)
        ]

    def u_matrix(self, theta: np.ndarray) -> np.ndarray:
        u = np.eye(self.n)
        for (i, j), t in zip(self.pairs, theta):
            _rotate_columns(u, i, j, math.cos(t), math.sin(t))
        return u * self.signs

    def product(self, theta: np.ndarray) -> np.ndarray:
        m = np.array(self.q0)
        for (i, j), t in zip(self.pairs, theta):
            _rotate_columns(m, i, j, math.cos(t), math.sin(t))
        return m * self.signs

    def value(self, theta: np.ndarray) -> float:
        m = self.product(theta)
        return float(np.sum(m[self.forbidden] ** 2))

    def _prefixes_suffixes(self, theta: np.ndarray):
        k = len(self.pairs)
        prefixes = [np.array(self.q0)]
        for (i, j), t in zip(self.pairs, theta):
            nxt = np.array(prefixes[-1])
            _rotate_columns(nxt, i, j, math.cos(t), math.sin(t))
            prefixes.append(nxt)
        suffixes = [None] * (k + 1)
        suffixes[k] = np.diag(self.signs.astype(float))
        for t in range(k - 1, -1, -1):
            i, j = self.pairs[t]
            nxt = np.array(suffixes[t + 1])
            _rotate_rows(nxt, i, j, math.cos(theta[t]), math.sin(theta[t]))
            suffixes[t] = nxt
        return prefixes, suffixes

    def value_and_gradient(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        prefixes, suffixes = self._prefixes_suffixes(theta)
        m = prefixes[-1] * self.signs
        residual = np.where(self.forbidden, m, 0.0)
        grad = np.zeros(len(self.pairs))
        for t, (i, j) in enumerate(self.pairs):
            cos, sin = math.cos(theta[t]), math.sin(theta[t])
            p = prefixes[t]
            w = np.column_stack(
                (-sin * p[:, i] + cos * p[:, j], -cos * p[:, i] - sin * p[:, j])
            )
            srows = suffixes[t + 1][[i, j], :]
            grad[t] = 2.0 * float(np.sum(w * (residual @ srows.T)))
        return float(np.sum(residual ** 2)), grad

    def residual_and_jacobian(self, theta: np.ndarray):
        prefixes, suffixes = self._prefixes_suffixes(theta)
        m = prefixes[-1] * self.signs
        idx = np.nonzero(self.forbidden)
        r = m[idx]
        jac = np.zeros((len(r), len(self.pairs)))
        for t, (i, j) in enumerate(self.pairs):
            cos, sin = math.cos(theta[t]), math.sin(theta[t])
            p = prefixes[t]
            w = np.column_stack(
                (-sin * p[:, i] + cos * p[:, j], -cos * p[:, i] - sin * p[:, j])
            )
            dm = w @ suffixes[t + 1][[i, j], :]
            jac[:, t] = dm[idx]
        return r, jac


def _descend(prob: _GivensProblem, theta: np.ndarray, cfg: OrthSolverConfig,
             f_stop: float) -> tuple[float, np.ndarray]:
    """Gradient descent with backtracking; accepted steps never increase f.

    Ends on the iteration cap, a collapsed line-search step, or a run of
    iterations whose relative progress is negligible (a stall at a local
    minimum, which the polish stage handles better).
    """
    f, grad = prob.value_and_gradient(theta)
    step = 1.0
    stalled = 0
    for _ in range(cfg.max_iters):
        if f <= f_stop:
            break
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            break
        halvings = 0
        while step >= cfg.step_tol:
            cand = theta - step * grad
            fc = prob.value(cand)
            if fc <= f - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            halvings += 1
        else:
            break
        theta = theta - step * grad
        f_new, grad = prob.value_and_gradient(theta)
        stalled = stalled + 1 if f - f_new <= 1e-9 * f else 0
        f = f_new
        if stalled >= 3:
            break
        # carry the accepted step; regrow only after a first-try acceptance
        if halvings == 0:
            step = min(step * 2.0, 1.0)
    return f, theta


def _polish(prob: _GivensProblem, theta: np.ndarray, f: float,
            iters: int = 40) -> tuple[float, np.ndarray]:
    """Damped least-squares refinement; only improving steps are accepted."""
    lam = 1e-4
    for _ in range(iters):
        if f == 0.0:
            break
        r, jac = prob.residual_and_jacobian(theta)
        g = jac.T @ r
        h = jac.T @ jac
        improved = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(h + lam * np.eye(h.shape[0]), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            fc = prob.value(cand)
            if fc < f:
                theta, f = cand, fc
                lam = max(lam / 3.0, 1e-14)
                improved = True
                break
            lam *= 10.0
        if not improved:
            break
    return f, theta


def orth_feasibility(
    q0: FactorMatrix, h: DirectedGraph, cfg: OrthSolverConfig | None = None
) -> tuple[float, np.ndarray]:
    """Search O(n) for a transform of q0 into h's sparsity pattern.

    Minimizes the sum of squares of the entries of q0 U sitting where h's
    factors must vanish, over U built from n(n-1)/2 Givens angles (in
    lexicographic plane order) times a sign diagonal.  Runs cfg.restarts
    descents (the first from the identity, the rest from uniform random
    angles), each polished by damped least squares, and stops early once
    the scale-free residual ||Q0 U|_forbidden|| / ||Q0|| drops below
    cfg.tau.  Returns (best residual, best U).
    """
    if cfg is None:
        cfg = OrthSolverConfig()
    if q0.n != h.n:
        raise FactorError("node counts differ")
    _check_full_rank(q0.data)
    qnorm = float(np.linalg.norm(q0.data))
    forbidden = forbidden_mask(h)
    n = q0.n
    npairs = n * (n - 1) // 2
    f_success = (cfg.tau * qnorm) ** 2
    best_f = math.inf
    best_u = np.eye(n)
    for restart in range(cfg.restarts):
        if restart == 0:
            theta = np.zeros(npairs)
            signs = np.ones(n)
        else:
            rng = np.random.default_rng([cfg.seed, restart])
            theta = rng.uniform(-math.pi, math.pi, size=npairs)
            signs = rng.choice([-1.0, 1.0], size=n)
        prob = _GivensProblem(np.array(q0.data), forbidden, signs)
        f, theta = _descend(prob, theta, cfg, f_stop=f_success * 1e-4)
        f, theta = _polish(prob, theta, f)
        if f < best_f:
            best_f = f
            best_u = prob.u_matrix(theta)
        if best_f <= f_success:
            break
    return math.sqrt(best_f) / qnorm, best_u


# -- the equivalence verdict --------------------------------------------------

@dataclass(frozen=True)
class EquivVerdict:
    verdict: str
    tau: float
    trials: int
    residuals_g_to_h: tuple[float, ...]
    residuals_h_to_g: tuple[float, ...]
    seed: int

    def __post_init__(self):
        ok = all(r < self.tau for r in self.residuals_g_to_h + self.residuals_h_to_g)
        want = "EvidenceEquivalent" if ok else "EvidenceInequivalent"
        if self.verdict != want:
            raise FactorError("verdict inconsistent with residuals")

    def equivalent(self) -> bool:
        return self.verdict == "EvidenceEquivalent"

    def to_json(self) -> dict:
        doc = {
            "verdict": self.verdict,
            "tau": self.tau,
            "trials": self.trials,
            "residuals": {
                "g_to_h": list(self.residuals_g_to_h),
                "h_to_g": list(self.residuals_h_to_g),
            },
            "seed": self.seed,
        }
        if self.verdict == "EvidenceInequivalent":
            doc["note"] = (
                "heuristic: the residual floor is evidence, not a proof "
                "of inequivalence"
            )
        return doc


def covariance_equiv_numeric(
    g: DirectedGraph,
    h: DirectedGraph,
    cfg: OrthSolverConfig | None = None,
    trials: int = 5,
    jobs: int = 1,
) -> EquivVerdict:
    """Probe both directions with independently seeded factor draws.

    Trial i of direction g -> h draws a random factor of g with seed
    cfg.seed + i and searches for an orthogonal transform into h's
    sparsity (the reverse direction uses the following trial indices).
    EvidenceEquivalent requires every trial of both directions to beat
    cfg.tau.
    """
    if cfg is None:
        cfg = OrthSolverConfig()
    if g.n != h.n:
        raise FactorError("node counts differ")
    if trials <= 0:
        raise FactorError("trial count must be positive")

    tasks = [(g, h, cfg.seed + t) for t in range(trials)]
    tasks += [(h, g, cfg.seed + trials + t) for t in range(trials)]

    def run(task):
        src, dst, seed = task
        sub = OrthSolverConfig(
            restarts=cfg.restarts,
            max_iters=cfg.max_iters,
            step_tol=cfg.step_tol,
            tau=cfg.tau,
            seed=seed,
        )
        residual, _ = orth_feasibility(random_factor(src, seed), dst, sub)
        return residual

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    fwd = tuple(results[:trials])
    bwd = tuple(results[trials:])
    ok = all(r < cfg.tau for r in fwd + bwd)
    return EquivVerdict(
        "EvidenceEquivalent" if ok else "EvidenceInequivalent",
        cfg.tau,
        trials,
        fwd,
        bwd,
        cfg.seed,
    )
