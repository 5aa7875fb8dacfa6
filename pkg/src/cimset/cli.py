"""Command-line front end.

Exit codes: 0 success (and "equivalent" for the equiv family), 1 for a
check that ran and came back negative, 2 for unusable input.  Output is
JSON unless --format text; either way it is byte-stable for fixed inputs
and seeds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .factors import (
    FactorError,
    FactorMatrix,
    OrthSolverConfig,
    covariance_equiv_numeric,
    factor_from_json,
    givens_flip_factor,
    random_factor,
)
from .fixtures import GRAPHS
from .graphs import (
    CoveredFlip,
    CycleReversal,
    DirectedGraph,
    GraphError,
    apply_covered_flip,
    canonical_form,
    covered_edges,
    enumerate_dag_class,
    essential_graph,
    flip_move,
    graph_from_json,
    graph_to_json,
    markov_equivalent_dags,
    mask_from_nodes,
    nodes_from_mask,
    parse_graph,
    reverse_cycle,
    skeleton,
)
from .imsets import (
    CharImset,
    ImsetError,
    char_from_std,
    char_imset,
    imset_differences,
    imset_equivalent,
    imset_from_json,
    imset_to_json,
    phi_matrix,
    std_from_char,
    std_imset,
)
from .lattice import (
    Family,
    LatticeError,
    NotInKernelError,
    decompose_kernel_vector,
    directed_cycles,
    fiber_enumerate,
    fiber_move_components,
    fiber_of_graph,
    flip_lattice,
    integer_kernel_basis,
    lattices_equal,
)

_ERRORS = (GraphError, ImsetError, LatticeError, FactorError)


# -- input loading ------------------------------------------------------------

def _read_arg(arg: str) -> str:
    if os.path.isfile(arg):
        with open(arg, encoding="utf-8") as fh:
            return fh.read()
    return arg


def _load_graph(arg: str) -> DirectedGraph:
    return parse_graph(_read_arg(arg))


def _load_json(arg: str) -> dict:
    text = _read_arg(arg)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphError(f"not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise GraphError("expected a JSON object")
    return obj


# -- text rendering -----------------------------------------------------------

def _set_label(nodes) -> str:
    return "{" + ",".join(str(v) for v in nodes) + "}"


def _imset_text(doc: dict) -> str:
    rows = [(_set_label(e["set"]), str(e["value"])) for e in doc["entries"]]
    wide = max([len(s) for s, _ in rows], default=3)
    lines = [f"{doc['kind']} imset, n={doc['n']}"]
    lines += [f"{s:<{wide}}  {v:>3}" for s, v in rows]
    return "\n".join(lines)


def _graph_text(doc: dict) -> str:
    lines = [f"n={doc['n']}"]
    lines += [f"{u} -> {v}" for u, v in doc["edges"]]
    return "\n".join(lines)


def _table_text(doc: dict) -> str:
    head = f"{'set':<12}{'c_left':>8}{'c_right':>8}{'s_left':>8}{'s_right':>8}"
    lines = [head]
    for row in doc["rows"]:
        cl, cr = ("-", "-") if row["c"] is None else row["c"]
        sl, sr = row["s"]
        lines.append(
            f"{_set_label(row['set']):<12}{cl!s:>8}{cr!s:>8}{sl!s:>8}{sr!s:>8}"
        )
    return "\n".join(lines)


def _verdict_text(doc: dict) -> str:
    lines = [f"verdict: {doc['verdict']}", f"tau: {doc['tau']:g}"]
    for direction in ("g_to_h", "h_to_g"):
        vals = "  ".join(f"{r:.6e}" for r in doc["residuals"][direction])
        lines.append(f"{direction}: {vals}")
    if "note" in doc:
        lines.append(doc["note"])
    return "\n".join(lines)


def _equiv_text(doc: dict) -> str:
    lines = [f"equivalent: {str(doc['equivalent']).lower()}"]
    for d in doc.get("differences", []):
        a, b = d["values"]
        lines.append(f"{_set_label(d['set'])}: {a} vs {b}")
    return "\n".join(lines)


def _fiber_text(doc: dict) -> str:
    lines = [f"size {doc['size']}"]
    for i, g in enumerate(doc["graphs"]):
        edges = " ".join(f"{u}->{v}" for u, v in g["edges"]) or "(no edges)"
        lines.append(f"[{i}] {edges}")
    comp = doc["components"]
    members = " ".join(_set_label(m) for m in comp["members"])
    lines.append(f"components under {','.join(comp['moves'])}: {members}")
    return "\n".join(lines)


def _decompose_text(doc: dict) -> str:
    if not doc.get("in_kernel", True):
        lines = ["not in kernel; residual:"]
        lines += [
            f"  {_set_label(e['parents'])}->{e['child']}: {e['value']:+d}"
            for e in doc["residual"]
        ]
        return "\n".join(lines)
    lines = []
    for t in doc["terms"]:
        f = t["flip"]
        lines.append(
            f"{t['coefficient']:+d} * flip(A={_set_label(f['a'])}, "
            f"b={f['b']}, c={f['c']})"
        )
    return "\n".join(lines) if lines else "0"


def _factor_text(doc: dict) -> str:
    labels = [
        f"{_set_label(e['parents'])}->{e['child']}" for e in doc["labels"]
    ]
    cells = [[f"{x: .6f}" for x in row] for row in doc["data"]]
    wide = max(len(s) for s in labels + [c for row in cells for c in row])
    lines = ["  ".join(f"{s:>{wide}}" for s in labels)]
    lines += ["  ".join(f"{c:>{wide}}" for c in row) for row in cells]
    return "\n".join(lines)


def _essential_text(doc: dict) -> str:
    parts = [f"{u} -> {v}" for u, v in doc["directed"]]
    parts += [f"{u} -- {v}" for u, v in doc["undirected"]]
    return "\n".join([f"n={doc['n']}"] + parts)


def _generic_text(doc: dict) -> str:
    lines = []
    for key, val in doc.items():
        if isinstance(val, (dict, list)):
            val = json.dumps(val, separators=(",", ":"))
        lines.append(f"{key}: {val}")
    return "\n".join(lines)


def _render_text(doc: dict) -> str:
    if "kind" in doc and "entries" in doc:
        return _imset_text(doc)
    if "rows" in doc:
        return _table_text(doc)
    if "verdict" in doc:
        return _verdict_text(doc)
    if "equivalent" in doc:
        return _equiv_text(doc)
    if "graphs" in doc and "size" in doc:
        return _fiber_text(doc)
    if "terms" in doc or "residual" in doc:
        return _decompose_text(doc)
    if "labels" in doc and "data" in doc:
        return _factor_text(doc)
    if "directed" in doc and "undirected" in doc:
        return _essential_text(doc)
    if "edges" in doc:
        return _graph_text(doc)
    if "report" in doc:
        return doc["report"]
    return _generic_text(doc)


def _emit(doc: dict, fmt: str):
    if fmt == "text":
        sys.stdout.write(_render_text(doc) + "\n")
    else:
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")


# -- subcommands --------------------------------------------------------------

def _cmd_imset(args) -> tuple[dict, int]:
    if args.mode == "convert":
        imset = imset_from_json(_load_json(args.input))
        if isinstance(imset, CharImset):
            out = std_from_char(imset)
        else:
            out = char_from_std(imset)
        return imset_to_json(out), 0
    g = _load_graph(args.input)
    imset = char_imset(g) if args.mode == "char" else std_imset(g)
    return imset_to_json(imset), 0


def _cmd_equiv(args) -> tuple[dict, int]:
    g, h = _load_graph(args.g), _load_graph(args.h)
    if args.mode == "imset":
        diffs = imset_differences(g, h)
        doc = {
            "kind": "imset",
            "equivalent": not diffs,
            "differences": [
                {"set": list(nodes_from_mask(m)), "values": [a, b]}
                for m, a, b in diffs
            ],
        }
        return doc, 0 if not diffs else 1
    if args.mode == "dag":
        same = markov_equivalent_dags(g, h)
        return {"kind": "dag", "equivalent": same}, 0 if same else 1
    cfg = OrthSolverConfig(
        restarts=args.restarts,
        max_iters=args.max_iters,
        tau=args.tau,
        seed=args.seed,
    )
    verdict = covariance_equiv_numeric(g, h, cfg, trials=args.trials, jobs=args.jobs)
    return verdict.to_json(), 0 if verdict.equivalent() else 1


def _cmd_essential(args) -> tuple[dict, int]:
    return essential_graph(_load_graph(args.graph)).to_json(), 0


_MOVE_TOKENS = {"flips": CoveredFlip, "cycles": CycleReversal}


def _parse_moves(spec: str) -> list[type]:
    out = []
    for token in spec.split(","):
        token = token.strip()
        if token not in _MOVE_TOKENS:
            raise LatticeError(f"unknown move kind {token!r} (use flips,cycles)")
        out.append(_MOVE_TOKENS[token])
    return out


def _cmd_fiber(args) -> tuple[dict, int]:
    text = _read_arg(args.input)
    if text.lstrip().startswith("{") and "kind" in json.loads(text):
        imset = imset_from_json(json.loads(text))
        if not isinstance(imset, CharImset):
            imset = char_from_std(imset)
        fiber = fiber_enumerate(imset, jobs=args.jobs)
    else:
        fiber = fiber_of_graph(parse_graph(text), jobs=args.jobs)
    moves = _parse_moves(args.moves)
    comp = fiber_move_components(fiber, moves)
    members = [list(c) for c in comp.components]
    if args.upto_iso:
        cls = [canonical_form(g) for g in fiber.graphs]
        owner: dict[bytes, int] = {}
        parent = list(range(len(members)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for ci, comp_members in enumerate(members):
            for idx in comp_members:
                key = cls[idx]
                if key in owner:
                    a, b = find(owner[key]), find(ci)
                    if a != b:
                        parent[max(a, b)] = min(a, b)
                else:
                    owner[key] = ci
        regrouped: dict[int, list[int]] = {}
        for ci, comp_members in enumerate(members):
            regrouped.setdefault(find(ci), []).extend(comp_members)
        members = [sorted(v) for _, v in sorted(regrouped.items())]
    doc = {
        "n": fiber.imset.n,
        "size": len(fiber.graphs),
        "imset": imset_to_json(fiber.imset),
        "graphs": [graph_to_json(g) for g in fiber.graphs],
        "upto_iso": bool(args.upto_iso),
        "components": {
            "moves": sorted(t for t, v in _MOVE_TOKENS.items() if v in moves),
            "count": len(members),
            "members": members,
        },
    }
    return doc, 0


def _cmd_kernel(args) -> tuple[dict, int]:
    flips = flip_lattice(args.n)
    kernel = integer_kernel_basis(phi_matrix(args.n))
    same = lattices_equal(flips, kernel)
    rank = kernel.rank()
    sign = "=" if same else "!="
    doc = {
        "n": args.n,
        "lattices_equal": same,
        "rank": rank,
        "report": f"flip lattice {sign} integer kernel, rank {rank}",
    }
    return doc, 0 if same else 1


def _cmd_decompose(args) -> tuple[dict, int]:
    obj = _load_json(args.input)
    try:
        n = int(obj["n"]) if "n" in obj else args.n
        entries = obj["entries"]
    except (KeyError, TypeError, ValueError):
        raise LatticeError('family vector JSON needs "n" and "entries"') from None
    if n is None:
        raise LatticeError("node count missing: pass --n or include it in the JSON")
    vec: dict[Family, int] = {}
    for e in entries:
        try:
            fam = Family(mask_from_nodes(e["parents"]), int(e["child"]))
            val = int(e["value"])
        except (KeyError, TypeError, ValueError):
            raise LatticeError(f"bad family vector entry {e!r}") from None
        if fam in vec:
            raise LatticeError(f"duplicate entry for {fam}")
        if val:
            vec[fam] = val
    try:
        terms = decompose_kernel_vector(vec, n)
    except NotInKernelError as e:
        doc = {
            "n": n,
            "in_kernel": False,
            "residual": [
                {
                    "parents": list(nodes_from_mask(f.parents)),
                    "child": f.child,
                    "value": v,
                }
                for f, v in sorted(e.residual.items())
            ],
        }
        return doc, 1
    doc = {
        "n": n,
        "in_kernel": True,
        "terms": [
            {
                "coefficient": k,
                "flip": {
                    "a": list(nodes_from_mask(fv.a)),
                    "b": fv.b,
                    "c": fv.c,
                },
            }
            for k, fv in terms
        ],
    }
    return doc, 0


def _cmd_flip(args) -> tuple[dict, int]:
    g = _load_graph(args.graph)
    return graph_to_json(apply_covered_flip(g, (args.u, args.v))), 0


def _cmd_reverse_cycle(args) -> tuple[dict, int]:
    g = _load_graph(args.graph)
    return graph_to_json(reverse_cycle(g, tuple(args.nodes))), 0


def _graph_from_labels(q: FactorMatrix) -> DirectedGraph:
    seen = {}
    for lab in q.labels:
        if lab.child in seen:
            raise FactorError(f"two columns claim child {lab.child}")
        seen[lab.child] = lab.parents
    if sorted(seen) != list(range(1, q.n + 1)):
        raise FactorError("labels do not cover every node exactly once")
    return DirectedGraph(q.n, tuple(seen[v] for v in range(1, q.n + 1)))


def _cmd_factor(args) -> tuple[dict, int]:
    if args.mode == "sample":
        g = _load_graph(args.input)
        return random_factor(g, args.seed).to_json(), 0
    q = factor_from_json(_load_json(args.input))
    g = _graph_from_labels(q)
    flip = flip_move(g, (args.u, args.v))
    return givens_flip_factor(q, flip).to_json(), 0


# -- bundled demonstration scenarios -----------------------------------------

def _numeric_doc(g, h, seed, trials, restarts, jobs):
    cfg = OrthSolverConfig(restarts=restarts, seed=seed)
    return covariance_equiv_numeric(g, h, cfg, trials=trials, jobs=jobs).to_json()


def _repro_fig2(args):
    g, h = GRAPHS["fig2_g"], GRAPHS["fig2_h"]
    return {
        "scenario": "fig2",
        "graphs": {"g": graph_to_json(g), "h": graph_to_json(h)},
        "skeletons_equal": skeleton(g) == skeleton(h),
        "imset_equivalent": imset_equivalent(g, h),
        "numeric": _numeric_doc(g, h, args.seed, args.trials, args.restarts, args.jobs),
    }


def _flip_between(src: DirectedGraph, dst: DirectedGraph):
    for edge in sorted(covered_edges(src)):
        if apply_covered_flip(src, edge).parents == dst.parents:
            return edge
    raise GraphError("graphs are not one covered flip apart")


def _repro_fig3(args):
    left, mid, right = (
        GRAPHS["fig3_left"], GRAPHS["fig3_middle"], GRAPHS["fig3_right"],
    )
    return {
        "scenario": "fig3",
        "graphs": {
            "left": graph_to_json(left),
            "middle": graph_to_json(mid),
            "right": graph_to_json(right),
        },
        "imset_equivalent": imset_equivalent(left, mid) and imset_equivalent(mid, right),
        "markov_class_size": len(enumerate_dag_class(left)),
        "covered_edges": {
            "left": [list(e) for e in sorted(covered_edges(left))],
            "middle": [list(e) for e in sorted(covered_edges(mid))],
            "right": [list(e) for e in sorted(covered_edges(right))],
        },
        "flips": [
            {"from": "left", "to": "middle", "edge": list(_flip_between(left, mid))},
            {"from": "middle", "to": "right", "edge": list(_flip_between(mid, right))},
        ],
        "essential": essential_graph(left).to_json(),
    }


def _repro_fig4(args):
    left, right = GRAPHS["fig4_left"], GRAPHS["fig4_right"]
    return {
        "scenario": "fig4",
        "graphs": {"left": graph_to_json(left), "right": graph_to_json(right)},
        "char": {
            "left": imset_to_json(char_imset(left)),
            "right": imset_to_json(char_imset(right)),
        },
        "std": {
            "left": imset_to_json(std_imset(left)),
            "right": imset_to_json(std_imset(right)),
        },
        "imset_equivalent": imset_equivalent(left, right),
    }


def _components_summary(fiber):
    out = {}
    for name, moves in (
        ("flips", (CoveredFlip,)),
        ("cycles", (CycleReversal,)),
        ("flips+cycles", (CoveredFlip, CycleReversal)),
    ):
        out[name] = len(fiber_move_components(fiber, moves).components)
    return out


def _repro_fig5(args):
    left, right = GRAPHS["fig5_left"], GRAPHS["fig5_right"]
    fiber = fiber_of_graph(left, jobs=args.jobs)
    return {
        "scenario": "fig5",
        "graphs": {"left": graph_to_json(left), "right": graph_to_json(right)},
        "imset_equivalent": imset_equivalent(left, right),
        "fiber_size": len(fiber.graphs),
        "fiber": [graph_to_json(g) for g in fiber.graphs],
        "components": _components_summary(fiber),
    }


def _repro_fig6(args):
    left, right = GRAPHS["fig6_left"], GRAPHS["fig6_right"]
    fiber = fiber_of_graph(left, jobs=args.jobs)
    move = None
    for cyc in directed_cycles(left):
        if reverse_cycle(left, cyc).parents == right.parents:
            move = list(cyc)
            break
    return {
        "scenario": "fig6",
        "graphs": {"left": graph_to_json(left), "right": graph_to_json(right)},
        "imset_equivalent": imset_equivalent(left, right),
        "fiber_size": len(fiber.graphs),
        "components": _components_summary(fiber),
        "cycle_move": move,
        "numeric": _numeric_doc(
            left, right, args.seed, args.trials, args.restarts, args.jobs
        ),
    }


def _repro_fig7(args):
    left, right = GRAPHS["fig7_left"], GRAPHS["fig7_right"]
    diffs = imset_differences(left, right)
    return {
        "scenario": "fig7",
        "graphs": {"left": graph_to_json(left), "right": graph_to_json(right)},
        "skeletons_equal": skeleton(left) == skeleton(right),
        "imset_equivalent": not diffs,
        "imset_differences": [
            {"set": list(nodes_from_mask(m)), "values": [a, b]} for m, a, b in diffs
        ],
        "numeric": _numeric_doc(
            left, right, args.seed, args.trials, args.restarts, args.jobs
        ),
    }


def _repro_table_cs(args):
    left, right = GRAPHS["fig4_left"], GRAPHS["fig4_right"]
    cl, cr = char_imset(left), char_imset(right)
    sl, sr = std_imset(left).dense(), std_imset(right).dense()
    rows = []
    for mask in range(1 << 4):
        rows.append(
            {
                "set": list(nodes_from_mask(mask)),
                "c": None if mask == 0 else [cl.value(mask), cr.value(mask)],
                "s": [sl[mask], sr[mask]],
            }
        )
    return {"scenario": "table-cs", "n": 4, "rows": rows}


_SCENARIOS = {
    "fig2": _repro_fig2,
    "fig3": _repro_fig3,
    "fig4": _repro_fig4,
    "fig5": _repro_fig5,
    "fig6": _repro_fig6,
    "fig7": _repro_fig7,
    "table-cs": _repro_table_cs,
}


def _cmd_repro(args) -> tuple[dict, int]:
    return _SCENARIOS[args.scenario](args), 0


# -- argument parsing ---------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cimset",
        description="Imsets, fibers, and covariance equivalence of directed graphs.",
    )
    parser.add_argument("--format", choices=("json", "text"), default="json")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=_positive_int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("imset", help="characteristic/standard imsets of a graph")
    p.add_argument("mode", choices=("char", "std", "convert"))
    p.add_argument("input", help="graph (file or inline), or imset JSON for convert")

    p = sub.add_parser("equiv", help="equivalence checks between two graphs")
    p.add_argument("mode", choices=("imset", "dag", "numeric"))
    p.add_argument("g")
    p.add_argument("h")
    p.add_argument("--trials", type=_positive_int, default=5)
    p.add_argument("--restarts", type=_positive_int, default=50)
    p.add_argument("--max-iters", type=_positive_int, default=2000)
    p.add_argument("--tau", type=_positive_float, default=1e-8)

    p = sub.add_parser("essential", help="essential graph of a DAG's Markov class")
    p.add_argument("graph")

    p = sub.add_parser("fiber", help="all graphs sharing an imset, with components")
    p.add_argument("input", help="graph or characteristic-imset JSON")
    p.add_argument("--moves", default="flips,cycles")
    p.add_argument("--upto-iso", action="store_true")

    p = sub.add_parser("kernel", help="lattice identities of the imset map")
    p.add_argument("mode", choices=("verify",))
    p.add_argument("--n", type=_positive_int, required=True)

    p = sub.add_parser("decompose", help="write a kernel vector as signed flips")
    p.add_argument("input", help="family-vector JSON (file or inline)")
    p.add_argument("--n", type=_positive_int, default=None)

    p = sub.add_parser("flip", help="apply a covered edge flip")
    p.add_argument("graph")
    p.add_argument("u", type=_positive_int)
    p.add_argument("v", type=_positive_int)

    p = sub.add_parser("reverse-cycle", help="reverse a directed cycle in place")
    p.add_argument("graph")
    p.add_argument("nodes", type=_positive_int, nargs="+")

    p = sub.add_parser("factor", help="sparse factors and Givens flips on them")
    p.add_argument("mode", choices=("sample", "givens-flip"))
    p.add_argument("input", help="graph for sample, factor JSON for givens-flip")
    p.add_argument("u", type=_positive_int, nargs="?")
    p.add_argument("v", type=_positive_int, nargs="?")

    p = sub.add_parser("repro", help="bundled demonstration scenarios")
    p.add_argument("scenario", choices=sorted(_SCENARIOS))
    p.add_argument("--trials", type=_positive_int, default=2)
    p.add_argument("--restarts", type=_positive_int, default=10)

    return parser


_DISPATCH = {
    "imset": _cmd_imset,
    "equiv": _cmd_equiv,
    "essential": _cmd_essential,
    "fiber": _cmd_fiber,
    "kernel": _cmd_kernel,
    "decompose": _cmd_decompose,
    "flip": _cmd_flip,
    "reverse-cycle": _cmd_reverse_cycle,
    "factor": _cmd_factor,
    "repro": _cmd_repro,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "factor" and args.mode == "givens-flip":
        if args.u is None or args.v is None:
            print("error: factor givens-flip needs an edge u v", file=sys.stderr)
            return 2
    try:
        doc, code = _DISPATCH[args.command](args)
    except _ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    _emit(doc, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
