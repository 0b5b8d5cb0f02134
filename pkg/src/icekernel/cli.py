"""Command-line interface: ``icekernel {partition,correlate,frequencies,verify}``.

Results go to stdout as JSON (``schema: 1``) or, for frequency tables, CSV.
Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical
accuracy error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import kasteleyn, kernel, verify
from .lattice import TorusSize, Vertex
from .sixvertex import EnumerationTooLarge, FreeFermionParams, partition_enumerate, weights_from_params

SCHEMA = 1
EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_ACCURACY = 0, 1, 2, 3
ENUM_MAX_N = 3


class InputError(ValueError):
    pass


@dataclass
class QuerySpec:
    params: FreeFermionParams
    constraint_sets: List[List[Tuple[Vertex, int]]] = field(default_factory=list)
    quadrature: kernel.QuadratureConfig = kernel.DEFAULT_QUADRATURE


# --- query files ---------------------------------------------------------------------

_QUERY_KEYS = {
    "alpha": float,
    "beta": float,
    "gamma": float,
    "grid": int,
    "max_grid": int,
    "rel_tol": float,
    "guard": float,
}


def parse_query(text: str) -> Tuple[Dict[str, float], List[List[Tuple[Vertex, int]]]]:
    """Parse ``key = value`` lines and ``[constraints]`` blocks of ``v1 v2 type`` triples.

    Blank lines and ``#`` comments are ignored.  Each ``[constraints]``
    header starts a new constraint set.
    """
    values: Dict[str, float] = {}
    sets: List[List[Tuple[Vertex, int]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "[constraints]":
            sets.append([])
            continue
        if sets:
            parts = line.split()
            if len(parts) != 3:
                raise InputError(f"line {lineno}: expected 'v1 v2 type', got {raw.strip()!r}")
            try:
                v1, v2, t = (int(p) for p in parts)
            except ValueError:
                raise InputError(f"line {lineno}: constraint entries must be integers") from None
            sets[-1].append((Vertex(v1, v2), t))
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in _QUERY_KEYS:
            raise InputError(f"line {lineno}: expected one of {sorted(_QUERY_KEYS)} as 'key = value'")
        if key in values:
            raise InputError(f"line {lineno}: {key} given twice")
        try:
            values[key] = _QUERY_KEYS[key](value.strip())
        except ValueError:
            raise InputError(f"line {lineno}: bad value for {key}: {value.strip()!r}") from None
    if not sets:
        raise InputError("query has no [constraints] block")
    for i, cons in enumerate(sets):
        if not cons:
            raise InputError(f"constraint set {i + 1} is empty")
    return values, sets


def _validate_constraints(cons: Sequence[Tuple[Vertex, int]]) -> None:
    seen = set()
    for v, t in cons:
        if t not in range(1, 7):
            raise InputError(f"vertex type must be in 1..6, got {t} at ({v.v1}, {v.v2})")
        if v in seen:
            raise InputError(f"duplicate vertex ({v.v1}, {v.v2})")
        seen.add(v)


# --- helpers -------------------------------------------------------------------------


def _params(alpha, beta, gamma) -> FreeFermionParams:
    missing = [name for name, v in (("alpha", alpha), ("beta", beta), ("gamma", gamma)) if v is None]
    if missing:
        raise InputError(f"missing parameter(s): {', '.join(missing)}")
    return FreeFermionParams(alpha, beta, gamma)


def _quadrature(grid=None, max_grid=None, rel_tol=None, guard=None) -> kernel.QuadratureConfig:
    d = kernel.DEFAULT_QUADRATURE
    return kernel.QuadratureConfig(
        initial_grid=d.initial_grid if grid is None else grid,
        max_grid=d.max_grid if max_grid is None else max_grid,
        rel_tol=d.rel_tol if rel_tol is None else rel_tol,
        min_abs_delta_guard=d.min_abs_delta_guard if guard is None else guard,
    )


def _params_dict(p: FreeFermionParams) -> dict:
    return {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma}


def _quad_dict(q: kernel.QuadratureConfig) -> dict:
    return {
        "initial_grid": q.initial_grid,
        "max_grid": q.max_grid,
        "rel_tol": q.rel_tol,
        "min_abs_delta_guard": q.min_abs_delta_guard,
    }


def _complex(z: complex) -> List[float]:
    return [z.real, z.imag]


def _envelope(command: str, echo: dict, results, diagnostics: dict, tolerances: dict, start: float) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "input": echo,
        "results": results,
        "diagnostics": diagnostics,
        "tolerances": tolerances,
        "wall_time": time.perf_counter() - start,
    }


# --- commands ------------------------------------------------------------------------


def cmd_partition(n: int, params: FreeFermionParams, method: str) -> dict:
    start = time.perf_counter()
    size = TorusSize(n)
    if method in ("enum", "both") and n > ENUM_MAX_N:
        raise InputError(f"enumeration needs n <= {ENUM_MAX_N}, got n={n}")
    results: dict = {}
    diagnostics: dict = {}
    if method in ("enum", "both"):
        results["Z_enum"] = partition_enumerate(size, weights_from_params(params))
    if method in ("kasteleyn", "both"):
        log_z = kasteleyn.log_partition_kasteleyn(size, params)
        results["log_Z_kasteleyn"] = log_z
        results["Z_kasteleyn"] = math.exp(log_z) if log_z < 709 else None
        diagnostics["singular_sector_fallbacks"] = [list(t) for t in kasteleyn.finite_fallbacks(size, params)]
    if method == "both":
        results["relative_discrepancy"] = abs(results["Z_kasteleyn"] - results["Z_enum"]) / results["Z_enum"]
    echo = {"n": n, "method": method, "params": _params_dict(params)}
    return _envelope("partition", echo, results, diagnostics, {"relative_discrepancy": 1e-10}, start)


def cmd_correlate(query: QuerySpec) -> dict:
    start = time.perf_counter()
    p, q = query.params, query.quadrature
    for cons in query.constraint_sets:
        _validate_constraints(cons)
    results = []
    for cons in query.constraint_sets:
        res = kernel.correlation_detailed(p, cons, q)
        xs, ys = kernel.assemble_points(cons)
        entry = {
            "constraints": [[v.v1, v.v2, t] for v, t in cons],
            "probability": res.probability,
            "raw": res.raw,
            "determinant": _complex(res.determinant),
            "prefactor": res.prefactor,
            "clamped": res.clamped,
            "imag_residue": res.imag_residue,
            "quadrature_backend": res.backend,
            "grid": res.grid if res.backend == "grid" else None,
            "kernel": [
                {"x": [x.d1, x.d2], "y": [y.d1, y.d2], "value": _complex(complex(res.matrix[i, j]))}
                for i, x in enumerate(xs)
                for j, y in enumerate(ys)
            ],
        }
        if len(cons) > 1:
            # informational: how far the event is from independence
            entry["product_of_singles"] = math.prod(kernel.correlation(p, [c], q) for c in cons)
        results.append(entry)
    echo = {"params": _params_dict(p), "quadrature": _quad_dict(q)}
    diagnostics = {"points_doubled_coordinates": True}
    return _envelope("correlate", echo, results, diagnostics, {"imag_residue": kernel.IMAG_TOL}, start)


def cmd_frequencies(params: FreeFermionParams, q: kernel.QuadratureConfig) -> dict:
    start = time.perf_counter()
    rows = {t: kernel.frequency_detailed(params, t, q) for t in range(1, 7)}
    results = {
        "frequencies": {str(t): r.frequency for t, r in rows.items()},
        "sum": math.fsum(r.frequency for r in rows.values()),
    }
    diagnostics = {
        "quadrature_backend": rows[1].backend,
        "grid": max(r.grid for r in rows.values()) if rows[1].backend == "grid" else None,
        "clamped": [t for t, r in rows.items() if r.clamped],
        "imag_residue": max(r.imag_residue for r in rows.values()),
        "zeros_on_torus": kernel.crossing_angle(params) is not None,
    }
    echo = {"params": _params_dict(params), "quadrature": _quad_dict(q)}
    return _envelope("frequencies", echo, results, diagnostics, {"sum": 1e-8}, start)


def cmd_verify(suite: str, seed: int = 0, corrupt_c_theta: bool = False) -> Tuple[dict, List[verify.CheckResult]]:
    start = time.perf_counter()
    checks = verify.run_suite(suite, seed=seed, corrupt_c_theta=corrupt_c_theta)
    results = {"passed": all(c.passed for c in checks), "checks": [c.as_dict() for c in checks]}
    echo = {"suite": suite, "seed": seed, "corrupt_c_theta": corrupt_c_theta}
    return _envelope("verify", echo, results, {}, {}, start), checks


# --- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--alpha", type=float)
    params.add_argument("--beta", type=float)
    params.add_argument("--gamma", type=float)

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--grid", type=int, help="initial quadrature grid (power of two)")
    quad.add_argument("--max-grid", type=int)
    quad.add_argument("--rel-tol", type=float)
    quad.add_argument("--guard", type=float, help="minimum |Delta| on the torus; lowering it warns")

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="icekernel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", parents=[params, fmt], help="torus partition function")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=("enum", "kasteleyn", "both"), default="kasteleyn")

    c = sub.add_parser("correlate", parents=[params, quad, fmt], help="plane vertex-type correlations")
    c.add_argument("query", help="query file ('-' for stdin)")

    sub.add_parser("frequencies", parents=[params, quad, fmt], help="six vertex-type frequencies")

    v = sub.add_parser("verify", parents=[fmt], help="run the self-check suite")
    v.add_argument("--suite", choices=verify.SUITES, default="small")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--corrupt-c-theta", action="store_true", help=argparse.SUPPRESS)
    return parser


def _read_query(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _emit(envelope: dict, out) -> None:
    json.dump(envelope, out, indent=2)
    out.write("\n")


def _emit_frequency_csv(envelope: dict, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["type", "frequency"])
    for t, value in envelope["results"]["frequencies"].items():
        w.writerow([t, repr(value)])


def _dispatch(args, out) -> int:
    if args.format == "csv" and args.command != "frequencies":
        raise InputError("CSV output is only available for frequencies")

    if args.command == "partition":
        _emit(cmd_partition(args.n, _params(args.alpha, args.beta, args.gamma), args.method), out)
        return EXIT_OK

    if args.command == "verify":
        envelope, checks = cmd_verify(args.suite, args.seed, args.corrupt_c_theta)
        for c in checks:
            print(c.line(), file=sys.stderr)
        _emit(envelope, out)
        return EXIT_OK if envelope["results"]["passed"] else EXIT_VERIFY

    if args.command == "correlate":
        values, sets = parse_query(_read_query(args.query))
        # command-line flags override the file
        pick = lambda key, flag: flag if flag is not None else values.get(key)  # noqa: E731
        query = QuerySpec(
            _params(pick("alpha", args.alpha), pick("beta", args.beta), pick("gamma", args.gamma)),
            sets,
            _quadrature(
                pick("grid", args.grid), pick("max_grid", args.max_grid), pick("rel_tol", args.rel_tol),
                pick("guard", args.guard),
            ),
        )
        _emit(cmd_correlate(query), out)
        return EXIT_OK

    envelope = cmd_frequencies(
        _params(args.alpha, args.beta, args.gamma),
        _quadrature(args.grid, args.max_grid, args.rel_tol, args.guard),
    )
    (_emit_frequency_csv if args.format == "csv" else _emit)(envelope, out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        return _dispatch(args, out)
    except (InputError, EnumerationTooLarge, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"accuracy error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
