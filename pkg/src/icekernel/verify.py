"""Self-checks comparing every fast route against an independent oracle.

Each check returns a list of measurements ``(label, error, tolerance)``; a
check passes when every error is strictly below its tolerance.  The ``full``
suite runs at acceptance sizes, ``small`` at reduced sample counts.
"""

from __future__ import annotations

import contextlib
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Tuple
from unittest import mock

import numpy as np

from . import kasteleyn
from .kasteleyn import build_K, k_inverse_dense, kasteleyn_sign_sum, partition_kasteleyn, vertex_event_finite
from .kernel import (
    assemble_points,
    correlation,
    crossing_angle,
    delta_poly,
    finite_to_infinite_convergence,
    frequencies,
    kernel_L,
    kernel_matrix,
    phi_coeffs_grid,
    phi_coeff_residue,
    torus_min_abs_delta,
    vertex_poly,
)
from .lattice import MidEdge, TorusSize, Vertex, vertices
from .sixvertex import (
    FreeFermionParams,
    config_weight,
    enumerate_configs,
    event_probability_enumerate,
    partition_enumerate,
    weights_from_params,
)
from .snake import all_generalised_snakes, counts, perm_sign, phi, pure_weight, random_generalised_snake

SUITES = ("small", "full")
REFERENCE_POINTS = (FreeFermionParams(0.1, 0.1, 0.5), FreeFermionParams(0.3, 0.4, 0.8))
FROZEN_POINT = FreeFermionParams(0.0, 0.0, 0.5)


@dataclass
class Measurement:
    label: str
    error: float
    tolerance: float

    def __post_init__(self):
        self.error = float(self.error)

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


@dataclass
class CheckResult:
    name: str
    measurements: List[Measurement] = field(default_factory=list)
    seconds: float = 0.0
    failure: str = ""

    @property
    def passed(self) -> bool:
        return not self.failure and all(m.passed for m in self.measurements)

    @property
    def worst(self) -> Measurement:
        return max(self.measurements, key=lambda m: m.error / m.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.failure:
            return f"{status} {self.name}: {self.failure}"
        w = self.worst
        return f"{status} {self.name}: worst {w.label} error {w.error:.3e} (tol {w.tolerance:g}) [{self.seconds:.1f}s]"

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "seconds": self.seconds,
            "failure": self.failure or None,
            "measurements": [
                {"label": m.label, "error": m.error, "tolerance": m.tolerance, "passed": m.passed}
                for m in self.measurements
            ],
        }


def random_params(rng: np.random.Generator, zero_free: bool = False) -> FreeFermionParams:
    """Random valid ``(alpha, beta, gamma)``; ``zero_free`` keeps ``Delta`` off zero on the torus."""
    while True:
        a, b = rng.uniform(0.0, 1.0, size=2)
        g = math.sqrt(a * b + rng.uniform(0.05, 1.0))
        p = FreeFermionParams(float(a), float(b), float(g))
        if not zero_free or (crossing_angle(p) is None and torus_min_abs_delta(p)[0] > 1e-2):
            return p


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# --- individual checks ------------------------------------------------------------


def check_partition(full: bool, rng) -> List[Measurement]:
    out = []
    for n in (2, 3):
        worst = 0.0
        for _ in range(20 if full else 5):
            p = random_params(rng)
            worst = max(worst, _rel(partition_kasteleyn(n, p), partition_enumerate(n, weights_from_params(p))))
        out.append(Measurement(f"n={n} relative Z", worst, 1e-10))
    return out


def check_pushforward(full: bool, rng) -> List[Measurement]:
    p = random_params(rng)
    w = weights_from_params(p)

    def err(cfg) -> float:
        return _rel(pure_weight(phi(cfg), p), config_weight(cfg, w))

    t2 = max(err(cfg) for cfg in enumerate_configs(2))
    t3_all = list(enumerate_configs(3))
    picks = rng.integers(len(t3_all), size=1000 if full else 100)
    t3 = max(err(t3_all[i]) for i in picks)
    return [Measurement("T2 exhaustive", t2, 1e-12), Measurement("T3 sampled", t3, 1e-12)]


def _sign_lemma_error(g) -> Tuple[float, float]:
    a, b, c, s = counts(g)
    rhs = kasteleyn_sign_sum(g.size.n, a, b, c)
    lhs = perm_sign(g) * (-1) ** s
    return abs(rhs.real - lhs), abs(rhs.imag)


def check_sign_lemma(full: bool, rng) -> List[Measurement]:
    t2 = [_sign_lemma_error(g) for g in all_generalised_snakes(TorusSize(2))]
    size3 = TorusSize(3)
    t3 = [_sign_lemma_error(random_generalised_snake(size3, rng)) for _ in range(10_000 if full else 500)]
    return [
        Measurement("T2 exhaustive", max(e for e, _ in t2), 1e-12),
        Measurement("T2 imaginary", max(i for _, i in t2), 1e-12),
        Measurement("T3 sampled", max(e for e, _ in t3), 1e-12),
        Measurement("T3 imaginary", max(i for _, i in t3), 1e-12),
    ]


def check_finite_correlations(full: bool, rng) -> List[Measurement]:
    n = 3 if full else 2
    p = REFERENCE_POINTS[1]
    w = weights_from_params(p)
    verts = vertices(n)
    singles = max(
        abs(vertex_event_finite(n, p, [(v, t)]) - event_probability_enumerate(n, w, [(v, t)]))
        for v in verts
        for t in range(1, 7)
    )
    pairs = 0.0
    for _ in range(50 if full else 10):
        i, j = rng.choice(len(verts), size=2, replace=False)
        cons = [(verts[i], int(rng.integers(1, 7))), (verts[j], int(rng.integers(1, 7)))]
        pairs = max(pairs, abs(vertex_event_finite(n, p, cons) - event_probability_enumerate(n, w, cons)))
    return [Measurement(f"T{n} single vertex", singles, 1e-9), Measurement(f"T{n} vertex pairs", pairs, 1e-9)]


def check_inverse(full: bool, rng) -> List[Measurement]:
    n = 4 if full else 3
    p = REFERENCE_POINTS[1]
    out = []
    for th in kasteleyn.THETAS:
        K = build_K(n, th, p).entries
        dev = np.max(np.abs(K @ k_inverse_dense(n, th, p) - np.eye(K.shape[0])))
        out.append(Measurement(f"T{n} theta={th}", float(dev), 1e-12))
    return out


def check_frequencies(full: bool, rng) -> List[Measurement]:
    out = []
    for p in REFERENCE_POINTS:
        fr = frequencies(p)
        tag = f"({p.alpha:g},{p.beta:g},{p.gamma:g})"
        below = max(max(-f - 1e-9, f - 1 - 1e-9, 0.0) for f in fr.values())
        out.append(Measurement(f"{tag} outside [0,1]", below, 1e-300))
        out.append(Measurement(f"{tag} sum", abs(math.fsum(fr.values()) - 1), 1e-8))
        route = max(abs(fr[t] - correlation(p, [(Vertex(0, 0), t)])) for t in fr)
        out.append(Measurement(f"{tag} vs determinant route", route, 1e-8))
    frozen = frequencies(FROZEN_POINT)
    out.append(Measurement("frozen point", max(abs(frozen[t] - (t == 1)) for t in frozen), 1e-8))
    return out


def table_R(t: int, w4, p: FreeFermionParams) -> np.ndarray:
    """The 2x2 matrices ``R_t`` as tabulated alongside the vertex polynomials."""
    w1, w2, u1, u2 = w4
    a, b, g = p.as_tuple()
    rows = {
        1: [[1 + b * w2, -g * w1], [-g * u2, 1 + a * u1]],
        2: [[-g * w1 * w2, w1 * (1 + b * w2)], [u2 * (1 + a * u1), -g * u1 * u2]],
        3: [[1 + b * w2, -g * w1 * w2], [-g * u2, u2 * (1 + a * u1)]],
        4: [[(1 + b * w2) * w1, -g * w1], [-g * u1 * u2, 1 + a * u1]],
        5: [[1 + b * w2, (1 + b * w2) * w1], [-g * u2, -g * u1 * u2]],
        6: [[-g * w1 * w2, -g * w1], [(1 + a * u1) * u2, 1 + a * u1]],
    }
    return np.array(rows[t], dtype=complex)


def check_vertex_polys(full: bool, rng) -> List[Measurement]:
    p = random_params(rng)
    w = weights_from_params(p)
    pts = np.exp(2j * np.pi * rng.random((1000 if full else 200, 4)))
    summy = table = 0.0
    for w4 in pts:
        vals = [vertex_poly(t, w4, p) for t in range(1, 7)]
        summy = max(summy, abs(sum(vals) - delta_poly(p, w4[0], w4[1]) * delta_poly(p, w4[2], w4[3])))
        for t, f in zip(range(1, 7), vals):
            table = max(table, abs(f - w.of_type(t) * np.linalg.det(table_R(t, w4, p))))
    return [Measurement("sum of f_t vs Delta Delta~", summy, 1e-12), Measurement("f_t vs a_t det R_t", table, 1e-12)]


def check_convergence(full: bool, rng) -> List[Measurement]:
    sizes = (4, 8, 16, 32) if full else (4, 8, 16)
    rows = finite_to_infinite_convergence(REFERENCE_POINTS[0], [(Vertex(0, 0), 1)], sizes)
    gaps = [r.gap for r in rows]
    increases = sum(1 for a, b in zip(gaps, gaps[1:]) if b >= a)
    return [
        Measurement("non-decreasing steps " + ",".join(f"{g:.2e}" for g in gaps), float(increases), 0.5),
        Measurement(f"final gap at n={sizes[-1]}", gaps[-1], 1e-6),
    ]


def check_backends(full: bool, rng) -> List[Measurement]:
    idx = [(m1, m2) for m1 in range(-3, 4) for m2 in range(-3, 4)]
    worst = 0.0
    for _ in range(10 if full else 3):
        p = random_params(rng, zero_free=True)
        grid = phi_coeffs_grid(p, idx).values
        worst = max(worst, max(abs(grid[m] - phi_coeff_residue(p, *m)) for m in idx))
    return [Measurement("grid vs residue Phi", worst, 1e-9)]


def check_structure(full: bool, rng) -> List[Measurement]:
    p = REFERENCE_POINTS[1]
    shift = 0.0
    for _ in range(20 if full else 5):
        x = MidEdge(*_random_mid_edge(rng))
        y = MidEdge(*_random_mid_edge(rng))
        u1, u2 = (2 * int(c) for c in rng.integers(-5, 6, size=2))
        shifted = kernel_L(p, MidEdge(x.d1 + u1, x.d2 + u2), MidEdge(y.d1 + u1, y.d2 + u2))
        shift = max(shift, abs(kernel_L(p, x, y) - shifted))
    sym = 0.0
    for q in (FreeFermionParams(0.1, 0.3, 0.7), REFERENCE_POINTS[1]):
        swapped = FreeFermionParams(q.beta, q.alpha, q.gamma)
        f, g = frequencies(q), frequencies(swapped)
        sym = max(sym, abs(f[3] - g[4]), abs(f[4] - g[3]))
    # type-2 vertex: the crossed target order is a column swap of the uncrossed one
    xs, ys = assemble_points([(Vertex(0, 0), 2)])
    m, _ = kernel_matrix(p, xs, ys)
    m_swapped, _ = kernel_matrix(p, xs, ys[::-1])
    same_entries = float(np.max(np.abs(m_swapped - m[:, ::-1])))
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    det_swapped = m_swapped[0, 0] * m_swapped[1, 1] - m_swapped[0, 1] * m_swapped[1, 0]
    return [
        Measurement("kernel translation", shift, 1e-12),
        Measurement("alpha<->beta type 3<->4", sym, 1e-8),
        Measurement("type-2 swap entries", same_entries, 1e-300),
        Measurement("type-2 swap sign", abs(det + det_swapped), 1e-300),
    ]


def _random_mid_edge(rng) -> Tuple[int, int]:
    d1, d2 = (int(c) for c in rng.integers(-6, 7, size=2))
    return (d1, d2) if (d1 + d2) % 2 else (d1 + 1, d2)


CHECKS: Dict[str, Callable[[bool, np.random.Generator], List[Measurement]]] = {
    "partition identity": check_partition,
    "pushforward identity": check_pushforward,
    "kasteleyn sign lemma": check_sign_lemma,
    "finite correlations": check_finite_correlations,
    "inverse identity": check_inverse,
    "frequencies": check_frequencies,
    "vertex polynomials": check_vertex_polys,
    "infinite-volume convergence": check_convergence,
    "quadrature backends": check_backends,
    "structural invariances": check_structure,
}


def run_check(name: str, full: bool, seed: int = 0) -> CheckResult:
    result = CheckResult(name)
    start = time.perf_counter()
    try:
        result.measurements = CHECKS[name](full, np.random.default_rng(seed))
    except ArithmeticError as exc:
        result.failure = f"{type(exc).__name__}: {exc}"
    result.seconds = time.perf_counter() - start
    return result


@contextlib.contextmanager
def corrupted_c_theta(theta: Tuple[int, int] = (1, 1)) -> Iterator[None]:
    """Flip the sign of one ``C_theta``; for checking that the suite notices."""
    original = kasteleyn.c_theta

    def flipped(size, th):
        c = original(size, th)
        return -c if tuple(th) == theta else c

    kasteleyn._finite_torus.cache_clear()
    try:
        with mock.patch.object(kasteleyn, "c_theta", flipped):
            yield
    finally:
        kasteleyn._finite_torus.cache_clear()


def run_suite(suite: str = "small", seed: int = 0, corrupt_c_theta: bool = False) -> List[CheckResult]:
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {SUITES}, got {suite!r}")
    ctx = corrupted_c_theta() if corrupt_c_theta else contextlib.nullcontext()
    with ctx:
        return [run_check(name, suite == "full", seed) for name in CHECKS]
