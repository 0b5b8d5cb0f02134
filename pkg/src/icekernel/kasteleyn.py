"""Twisted Kasteleyn operators on torus mid-edges and finite-torus correlations.

For each twist ``theta in {0,1}^2`` the operator ``K_theta`` is the identity
plus weighted snake steps, with phases ``exp(pi i theta_1 / n)`` on e1 steps,
``exp(pi i theta_2 / n)`` on e2 steps and ``exp(pi i (theta_1+theta_2) / 2n)``
on e3 steps.  The torus partition function is the signed sum
``sum_theta C_theta det K_theta``, and correlations of the signed snake
measure are assembled from the four inverses.
"""

from __future__ import annotations

import cmath
import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import Color, HalfStep, MidEdge, SizeLike, TorusSize, Vertex, as_size, displacement, incident_mid_edges
from .sixvertex import FreeFermionParams, VERTEX_TYPES
from .snake import CROSSING, PATTERN_OF_TYPE

Theta = Tuple[int, int]
THETAS: Tuple[Theta, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

IMAG_TOL = 1e-10
# a sector whose |Delta_theta| dips below this on the root grid is treated as singular
SINGULAR_TOL = 1e-13


class AccuracyError(ArithmeticError):
    """The signed determinant sum lost all precision, or a result is not real."""


class SingularSectorError(ArithmeticError):
    pass


def _check_theta(theta: Theta) -> Theta:
    theta = tuple(int(t) for t in theta)
    if len(theta) != 2 or any(t not in (0, 1) for t in theta):
        raise ValueError(f"theta must be in {{0,1}}^2, got {theta}")
    return theta


def c_theta(size: SizeLike, theta: Theta) -> Fraction:
    n = as_size(size).n
    t1, t2 = _check_theta(theta)
    return Fraction(1, 2) * (-1) ** ((t1 + n + 1) * (t2 + n + 1))


def twisted_params(n: int, theta: Theta, p: FreeFermionParams) -> Tuple[complex, complex, complex]:
    """(alpha_theta, beta_theta, gamma_theta)."""
    t1, t2 = theta
    return (
        p.alpha * cmath.exp(1j * math.pi * t1 / n),
        p.beta * cmath.exp(1j * math.pi * t2 / n),
        p.gamma * cmath.exp(1j * math.pi * (t1 + t2) / (2 * n)),
    )


@dataclass(frozen=True, eq=False)
class KasteleynOperator:
    size: TorusSize
    theta: Theta
    params: FreeFermionParams
    entries: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class LogDet:
    log_magnitude: float
    phase: complex

    @property
    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    def value(self) -> complex:
        return 0j if self.is_zero else self.phase * math.exp(self.log_magnitude)


def build_K(size: SizeLike, theta: Theta, params: FreeFermionParams) -> KasteleynOperator:
    size = as_size(size)
    theta = _check_theta(theta)
    a, b, g = twisted_params(size.n, theta, params)
    m = size.num_mid_edges
    K = np.eye(m, dtype=complex)
    for i in range(m):
        x = size.mid_edge(i)
        long_step = HalfStep.E1 if x.color is Color.BLACK else HalfStep.E2
        K[i, size.index(_step(x, long_step))] += a if long_step is HalfStep.E1 else b
        K[i, size.index(_step(x, HalfStep.E3))] += g
    return KasteleynOperator(size, theta, params, K)


def _step(x: MidEdge, s: HalfStep) -> MidEdge:
    return MidEdge(x.d1 + s.value[0], x.d2 + s.value[1])


def det_K(op: KasteleynOperator) -> LogDet:
    """Determinant by LU with partial pivoting, as (log|det|, phase)."""
    phase, logabs = np.linalg.slogdet(op.entries)
    if phase == 0:
        return LogDet(-math.inf, 1 + 0j)
    return LogDet(float(logabs), complex(phase))


def det_K_spectral(size: SizeLike, theta: Theta, params: FreeFermionParams) -> LogDet:
    """Determinant as the product of ``Delta_theta`` over all root-of-unity pairs."""
    size = as_size(size)
    delta = _delta_theta_grid(size.n, _check_theta(theta), params)
    mags = np.abs(delta)
    if np.any(mags == 0):
        return LogDet(-math.inf, 1 + 0j)
    phase = np.exp(1j * np.sum(np.angle(delta)))
    return LogDet(float(np.sum(np.log(mags))), complex(phase))


def _roots(n: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


def _delta_theta_grid(n: int, theta: Theta, params: FreeFermionParams) -> np.ndarray:
    """``Delta_theta(w1, w2)`` on the grid ``w1 = roots[j], w2 = roots[k]``."""
    a, b, g = twisted_params(n, theta, params)
    w1 = _roots(n)[:, None]
    w2 = _roots(n)[None, :]
    return (1 + a * w1) * (1 + b * w2) - g * g * w1 * w2


def combine_signed(terms: Sequence[Tuple[float, LogDet]]) -> Tuple[complex, float]:
    """Sum ``coeff * det`` over terms, factoring out the largest magnitude.

    Returns ``(sum / scale, log(scale))``.
    """
    live = [(c, d) for c, d in terms if not d.is_zero and c != 0]
    if not live:
        return 0j, -math.inf
    top = max(d.log_magnitude for _, d in live)
    total = sum(complex(c) * d.phase * math.exp(d.log_magnitude - top) for c, d in live)
    return total, top


@functools.lru_cache(maxsize=64)
def _finite_torus(n: int, alpha: float, beta: float, gamma: float) -> "FiniteTorus":
    return FiniteTorus(TorusSize(n), FreeFermionParams(alpha, beta, gamma))


def _workers() -> int:
    env = os.environ.get("ICEKERNEL_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


class FiniteTorus:
    """Per-(n, params) cache of sector determinants, weights and inverse tables."""

    def __init__(self, size: TorusSize, params: FreeFermionParams):
        self.size = size
        self.params = params
        self.fallbacks: List[Theta] = []
        n = size.n
        with ThreadPoolExecutor(max_workers=_workers()) as pool:
            dets = list(pool.map(lambda th: det_K(build_K(size, th, params)), THETAS))
        self.dets: Dict[Theta, LogDet] = dict(zip(THETAS, dets))
        total, scale = combine_signed([(c_theta(n, th), self.dets[th]) for th in THETAS])
        # every live term has magnitude <= 1/2 after scaling
        if abs(total) < 0.5e-12:
            raise AccuracyError("signed determinant sum cancelled to below 1e-12 relative")
        if abs(total.imag) > IMAG_TOL * abs(total):
            raise AccuracyError(f"partition function has imaginary residue {total.imag / abs(total):.3e}")
        if total.real <= 0:
            raise AccuracyError(f"partition function is not positive ({total.real})")
        self.log_partition = scale + math.log(total.real)
        # C_theta det K_theta / Z, as complex numbers summing to 1
        self.sector_weight: Dict[Theta, complex] = {}
        for th in THETAS:
            d = self.dets[th]
            self.sector_weight[th] = (
                0j
                if d.is_zero
                else complex(float(c_theta(n, th)) * d.phase * math.exp(d.log_magnitude - self.log_partition))
            )
        self._tables: Dict[Theta, object] = {}

    @property
    def partition(self) -> float:
        return math.exp(self.log_partition)

    def inverse_table(self, theta: Theta):
        if theta not in self._tables:
            self._tables[theta] = _inverse_table(self.size, theta, self.params)
        return self._tables[theta]

    def inverse_matrix(self, theta: Theta, rows: Sequence[MidEdge], cols: Sequence[MidEdge]) -> np.ndarray:
        """``[K_theta^{-1}(rows[i], cols[j])]``, with dense fallback for singular spectra."""
        try:
            table = self.inverse_table(theta)
        except SingularSectorError:
            if theta not in self.fallbacks:
                self.fallbacks.append(theta)
            dense = np.linalg.inv(build_K(self.size, theta, self.params).entries)
            s = self.size
            return np.array([[dense[s.index(x), s.index(y)] for y in cols] for x in rows])
        return np.array([[_lookup(table, self.size.n, x, y) for y in cols] for x in rows])


def _inverse_table(size: TorusSize, theta: Theta, params: FreeFermionParams):
    """Fourier tables of ``K_theta^{-1}`` keyed by colour pair.

    ``table[(cx, cy)][m1 % n, m2 % n]`` is
    ``(1/n^2) sum_w w1^m1 w2^m2 g_{cx,cy}(w) / Delta_theta(w)`` with ``g``
    the numerator of the 2x2 inverse with half powers absorbed into ``m``.
    """
    n = size.n
    a, b, g = twisted_params(n, theta, params)
    delta = _delta_theta_grid(n, theta, params)
    if np.min(np.abs(delta)) < SINGULAR_TOL:
        raise SingularSectorError(f"Delta_theta vanishes at a root pair for theta={theta}, n={n}")
    w1 = _roots(n)[:, None]
    w2 = _roots(n)[None, :]
    numerators = {
        (Color.BLACK, Color.BLACK): (1 + b * w2) * np.ones_like(w1),
        (Color.WHITE, Color.WHITE): (1 + a * w1) * np.ones_like(w2),
        (Color.BLACK, Color.WHITE): -g * np.ones((n, n), dtype=complex),
    }
    # ifft2 gives (1/n^2) sum_jk f[j,k] exp(+2 pi i (j m1 + k m2)/n)
    table = {key: np.fft.ifft2(num / delta) for key, num in numerators.items()}
    table[(Color.WHITE, Color.BLACK)] = table[(Color.BLACK, Color.WHITE)]
    return table


def _lookup(table, n: int, x: MidEdge, y: MidEdge) -> complex:
    cx, cy = x.color, y.color
    e1, e2 = x.d1 - y.d1, x.d2 - y.d2
    if cx is not cy:
        e1, e2 = e1 + 1, e2 + 1
    assert e1 % 2 == 0 and e2 % 2 == 0, "fractional exponent survived"
    return complex(table[(cx, cy)][(e1 // 2) % n, (e2 // 2) % n])


def k_inverse_entry(
    size: SizeLike, theta: Theta, params: FreeFermionParams, x: MidEdge, y: MidEdge
) -> complex:
    """``K_theta^{-1}(x, y)`` from the root-of-unity Fourier formula."""
    size = as_size(size)
    table = _inverse_table(size, _check_theta(theta), params)
    return _lookup(table, size.n, x.wrap(size), y.wrap(size))


def k_inverse_dense(size: SizeLike, theta: Theta, params: FreeFermionParams) -> np.ndarray:
    """Full inverse matrix in canonical order, assembled from the Fourier formula."""
    size = as_size(size)
    table = _inverse_table(size, _check_theta(theta), params)
    edges = [size.mid_edge(i) for i in range(size.num_mid_edges)]
    return np.array([[_lookup(table, size.n, x, y) for y in edges] for x in edges])


def partition_kasteleyn(size: SizeLike, params: FreeFermionParams) -> float:
    size = as_size(size)
    return _finite_torus(size.n, *params.as_tuple()).partition


def log_partition_kasteleyn(size: SizeLike, params: FreeFermionParams) -> float:
    size = as_size(size)
    return _finite_torus(size.n, *params.as_tuple()).log_partition


def kasteleyn_sign_sum(n: int, a: int, b: int, c: int) -> complex:
    """``sum_theta C_theta exp(pi i theta_1 (A + C/2)/n + pi i theta_2 (B + C/2)/n)``."""
    total = 0j
    for t1, t2 in THETAS:
        arg = math.pi * (t1 * (a + c / 2) + t2 * (b + c / 2)) / n
        total += float(c_theta(n, (t1, t2))) * cmath.exp(1j * arg)
    return total


def _step_of_pair(size: TorusSize, x: MidEdge, y: MidEdge) -> HalfStep:
    s = displacement(x, y, size)
    if s is None or (s is HalfStep.E1 and x.color is not Color.BLACK) or (
        s is HalfStep.E2 and x.color is not Color.WHITE
    ):
        raise ValueError(f"{y} is not a snake step away from {x}")
    return s


def k00(params: FreeFermionParams, s: HalfStep) -> float:
    return {HalfStep.ZERO: 1.0, HalfStep.E1: params.alpha, HalfStep.E2: params.beta, HalfStep.E3: params.gamma}[s]


@dataclass
class FiniteCorrelation:
    value: float
    imag_residue: float
    fallback_sectors: List[Theta]


def corr_finite_detailed(
    size: SizeLike, params: FreeFermionParams, pairs: Sequence[Tuple[MidEdge, MidEdge]]
) -> FiniteCorrelation:
    size = as_size(size)
    pairs = [(x.wrap(size), y.wrap(size)) for x, y in pairs]
    xs = [x for x, _ in pairs]
    if len(set(xs)) != len(xs):
        raise ValueError("source mid-edges must be distinct")
    steps = [_step_of_pair(size, x, y) for x, y in pairs]
    if not pairs:
        return FiniteCorrelation(1.0, 0.0, [])
    if len({y for _, y in pairs}) != len(pairs):
        # two sources cannot share an image under a permutation
        return FiniteCorrelation(0.0, 0.0, [])
    torus = _finite_torus(size.n, *params.as_tuple())
    # doubled total displacement
    s1 = sum(s.value[0] for s in steps)
    s2 = sum(s.value[1] for s in steps)
    ys = [y for _, y in pairs]
    total = 0j
    for th in THETAS:
        w = torus.sector_weight[th]
        if w == 0:
            continue
        q = cmath.exp(1j * math.pi * (th[0] * s1 + th[1] * s2) / (2 * size.n))
        total += w * q * np.linalg.det(torus.inverse_matrix(th, ys, xs))
    prefactor = math.prod(k00(params, s) for s in steps)
    value = prefactor * total
    residue = abs(value.imag)
    if residue > IMAG_TOL * max(1.0, abs(value.real)):
        raise AccuracyError(f"finite correlation has imaginary residue {residue:.3e}")
    return FiniteCorrelation(float(value.real), residue, list(torus.fallbacks))


def corr_finite(size: SizeLike, params: FreeFermionParams, pairs: Sequence[Tuple[MidEdge, MidEdge]]) -> float:
    """Signed-measure probability that ``snake(x) == y`` for every pair."""
    return corr_finite_detailed(size, params, pairs).value


def vertex_event_pairs(
    constraints: Sequence[Tuple[Vertex, int]], size: Optional[SizeLike] = None
) -> List[List[Tuple[MidEdge, MidEdge]]]:
    """Every snake-event realisation of a joint vertex-type event.

    A type-2 vertex has two realisations (uncrossed and crossed); all others
    have one.  Returns one list of (source, target) pairs per realisation.
    """
    _check_distinct(constraints, size)
    options: List[List[List[Tuple[MidEdge, MidEdge]]]] = []
    for v, t in constraints:
        if t not in VERTEX_TYPES:
            raise ValueError(f"vertex type must be in 1..6, got {t}")
        w, s, e, n = incident_mid_edges(v, size)
        local = {"W": w, "S": s, "E": e, "N": n}
        pats = [PATTERN_OF_TYPE[t]] + ([CROSSING] if t == 2 else [])
        options.append([[(w, local[pw]), (s, local[ps])] for pw, ps in pats])
    realisations: List[List[Tuple[MidEdge, MidEdge]]] = [[]]
    for opts in options:
        realisations = [r + o for r in realisations for o in opts]
    return realisations


def _check_distinct(constraints, size) -> None:
    seen = set()
    for v, _ in constraints:
        key = v.wrap(size) if size is not None else v
        if key in seen:
            raise ValueError(f"duplicate vertex ({key.v1}, {key.v2})")
        seen.add(key)


def vertex_event_finite(size: SizeLike, params: FreeFermionParams, constraints: Sequence[Tuple[Vertex, int]]) -> float:
    """Boltzmann probability of a joint vertex-type event on the torus, via Kasteleyn inverses."""
    size = as_size(size)
    return math.fsum(corr_finite(size, params, pairs) for pairs in vertex_event_pairs(constraints, size))


def finite_fallbacks(size: SizeLike, params: FreeFermionParams) -> List[Theta]:
    """Sectors that needed the dense-inverse fallback so far."""
    size = as_size(size)
    return list(_finite_torus(size.n, *params.as_tuple()).fallbacks)
