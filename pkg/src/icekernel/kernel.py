"""Infinite-volume kernel, k-point vertex correlations and vertex-type frequencies.

Every contour integral here reduces to the Fourier coefficients

    Phi(m1, m2) = oint oint w1^m1 w2^m2 / Delta(w1, w2)  dw1/(2 pi i w1) dw2/(2 pi i w2)

with integer ``m``.  Half powers of ``w`` from mixed-colour kernel entries are
cancelled against the half-integer displacement before anything is
evaluated, so no branch of the square root is ever chosen.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import Color, MidEdge, Vertex, incident_mid_edges
from .sixvertex import VERTEX_TYPES, FreeFermionParams, weights_from_params
from .snake import PATTERN_OF_TYPE

DEFAULT_GUARD = 1e-6
IMAG_TOL = 1e-9
CLAMP_TOL = 1e-9


class SpectralGuardError(ArithmeticError):
    """``Delta`` comes too close to zero on the unit torus."""


class QuadratureConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    initial_grid: int = 64
    max_grid: int = 4096
    rel_tol: float = 1e-9
    min_abs_delta_guard: float = DEFAULT_GUARD

    def __post_init__(self):
        for name in ("initial_grid", "max_grid"):
            g = getattr(self, name)
            if g < 2 or g & (g - 1):
                raise ValueError(f"{name} must be a power of two, got {g}")
        if self.max_grid < self.initial_grid:
            raise ValueError("max_grid must be >= initial_grid")
        if self.rel_tol <= 0 or self.min_abs_delta_guard <= 0:
            raise ValueError("tolerances must be positive")
        if self.min_abs_delta_guard < DEFAULT_GUARD:
            warnings.warn(
                f"spectral guard lowered to {self.min_abs_delta_guard:g}; "
                "results near zeros of Delta may be under-resolved",
                stacklevel=3,
            )


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True)
class SpectralPoint:
    w1: complex
    w2: complex

    def __post_init__(self):
        if abs(abs(self.w1) - 1) > 1e-14 or abs(abs(self.w2) - 1) > 1e-14:
            raise ValueError(f"spectral point must lie on the unit torus, got ({self.w1}, {self.w2})")


FourierIndex = Tuple[int, int]


@dataclass(frozen=True)
class KernelEntrySpec:
    """What ``L(x, y)`` depends on: doubled ``y - x`` and the two colours."""

    delta1: int
    delta2: int
    cx: Color
    cy: Color

    def __post_init__(self):
        mixed = self.cx is not self.cy
        for d in (self.delta1, self.delta2):
            if (d % 2 == 1) != mixed:
                raise ValueError("displacement parity does not match the colour pair")

    @classmethod
    def of(cls, x: MidEdge, y: MidEdge) -> "KernelEntrySpec":
        return cls(y.d1 - x.d1, y.d2 - x.d2, x.color, y.color)


def delta_poly(params: FreeFermionParams, w1, w2):
    """``Delta(w1, w2) = (1 + alpha w1)(1 + beta w2) - gamma^2 w1 w2``; works on arrays."""
    a, b, g = params.as_tuple()
    return (1 + a * w1) * (1 + b * w2) - g * g * w1 * w2


def m_inverse_numerator(cx: Color, cy: Color, params: FreeFermionParams) -> Dict[Tuple[int, int], float]:
    """Numerator of ``[M^{-1}]_{cx,cy}`` as ``{doubled (p1, p2): coefficient}``.

    ``{(0, 2): beta}`` stands for ``beta * w2``; ``{(1, 1): -gamma}`` for
    ``-gamma * w1^(1/2) * w2^(1/2)``.
    """
    a, b, g = params.as_tuple()
    if cx is Color.BLACK and cy is Color.BLACK:
        return {(0, 0): 1.0, (0, 2): b}
    if cx is Color.WHITE and cy is Color.WHITE:
        return {(0, 0): 1.0, (2, 0): a}
    return {(1, 1): -g}


def kernel_terms(params: FreeFermionParams, spec: KernelEntrySpec) -> List[Tuple[float, FourierIndex]]:
    """``L`` entry as a linear combination of integer-indexed ``Phi`` values."""
    terms = []
    for (p1, p2), coeff in m_inverse_numerator(spec.cx, spec.cy, params).items():
        e1, e2 = spec.delta1 + p1, spec.delta2 + p2
        if e1 % 2 or e2 % 2:
            raise AssertionError(f"fractional exponent survived: ({e1}/2, {e2}/2)")
        terms.append((coeff, (e1 // 2, e2 // 2)))
    return terms


# --- where Delta vanishes on the torus ----------------------------------------------
#
# Write Delta = A + B w2 with A = 1 + alpha w1 and B = beta - a2 w1.  For fixed
# w1 the only pole in w2 is -A/B, and on w1 = exp(i theta)
#     |A|^2 - |B|^2 = c0 + 2 k cos(theta).
# Delta has zeros on the torus exactly where this changes sign.


def _pole_split(params: FreeFermionParams) -> Tuple[float, float]:
    a, b, _ = params.as_tuple()
    a2 = params.a2
    return 1 + a * a - b * b - a2 * a2, a + b * a2


def crossing_angle(params: FreeFermionParams) -> Optional[float]:
    """``theta0`` in ``(0, pi)`` where ``Delta(exp(+-i theta0), .)`` has a zero on the circle.

    None when ``Delta`` is zero-free on the unit torus.  A zero set that
    is a whole curve raises ``SpectralGuardError``.
    """
    c0, k = _pole_split(params)
    if k == 0:
        if c0 == 0:
            raise SpectralGuardError(f"Delta vanishes on a curve of the unit torus for {params}")
        return None
    c = -c0 / (2 * k)
    if abs(c) >= 1:
        return None
    return math.acos(c)


def torus_min_abs_delta(params: FreeFermionParams, samples: int = 4096) -> Tuple[float, complex, complex]:
    """Approximate ``min |Delta|`` over the unit torus and a point attaining it.

    For fixed ``w1`` the minimum over ``w2`` is ``||A| - |B||``, reached at
    ``w2 = -(A/|A|) / (B/|B|)``, so only ``w1`` is sampled.
    """
    a, b, _ = params.as_tuple()
    theta = np.concatenate([2 * np.pi * np.arange(samples) / samples, [np.pi]])
    theta0 = crossing_angle(params)
    if theta0 is not None:
        theta = np.concatenate([theta, [theta0]])
    w1 = np.exp(1j * theta)
    A = 1 + a * w1
    B = b - params.a2 * w1
    gap = np.abs(np.abs(A) - np.abs(B))
    i = int(np.argmin(gap))
    w2 = -(A[i] / abs(A[i])) * (abs(B[i]) / B[i]) if B[i] != 0 else 1.0 + 0j
    return float(gap[i]), complex(w1[i]), complex(w2)


def _check_margin(params: FreeFermionParams, q: QuadratureConfig) -> None:
    margin, w1, w2 = torus_min_abs_delta(params)
    if margin < q.min_abs_delta_guard:
        raise SpectralGuardError(
            f"|Delta| = {margin:.3e} < guard {q.min_abs_delta_guard:g} near "
            f"w = ({w1:.6f}, {w2:.6f}) for {params}"
        )


@dataclass
class PhiEstimate:
    values: Dict[FourierIndex, complex]
    grid: int
    change: float
    backend: str = "grid"


def _starting_grid(indices: Iterable[FourierIndex], q: QuadratureConfig) -> int:
    reach = max((max(abs(m1), abs(m2)) for m1, m2 in indices), default=0)
    grid = q.initial_grid
    while grid < 4 * (reach + 1) and grid < q.max_grid:
        grid *= 2
    return grid


def _doubling(estimate, grid: int, q: QuadratureConfig, what: str):
    prev = estimate(grid)
    while True:
        if 2 * grid > q.max_grid:
            raise QuadratureConvergenceError(f"{what} did not converge by grid {grid}; last estimate {prev}")
        grid *= 2
        cur = estimate(grid)
        change = max((abs(cur[k] - prev[k]) for k in cur), default=0.0)
        if change < q.rel_tol:
            return cur, grid, change
        prev = cur


# --- Phi by uniform product grids -------------------------------------------------


@functools.lru_cache(maxsize=8)
def _phi_table(alpha: float, beta: float, gamma: float, grid: int) -> np.ndarray:
    w = np.exp(2j * np.pi * np.arange(grid) / grid)
    delta = delta_poly(FreeFermionParams(alpha, beta, gamma), w[:, None], w[None, :])
    table = np.fft.ifft2(1.0 / delta)
    table.setflags(write=False)
    return table


def phi_coeffs_grid(
    params: FreeFermionParams, indices: Iterable[FourierIndex], q: QuadratureConfig = DEFAULT_QUADRATURE
) -> PhiEstimate:
    """``Phi`` on doubling ``M x M`` grids; needs ``Delta`` zero-free on the torus."""
    indices = sorted(set(indices))
    theta0 = crossing_angle(params)
    if theta0 is not None:
        a, b, _ = params.as_tuple()
        w1 = complex(np.exp(1j * theta0))
        w2 = -(1 + a * w1) / (b - params.a2 * w1)
        raise SpectralGuardError(f"Delta vanishes on the unit torus at w = ({w1:.6f}, {w2:.6f}) for {params}")
    _check_margin(params, q)

    def estimate(m: int) -> Dict[FourierIndex, complex]:
        table = _phi_table(*params.as_tuple(), m)
        return {(a, b): complex(table[a % m, b % m]) for a, b in indices}

    values, grid, change = _doubling(estimate, _starting_grid(indices, q), q, "Phi")
    return PhiEstimate(values, grid, change, "grid")


# --- Phi by residues in w2, then a 1D rule in w1 ---------------------------------


def _w2_coefficient(params: FreeFermionParams, w1: np.ndarray, m2: int, pole_outside: bool) -> np.ndarray:
    """Coefficient of ``w2^(-m2)`` in the Laurent series of ``1/Delta(w1, .)`` on ``|w2| = 1``."""
    A = 1 + params.alpha * w1
    B = params.beta - params.a2 * w1
    if pole_outside:
        return (-B / A) ** (-m2) / A if m2 <= 0 else np.zeros_like(w1)
    return (-A / B) ** (m2 - 1) / B if m2 >= 1 else np.zeros_like(w1)


@functools.lru_cache(maxsize=16)
def _legendre(m: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(m)


def phi_coeff_residue(
    params: FreeFermionParams, m1: int, m2: int, q: QuadratureConfig = DEFAULT_QUADRATURE
) -> complex:
    """Independent ``Phi`` backend: exact ``w2`` integral by residues, 1D rule in ``w1``.

    Zero-free ``Delta``: periodic trapezoid in ``w1``.  Otherwise the ``w1``
    circle splits into two arcs at the crossing angle; the integrand is
    analytic on each and vanishes on one, so Gauss-Legendre on the other
    is exact up to rounding.
    """
    theta0 = crossing_angle(params)
    if theta0 is None:
        _check_margin(params, q)
        c0, k = _pole_split(params)
        outside = c0 + 2 * k > 0

        def estimate(m: int) -> Dict[int, complex]:
            w1 = np.exp(2j * np.pi * np.arange(m) / m)
            return {0: complex(np.mean(w1**m1 * _w2_coefficient(params, w1, m2, outside)))}

        start = _starting_grid([(m1, m2)], q)
    else:
        # |A| > |B| exactly on |theta| < theta0
        outside = m2 <= 0
        lo, hi = (-theta0, theta0) if outside else (theta0, 2 * np.pi - theta0)

        def estimate(m: int) -> Dict[int, complex]:
            x, wt = _legendre(m)
            theta = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            w1 = np.exp(1j * theta)
            vals = w1**m1 * _w2_coefficient(params, w1, m2, outside)
            return {0: complex(0.5 * (hi - lo) * np.dot(wt, vals) / (2 * np.pi))}

        start = 32
    values, _, _ = _doubling(estimate, start, q, "residue-reduced Phi")
    return values[0]


def phi_coeffs(
    params: FreeFermionParams,
    indices: Iterable[FourierIndex],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    backend: str = "auto",
) -> PhiEstimate:
    """``Phi`` at several indices.

    ``backend="auto"`` uses product grids when ``Delta`` is zero-free on the
    torus and the arc-split residue rule when it is not.
    """
    if backend not in ("auto", "grid", "residue"):
        raise ValueError(f"unknown Phi backend {backend!r}")
    if backend == "grid" or (backend == "auto" and crossing_angle(params) is None):
        return phi_coeffs_grid(params, indices, q)
    values = {idx: phi_coeff_residue(params, idx[0], idx[1], q) for idx in set(indices)}
    return PhiEstimate(values, 0, 0.0, "residue")


def phi_coeff(
    params: FreeFermionParams, m1: int, m2: int, q: QuadratureConfig = DEFAULT_QUADRATURE, backend: str = "auto"
) -> complex:
    return phi_coeffs(params, [(m1, m2)], q, backend).values[(m1, m2)]


# --- kernel and correlations --------------------------------------------------------


def kernel_L(params: FreeFermionParams, x: MidEdge, y: MidEdge, q: QuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    terms = kernel_terms(params, KernelEntrySpec.of(x, y))
    phi = phi_coeffs(params, [idx for _, idx in terms], q).values
    return sum(coeff * phi[idx] for coeff, idx in terms)


def kernel_matrix(
    params: FreeFermionParams,
    xs: Sequence[MidEdge],
    ys: Sequence[MidEdge],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
) -> Tuple[np.ndarray, PhiEstimate]:
    """``[L(xs[i], ys[j])]`` from one batched ``Phi`` evaluation."""
    terms = [[kernel_terms(params, KernelEntrySpec.of(x, y)) for y in ys] for x in xs]
    needed = {idx for row in terms for entry in row for _, idx in entry}
    est = phi_coeffs(params, needed, q)
    mat = np.array(
        [[sum(c * est.values[idx] for c, idx in entry) for entry in row] for row in terms],
        dtype=complex,
    ).reshape(len(xs), len(ys))
    return mat, est


def assemble_points(constraints: Sequence[Tuple[Vertex, int]]) -> Tuple[List[MidEdge], List[MidEdge]]:
    """Source and target mid-edges for a joint vertex-type event on the plane."""
    seen = set()
    xs: List[MidEdge] = []
    ys: List[MidEdge] = []
    for v, t in constraints:
        if t not in VERTEX_TYPES:
            raise ValueError(f"vertex type must be in 1..6, got {t}")
        if v in seen:
            raise ValueError(f"duplicate vertex ({v.v1}, {v.v2})")
        seen.add(v)
        w, s, e, n = incident_mid_edges(v)
        local = {"W": w, "S": s, "E": e, "N": n}
        to_w, to_s = PATTERN_OF_TYPE[t]
        xs += [w, s]
        ys += [local[to_w], local[to_s]]
    return xs, ys


@dataclass
class CorrelationResult:
    probability: float
    raw: float
    determinant: complex
    prefactor: float
    matrix: np.ndarray = field(repr=False)
    grid: int = 0
    clamped: bool = False
    imag_residue: float = 0.0
    backend: str = "grid"


def _clamp(value: float) -> Tuple[float, bool]:
    if -CLAMP_TOL < value < 0:
        return 0.0, True
    if 1 < value < 1 + CLAMP_TOL:
        return 1.0, True
    return value, False


def correlation_detailed(
    params: FreeFermionParams,
    constraints: Sequence[Tuple[Vertex, int]],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
) -> CorrelationResult:
    xs, ys = assemble_points(constraints)
    weights = weights_from_params(params)
    prefactor = math.prod(weights.of_type(t) for _, t in constraints)
    if not constraints:
        return CorrelationResult(1.0, 1.0, 1.0 + 0j, 1.0, np.zeros((0, 0), dtype=complex))
    mat, est = kernel_matrix(params, xs, ys, q)
    det = complex(np.linalg.det(mat))
    value = prefactor * det
    residue = abs(value.imag)
    if residue > IMAG_TOL:
        raise ArithmeticError(f"correlation has imaginary residue {residue:.3e}")
    prob, clamped = _clamp(value.real)
    return CorrelationResult(prob, value.real, det, prefactor, mat, est.grid, clamped, residue, est.backend)


def correlation(
    params: FreeFermionParams,
    constraints: Sequence[Tuple[Vertex, int]],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
) -> float:
    """Infinite-volume probability that each ``v`` has type ``t``."""
    return correlation_detailed(params, constraints, q).probability


# --- vertex polynomials and frequencies ---------------------------------------------


def vertex_poly(t: int, w4, params: FreeFermionParams):
    """``f_t(w1, w2, w1~, w2~)``; arguments may be arrays."""
    w1, w2, u1, u2 = w4
    a, b, g = params.as_tuple()
    g2 = g * g
    if t == 1:
        return (1 + b * w2) * (1 + a * u1) - g2 * w1 * u2
    if t == 2:
        return (g2 - a * b) * (g2 * u1 * w2 - (1 + a * u1) * (1 + b * w2)) * w1 * u2
    if t == 3:
        return b * u2 * ((1 + b * w2) * (1 + a * u1) - g2 * w1 * w2)
    if t == 4:
        return a * w1 * ((1 + b * w2) * (1 + a * u1) - g2 * u1 * u2)
    if t == 5:
        return g2 * u2 * (1 + b * w2) * (w1 - u1)
    if t == 6:
        return g2 * w1 * (1 + a * u1) * (u2 - w2)
    raise ValueError(f"vertex type must be in 1..6, got {t}")


def vertex_poly_matrix(t: int, w4, params: FreeFermionParams) -> np.ndarray:
    """The 2x2 integrand matrix of the single-vertex determinant (without ``1/Delta``).

    Row 1 uses ``(w1, w2)`` and row 2 ``(w1~, w2~)``; built from the kernel
    assembly rather than transcribed.
    """
    xs, ys = assemble_points([(Vertex(0, 0), t)])
    rows = [w4[:2], w4[2:]]
    out = np.empty((2, 2), dtype=complex)
    for i, x in enumerate(xs):
        z1, z2 = rows[i]
        for j, y in enumerate(ys):
            out[i, j] = sum(c * z1**m1 * z2**m2 for c, (m1, m2) in kernel_terms(params, KernelEntrySpec.of(x, y)))
    return out


_POLY_GRID = 4  # exact for degree <= 3 in each variable


@functools.lru_cache(maxsize=256)
def _vertex_poly_monomials(t: int, alpha: float, beta: float, gamma: float) -> Tuple[Tuple[Tuple[int, int, int, int], float], ...]:
    params = FreeFermionParams(alpha, beta, gamma)
    w = np.exp(2j * np.pi * np.arange(_POLY_GRID) / _POLY_GRID)
    grids = np.meshgrid(w, w, w, w, indexing="ij")
    coeffs = np.fft.fftn(vertex_poly(t, grids, params)) / _POLY_GRID**4
    out = []
    for idx in zip(*np.nonzero(np.abs(coeffs) > 1e-15)):
        c = coeffs[idx]
        out.append((tuple(int(i) for i in idx), float(c.real)))
    return tuple(out)


def vertex_poly_monomials(t: int, params: FreeFermionParams) -> Dict[Tuple[int, int, int, int], float]:
    """``f_t`` as ``{(a, b, c, d): coeff}`` for monomials ``w1^a w2^b w1~^c w2~^d``."""
    if t not in VERTEX_TYPES:
        raise ValueError(f"vertex type must be in 1..6, got {t}")
    return dict(_vertex_poly_monomials(t, *params.as_tuple()))


@dataclass
class FrequencyResult:
    frequency: float
    raw: float
    grid: int
    clamped: bool
    imag_residue: float
    backend: str = "grid"


def frequency_detailed(params: FreeFermionParams, t: int, q: QuadratureConfig = DEFAULT_QUADRATURE) -> FrequencyResult:
    monomials = vertex_poly_monomials(t, params)
    needed = {(a, b) for a, b, _, _ in monomials} | {(c, d) for _, _, c, d in monomials}
    est = phi_coeffs(params, needed, q)
    phi = est.values
    # the four-fold integral splits over (w1, w2) and (w1~, w2~)
    total = sum(coeff * phi[(a, b)] * phi[(c, d)] for (a, b, c, d), coeff in monomials.items())
    residue = abs(total.imag)
    if residue > IMAG_TOL:
        raise ArithmeticError(f"frequency has imaginary residue {residue:.3e}")
    value, clamped = _clamp(total.real)
    return FrequencyResult(value, total.real, est.grid, clamped, residue, est.backend)


def frequency(params: FreeFermionParams, t: int, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Infinite-volume probability that a given vertex has type ``t``."""
    return frequency_detailed(params, t, q).frequency


def frequencies(params: FreeFermionParams, q: QuadratureConfig = DEFAULT_QUADRATURE) -> Dict[int, float]:
    return {t: frequency(params, t, q) for t in VERTEX_TYPES}


# --- finite to infinite volume ------------------------------------------------------


@dataclass
class ConvergenceRow:
    n: int
    finite: float
    infinite: float
    gap: float


def finite_to_infinite_convergence(
    params: FreeFermionParams,
    constraints: Sequence[Tuple[Vertex, int]],
    sizes: Sequence[int],
    q: QuadratureConfig = DEFAULT_QUADRATURE,
) -> List[ConvergenceRow]:
    """Torus probabilities of an event next to the plane value, one row per size."""
    from .kasteleyn import vertex_event_finite

    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be increasing, got {sizes}")
    infinite = correlation_detailed(params, constraints, q).raw
    rows = []
    for n in sizes:
        finite = vertex_event_finite(n, params, constraints)
        rows.append(ConvergenceRow(n, finite, infinite, abs(finite - infinite)))
    return rows
