"""Six-vertex configurations on the torus and the brute-force enumeration oracle.

A configuration stores one boolean per edge.  ``horiz[i]`` is the edge from
vertex ``i`` to its east neighbour and ``vert[i]`` the edge to its north
neighbour; ``True`` means the arrow points in the positive direction.
Vertices are indexed ``i = v1 + n * v2``.

Vertex types follow the usual picture order: with (W, E, S, N) the arrow
directions on the four incident edges (True = pointing +e1 / +e2),

    1: (+, +, +, +)   2: (-, -, -, -)
    3: (+, +, -, -)   4: (-, -, +, +)
    5: (+, -, -, +)   6: (-, +, +, -)
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from .lattice import SizeLike, TorusSize, Vertex, as_size

MAX_ENUM_EDGES = 26

# (W, E, S, N) -> type
_TYPE_OF_ARROWS: Dict[Tuple[bool, bool, bool, bool], int] = {
    (True, True, True, True): 1,
    (False, False, False, False): 2,
    (True, True, False, False): 3,
    (False, False, True, True): 4,
    (True, False, False, True): 5,
    (False, True, True, False): 6,
}
ARROWS_OF_TYPE = {t: arrows for arrows, t in _TYPE_OF_ARROWS.items()}
VERTEX_TYPES = (1, 2, 3, 4, 5, 6)


class IceRuleError(ValueError):
    pass


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FreeFermionParams:
    """Free-fermion parametrisation (alpha, beta, gamma) of the six-vertex weights.

    ``alpha`` and ``beta`` may be zero (frozen limit); ``gamma`` must be
    positive and ``gamma**2 - alpha*beta`` strictly positive.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be >= 0, got ({self.alpha}, {self.beta})")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma**2 - self.alpha * self.beta <= 0:
            raise ValueError(
                f"need gamma^2 - alpha*beta > 0, got {self.gamma**2 - self.alpha * self.beta}"
            )

    @property
    def a2(self) -> float:
        return self.gamma**2 - self.alpha * self.beta

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class SixVertexWeights:
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float

    def __post_init__(self):
        if any(w < 0 or not math.isfinite(w) for w in self.as_tuple()):
            raise ValueError(f"weights must be finite and non-negative, got {self.as_tuple()}")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.a1, self.a2, self.b1, self.b2, self.c1, self.c2)

    def of_type(self, t: int) -> float:
        return self.as_tuple()[t - 1]


def weights_from_params(p: FreeFermionParams) -> SixVertexWeights:
    return SixVertexWeights(1.0, p.gamma**2 - p.alpha * p.beta, p.beta, p.alpha, p.gamma, p.gamma)


def anisotropy(w: SixVertexWeights) -> float:
    if min(w.a1, w.a2, w.b1, w.b2) <= 0:
        raise ValueError("anisotropy needs a1, a2, b1, b2 > 0")
    return (w.a1 * w.a2 + w.b1 * w.b2 - w.c1 * w.c2) / (2.0 * math.sqrt(w.a1 * w.a2 * w.b1 * w.b2))


@dataclass(frozen=True, eq=False)
class SixVertexConfig:
    size: TorusSize
    horiz: Tuple[bool, ...]
    vert: Tuple[bool, ...]

    def __post_init__(self):
        m = self.size.num_vertices
        if len(self.horiz) != m or len(self.vert) != m:
            raise ValueError(f"expected {m} horizontal and vertical edges")

    @classmethod
    def from_arrays(cls, size: SizeLike, horiz, vert) -> "SixVertexConfig":
        return cls(as_size(size), tuple(bool(h) for h in horiz), tuple(bool(v) for v in vert))

    @classmethod
    def uniform(cls, size: SizeLike, positive: bool) -> "SixVertexConfig":
        size = as_size(size)
        edges = (positive,) * size.num_vertices
        return cls(size, edges, edges)

    def __eq__(self, other):
        if not isinstance(other, SixVertexConfig):
            return NotImplemented
        return (self.size, self.horiz, self.vert) == (other.size, other.horiz, other.vert)

    def __hash__(self):
        return hash((self.size, self.horiz, self.vert))

    def arrows(self, v: Vertex) -> Tuple[bool, bool, bool, bool]:
        """Directions (W, E, S, N) of the edges incident to ``v``."""
        s = self.size
        i = s.vertex_index(v)
        return (
            self.horiz[s.vertex_index(Vertex(v.v1 - 1, v.v2))],
            self.horiz[i],
            self.vert[s.vertex_index(Vertex(v.v1, v.v2 - 1))],
            self.vert[i],
        )

    def satisfies_ice_rule(self) -> bool:
        return all(_ice_ok(self.arrows(v)) for v in _vertices(self.size))

    def reversed(self) -> "SixVertexConfig":
        return SixVertexConfig(self.size, tuple(not h for h in self.horiz), tuple(not v for v in self.vert))

    def types(self) -> Tuple[int, ...]:
        return tuple(vertex_type(self, v) for v in _vertices(self.size))


def _vertices(size: TorusSize):
    return (size.vertex(i) for i in range(size.num_vertices))


def _ice_ok(arrows) -> bool:
    w, e, s, n = arrows
    return w + s == e + n


def vertex_type(cfg: SixVertexConfig, v: Vertex) -> int:
    arrows = cfg.arrows(v)
    try:
        return _TYPE_OF_ARROWS[arrows]
    except KeyError:
        raise IceRuleError(f"ice rule violated at {v}: (W, E, S, N) = {arrows}") from None


def config_weight(cfg: SixVertexConfig, w: SixVertexWeights) -> float:
    return math.prod(w.of_type(t) for t in cfg.types())


def _check_enum_size(size: TorusSize) -> None:
    if 2 * size.num_vertices > MAX_ENUM_EDGES:
        raise EnumerationTooLarge(
            f"enumeration needs 2n^2 <= {MAX_ENUM_EDGES}, got n={size.n}"
        )


@functools.lru_cache(maxsize=None)
def _ice_table(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bitmasks of all ice configurations and their vertex types.

    Bit ``i`` of a mask is ``horiz[i]``, bit ``n^2 + i`` is ``vert[i]``.
    Returns ``(masks, types)`` with ``types[c, i]`` the type at vertex ``i``.
    """
    size = TorusSize(n)
    _check_enum_size(size)
    m = n * n
    masks = np.arange(1 << (2 * m), dtype=np.int64)
    bit = lambda k: (masks >> k) & 1  # noqa: E731
    keep = np.ones(masks.shape, dtype=bool)
    for i in range(m):
        v1, v2 = i % n, i // n
        w = bit((v1 - 1) % n + n * v2)
        e = bit(i)
        s = bit(m + v1 + n * ((v2 - 1) % n))
        nn = bit(m + i)
        keep &= (w + s) == (e + nn)
    masks = masks[keep]

    lookup = np.zeros(16, dtype=np.int8)
    for (w, e, s, nn), t in _TYPE_OF_ARROWS.items():
        lookup[w | (e << 1) | (s << 2) | (nn << 3)] = t
    types = np.empty((masks.size, m), dtype=np.int8)
    bit = lambda k: (masks >> k) & 1  # noqa: E731
    for i in range(m):
        v1, v2 = i % n, i // n
        code = (
            bit((v1 - 1) % n + n * v2)
            | (bit(i) << 1)
            | (bit(m + v1 + n * ((v2 - 1) % n)) << 2)
            | (bit(m + i) << 3)
        )
        types[:, i] = lookup[code]
    masks.setflags(write=False)
    types.setflags(write=False)
    return masks, types


def _config_from_mask(size: TorusSize, mask: int) -> SixVertexConfig:
    m = size.num_vertices
    horiz = tuple(bool((mask >> i) & 1) for i in range(m))
    vert = tuple(bool((mask >> (m + i)) & 1) for i in range(m))
    return SixVertexConfig(size, horiz, vert)


def enumerate_configs(size: SizeLike) -> Iterator[SixVertexConfig]:
    """Every ice-rule configuration on the torus, each exactly once."""
    size = as_size(size)
    masks, _ = _ice_table(size.n)
    for mask in masks:
        yield _config_from_mask(size, int(mask))


def count_configs(size: SizeLike) -> int:
    return int(_ice_table(as_size(size).n)[0].size)


def _type_counts(types: np.ndarray) -> np.ndarray:
    return np.stack([(types == t).sum(axis=1) for t in VERTEX_TYPES], axis=1)


def _weights_per_config(size: TorusSize, w: SixVertexWeights) -> np.ndarray:
    _, types = _ice_table(size.n)
    counts = _type_counts(types)
    return np.prod(np.power(np.asarray(w.as_tuple(), dtype=float), counts), axis=1)


def partition_enumerate(size: SizeLike, w: SixVertexWeights) -> float:
    size = as_size(size)
    _check_enum_size(size)
    return float(math.fsum(_weights_per_config(size, w)))


def event_probability_enumerate(
    size: SizeLike, w: SixVertexWeights, constraints: Sequence[Tuple[Vertex, int]]
) -> float:
    """Boltzmann probability that each listed vertex has the listed type."""
    size = as_size(size)
    _check_enum_size(size)
    seen = set()
    for v, t in constraints:
        if t not in VERTEX_TYPES:
            raise ValueError(f"vertex type must be in 1..6, got {t}")
        key = size.vertex_index(v)
        if key in seen:
            raise ValueError(f"duplicate vertex {v.wrap(size)}")
        seen.add(key)
    _, types = _ice_table(size.n)
    weights = _weights_per_config(size, w)
    hit = np.ones(types.shape[0], dtype=bool)
    for v, t in constraints:
        hit &= types[:, size.vertex_index(v)] == t
    return math.fsum(weights[hit]) / math.fsum(weights)
