"""Snake configurations: permutations of mid-edges that move by 0, e1, e2 or e3.

A generalised snake is stored as ``image[i] = j`` over canonical mid-edge
indices.  Everything interesting happens locally at a vertex ``v``: the pair
``(image(W_v), image(S_v))`` names one of the six vertex patterns or a
crossing, using the labels ``"W", "S", "E", "N"`` relative to ``v``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .lattice import TorusSize, Vertex, incident_mid_edges
from .sixvertex import (
    ARROWS_OF_TYPE,
    FreeFermionParams,
    SixVertexConfig,
    count_configs,
    enumerate_configs,
    vertex_type,
    _config_from_mask,
    _ice_table,
)

# (image of W_v, image of S_v) for each vertex type; the crossing is separate
PATTERN_OF_TYPE: Dict[int, Tuple[str, str]] = {
    1: ("W", "S"),
    2: ("N", "E"),
    3: ("W", "N"),
    4: ("E", "S"),
    5: ("W", "E"),
    6: ("N", "S"),
}
CROSSING = ("E", "N")
_TYPE_OF_PATTERN = {p: t for t, p in PATTERN_OF_TYPE.items()}


class SnakeCounts(NamedTuple):
    A: int  # steps by e1
    B: int  # steps by e2
    C: int  # steps by e3
    S: int  # crossings


def _local_indices(size: TorusSize, v: Vertex) -> Dict[str, int]:
    w, s, e, n = incident_mid_edges(v, size)
    return {"W": size.index(w), "S": size.index(s), "E": size.index(e), "N": size.index(n)}


@dataclass(frozen=True, eq=False)
class GenSnakeConfig:
    size: TorusSize
    image: Tuple[int, ...]

    def __post_init__(self):
        size = self.size
        m = size.num_mid_edges
        if len(self.image) != m or sorted(self.image) != list(range(m)):
            raise ValueError("snake image is not a permutation of the mid-edges")
        for v in _vertices(size):
            if self._pattern_or_none(v) is None:
                raise ValueError(f"illegal snake step at vertex {v}")

    def __eq__(self, other):
        if not isinstance(other, GenSnakeConfig):
            return NotImplemented
        return self.size == other.size and self.image == other.image

    def __hash__(self):
        return hash((self.size, self.image))

    def _pattern_or_none(self, v: Vertex) -> Optional[Tuple[str, str]]:
        loc = _local_indices(self.size, v)
        inverse = {idx: label for label, idx in loc.items()}
        w_to = inverse.get(self.image[loc["W"]])
        s_to = inverse.get(self.image[loc["S"]])
        if w_to not in ("W", "N", "E") or s_to not in ("S", "E", "N"):
            return None
        return (w_to, s_to)

    def pattern(self, v: Vertex) -> Tuple[str, str]:
        return self._pattern_or_none(v)

    def crossings(self) -> List[Vertex]:
        return [v for v in _vertices(self.size) if self.pattern(v) == CROSSING]

    @property
    def is_pure(self) -> bool:
        return not self.crossings()

    @classmethod
    def from_patterns(cls, size: TorusSize, patterns: Sequence[Tuple[str, str]]) -> "GenSnakeConfig":
        """Build from one (W-image, S-image) label pair per vertex, in vertex order."""
        image = [0] * size.num_mid_edges
        for i, (w_to, s_to) in enumerate(patterns):
            loc = _local_indices(size, size.vertex(i))
            image[loc["W"]] = loc[w_to]
            image[loc["S"]] = loc[s_to]
        return cls(size, tuple(image))

    def patterns(self) -> List[Tuple[str, str]]:
        return [self.pattern(v) for v in _vertices(self.size)]


class PureSnakeConfig(GenSnakeConfig):
    def __post_init__(self):
        super().__post_init__()
        bad = self.crossings()
        if bad:
            raise ValueError(f"pure snake has a crossing at {bad[0]}")


def _vertices(size: TorusSize):
    return (size.vertex(i) for i in range(size.num_vertices))


def phi(cfg: SixVertexConfig) -> PureSnakeConfig:
    """The six-vertex configuration as a crossing-free snake."""
    pats = [PATTERN_OF_TYPE[vertex_type(cfg, v)] for v in _vertices(cfg.size)]
    return PureSnakeConfig.from_patterns(cfg.size, pats)


def phi_inverse(snake: GenSnakeConfig) -> SixVertexConfig:
    size = snake.size
    m = size.num_vertices
    horiz: List[Optional[bool]] = [None] * m
    vert: List[Optional[bool]] = [None] * m
    for v in _vertices(size):
        pat = snake.pattern(v)
        if pat == CROSSING:
            raise ValueError(f"snake has a crossing at {v}; not in the image of phi")
        west, _, south, _ = ARROWS_OF_TYPE[_TYPE_OF_PATTERN[pat]]
        # each edge is the west (or south) edge of exactly one vertex
        horiz[size.vertex_index(Vertex(v.v1 - 1, v.v2))] = west
        vert[size.vertex_index(Vertex(v.v1, v.v2 - 1))] = south
    cfg = SixVertexConfig(size, tuple(horiz), tuple(vert))
    if phi(cfg).image != snake.image:
        raise ValueError("snake does not correspond to an ice configuration")
    return cfg


def sh(g: GenSnakeConfig) -> PureSnakeConfig:
    """Uncross every crossing: (W->E, S->N) becomes (W->N, S->E)."""
    pats = [PATTERN_OF_TYPE[2] if p == CROSSING else p for p in g.patterns()]
    return PureSnakeConfig.from_patterns(g.size, pats)


def crossable_vertices(p: GenSnakeConfig) -> List[int]:
    return crossable_vertices_of(p.patterns())


def fiber(p: PureSnakeConfig) -> Iterator[GenSnakeConfig]:
    """All generalised snakes whose shape is ``p``, one per subset of type-2 vertices."""
    base = p.patterns()
    sites = crossable_vertices(p)
    for chosen in itertools.product((False, True), repeat=len(sites)):
        pats = list(base)
        for i, cross in zip(sites, chosen):
            if cross:
                pats[i] = CROSSING
        yield GenSnakeConfig.from_patterns(p.size, pats)


def counts(g: GenSnakeConfig) -> SnakeCounts:
    a = b = c = s = 0
    for w_to, s_to in g.patterns():
        if w_to == "E":
            a += 1
        elif w_to == "N":
            c += 1
        if s_to == "N":
            b += 1
        elif s_to == "E":
            c += 1
        if (w_to, s_to) == CROSSING:
            s += 1
    return SnakeCounts(a, b, c, s)


def perm_sign(g: GenSnakeConfig) -> int:
    """Sign of the permutation, by cycle decomposition."""
    return cycle_sign(g.image)


def cycle_sign(image: Sequence[int]) -> int:
    seen = np.zeros(len(image), dtype=bool)
    parity = 0
    for start in range(len(image)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = image[j]
            length += 1
        parity += length + 1
    return -1 if parity % 2 else 1


def inversion_sign(image: Sequence[int]) -> int:
    """Quadratic inversion count; test oracle for ``cycle_sign``."""
    inv = sum(1 for i in range(len(image)) for j in range(i + 1, len(image)) if image[i] > image[j])
    return -1 if inv % 2 else 1


def signed_weight(g: GenSnakeConfig, p: FreeFermionParams) -> float:
    a, b, c, s = counts(g)
    return (-1.0) ** s * p.alpha**a * p.beta**b * p.gamma**c


def signed_weight_exact(g: GenSnakeConfig, p: FreeFermionParams) -> Fraction:
    """``signed_weight`` in exact rational arithmetic on the binary values of the parameters."""
    a, b, c, s = counts(g)
    alpha, beta, gamma = (Fraction(x) for x in p.as_tuple())
    return (-1) ** s * alpha**a * beta**b * gamma**c


def pure_weight(snake: PureSnakeConfig, p: FreeFermionParams) -> float:
    """Fiber sum of signed weights.

    Crossed and uncrossed fiber members cancel heavily when ``gamma^2`` is
    close to ``alpha * beta``, so the sum is taken exactly and rounded once.
    """
    return float(sum((signed_weight_exact(g, p) for g in fiber(snake)), Fraction(0)))


def all_generalised_snakes(size: TorusSize) -> Iterator[GenSnakeConfig]:
    """Every generalised snake, grouped by shape (enumeration-sized tori only)."""
    for cfg in enumerate_configs(size):
        yield from fiber(phi(cfg))


def random_generalised_snake(size: TorusSize, rng: np.random.Generator) -> GenSnakeConfig:
    """A uniformly chosen ice configuration with a uniformly chosen crossing subset."""
    masks, _ = _ice_table(size.n)
    cfg = _config_from_mask(size, int(masks[rng.integers(count_configs(size))]))
    pats = phi(cfg).patterns()
    for i in crossable_vertices_of(pats):
        if rng.random() < 0.5:
            pats[i] = CROSSING
    return GenSnakeConfig.from_patterns(size, pats)


def crossable_vertices_of(patterns: Sequence[Tuple[str, str]]) -> List[int]:
    return [i for i, pat in enumerate(patterns) if pat == PATTERN_OF_TYPE[2]]
