"""Torus and square-lattice geometry: vertices, mid-edges, colours and half steps.

Mid-edges sit at half-integer points, so every coordinate is stored doubled:
the mid-edge at ``(1/2, 0)`` is ``MidEdge(1, 0)``.  Exactly one doubled
coordinate is odd.  On the torus of side ``n`` doubled coordinates live in
``Z / 2n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple, Union


class Color(enum.Enum):
    BLACK = "B"  # midpoint of a horizontal edge
    WHITE = "W"  # midpoint of a vertical edge

    def other(self) -> "Color":
        return Color.WHITE if self is Color.BLACK else Color.BLACK


@dataclass(frozen=True)
class TorusSize:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int,)) or isinstance(self.n, bool):
            raise TypeError(f"torus size must be an int, got {self.n!r}")
        if self.n < 2:
            raise ValueError(f"torus size must be >= 2, got {self.n}")

    @property
    def num_vertices(self) -> int:
        return self.n * self.n

    @property
    def num_mid_edges(self) -> int:
        return 2 * self.n * self.n

    def index(self, x: "MidEdge") -> int:
        """Position of ``x`` in the canonical order (row-major by (d2, d1))."""
        x = x.wrap(self)
        return x.d2 * self.n + x.d1 // 2

    def mid_edge(self, i: int) -> "MidEdge":
        d2, r = divmod(i, self.n)
        d1 = 2 * r + (1 if d2 % 2 == 0 else 0)
        return MidEdge(d1, d2)

    def vertex_index(self, v: "Vertex") -> int:
        return (v.v1 % self.n) + self.n * (v.v2 % self.n)

    def vertex(self, i: int) -> "Vertex":
        v2, v1 = divmod(i, self.n)
        return Vertex(v1, v2)


SizeLike = Union[TorusSize, int]


def as_size(size: SizeLike) -> TorusSize:
    return size if isinstance(size, TorusSize) else TorusSize(size)


@dataclass(frozen=True, order=True)
class Vertex:
    v1: int
    v2: int

    def wrap(self, size: SizeLike) -> "Vertex":
        n = as_size(size).n
        return Vertex(self.v1 % n, self.v2 % n)

    def __add__(self, other: "Vertex") -> "Vertex":
        return Vertex(self.v1 + other.v1, self.v2 + other.v2)


@dataclass(frozen=True, order=True)
class MidEdge:
    d1: int
    d2: int

    def __post_init__(self):
        if (self.d1 + self.d2) % 2 != 1:
            raise ValueError(
                f"mid-edge needs exactly one odd doubled coordinate, got ({self.d1}, {self.d2})"
            )

    @classmethod
    def from_half(cls, x1, x2) -> "MidEdge":
        """Build from true coordinates, e.g. ``MidEdge.from_half(-0.5, 0)``."""
        d1, d2 = Fraction(x1) * 2, Fraction(x2) * 2
        if d1.denominator != 1 or d2.denominator != 1:
            raise ValueError(f"({x1}, {x2}) is not a half-integer point")
        return cls(int(d1), int(d2))

    @property
    def color(self) -> Color:
        return Color.BLACK if self.d1 % 2 else Color.WHITE

    @property
    def coords(self) -> Tuple[Fraction, Fraction]:
        return Fraction(self.d1, 2), Fraction(self.d2, 2)

    def wrap(self, size: SizeLike) -> "MidEdge":
        m = 2 * as_size(size).n
        return MidEdge(self.d1 % m, self.d2 % m)

    def __repr__(self):
        x1, x2 = self.coords
        return f"MidEdge({x1}, {x2})"


class HalfStep(enum.Enum):
    """Allowed snake steps in doubled coordinates."""

    ZERO = (0, 0)
    E1 = (2, 0)
    E2 = (0, 2)
    E3 = (1, 1)

    @property
    def flips_color(self) -> bool:
        return self is HalfStep.E3


def step(x: MidEdge, s: HalfStep, size: Optional[SizeLike] = None) -> MidEdge:
    y = MidEdge(x.d1 + s.value[0], x.d2 + s.value[1])
    return y.wrap(size) if size is not None else y


def displacement(x: MidEdge, y: MidEdge, size: Optional[SizeLike] = None) -> Optional[HalfStep]:
    """The step ``s`` with ``y == step(x, s)``, or None if there is none."""
    for s in HalfStep:
        if step(x, s, size) == (y.wrap(size) if size is not None else y):
            return s
    return None


def mid_edges(size: SizeLike) -> List[MidEdge]:
    """All ``2 n^2`` mid-edges of the torus in canonical order."""
    size = as_size(size)
    return [size.mid_edge(i) for i in range(size.num_mid_edges)]


def incident_mid_edges(v: Vertex, size: Optional[SizeLike] = None) -> Tuple[MidEdge, MidEdge, MidEdge, MidEdge]:
    """The (west, south, east, north) mid-edges of ``v``."""
    a, b = 2 * v.v1, 2 * v.v2
    quad = (MidEdge(a - 1, b), MidEdge(a, b - 1), MidEdge(a + 1, b), MidEdge(a, b + 1))
    if size is not None:
        quad = tuple(x.wrap(size) for x in quad)
    return quad


def vertices(size: SizeLike) -> List[Vertex]:
    size = as_size(size)
    return [size.vertex(i) for i in range(size.num_vertices)]
