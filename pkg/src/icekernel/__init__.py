"""Exact and numerical tools for the free-fermion six-vertex model.

Finite tori are handled by enumeration and by Kasteleyn determinants;
the infinite plane by contour-integral kernels evaluated as Fourier
coefficients of ``1 / Delta``.
"""

from .lattice import Color, HalfStep, MidEdge, TorusSize, Vertex
from .sixvertex import FreeFermionParams, SixVertexConfig, SixVertexWeights, weights_from_params
from .kasteleyn import partition_kasteleyn, vertex_event_finite
from .kernel import QuadratureConfig, correlation, frequencies, frequency, kernel_L, phi_coeff

__all__ = [
    "Color",
    "FreeFermionParams",
    "HalfStep",
    "MidEdge",
    "QuadratureConfig",
    "SixVertexConfig",
    "SixVertexWeights",
    "TorusSize",
    "Vertex",
    "correlation",
    "frequencies",
    "frequency",
    "kernel_L",
    "partition_kasteleyn",
    "phi_coeff",
    "vertex_event_finite",
    "weights_from_params",
]

__version__ = "0.1.0"
