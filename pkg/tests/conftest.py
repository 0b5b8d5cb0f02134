import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from icekernel.sixvertex import FreeFermionParams

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def params(draw, max_ab=1.0):
    """Valid free-fermion triples; gamma^2 - alpha*beta stays away from zero."""
    a = draw(st.floats(0.0, max_ab, allow_nan=False))
    b = draw(st.floats(0.0, max_ab, allow_nan=False))
    gap = draw(st.floats(0.05, 1.0))
    return FreeFermionParams(a, b, math.sqrt(a * b + gap))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
