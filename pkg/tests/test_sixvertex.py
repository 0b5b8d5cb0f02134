import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import params
from icekernel.lattice import TorusSize, Vertex
from icekernel.sixvertex import (
    ARROWS_OF_TYPE,
    EnumerationTooLarge,
    FreeFermionParams,
    IceRuleError,
    SixVertexConfig,
    SixVertexWeights,
    anisotropy,
    config_weight,
    count_configs,
    enumerate_configs,
    event_probability_enumerate,
    partition_enumerate,
    vertex_type,
    weights_from_params,
)

# arrows of a 4x4 torus configuration, '+' pointing along +e1 / +e2, vertex i = (i % 4, i // 4)
FIG_HORIZ = "- + + + + - - - - - - + + + + -".split()
FIG_VERT = "+ - - + - + - + + + - - - + - +".split()


def figure_config():
    return SixVertexConfig.from_arrays(4, [c == "+" for c in FIG_HORIZ], [c == "+" for c in FIG_VERT])


def test_type_table_matches_picture_order():
    # (W, E, S, N), True meaning the arrow points in the positive direction
    assert ARROWS_OF_TYPE == {
        1: (True, True, True, True),
        2: (False, False, False, False),
        3: (True, True, False, False),
        4: (False, False, True, True),
        5: (True, False, False, True),
        6: (False, True, True, False),
    }
    for w, e, s, n in ARROWS_OF_TYPE.values():
        assert w + s == e + n


def test_params_validation():
    with pytest.raises(ValueError):
        FreeFermionParams(1, 1, 1)
    with pytest.raises(ValueError):
        FreeFermionParams(-0.1, 0.1, 0.5)
    with pytest.raises(ValueError):
        FreeFermionParams(0.1, 0.1, 0)
    with pytest.raises(ValueError):
        FreeFermionParams(math.nan, 0.1, 0.5)
    FreeFermionParams(0, 0, 0.5)


def test_weights_from_params():
    assert weights_from_params(FreeFermionParams(0.1, 0.1, 0.5)).as_tuple() == pytest.approx(
        (1, 0.24, 0.1, 0.1, 0.5, 0.5), abs=1e-15
    )
    assert weights_from_params(FreeFermionParams(0, 0, 0.5)).as_tuple() == (1, 0.25, 0, 0, 0.5, 0.5)


def test_anisotropy():
    assert anisotropy(weights_from_params(FreeFermionParams(0.1, 0.1, 0.5))) == pytest.approx(0, abs=1e-15)
    assert anisotropy(weights_from_params(FreeFermionParams(0.3, 0.4, 0.8))) == pytest.approx(0, abs=1e-15)
    assert anisotropy(SixVertexWeights(1, 1, 1, 1, 1, 1)) == 0.5
    with pytest.raises(ValueError):
        anisotropy(weights_from_params(FreeFermionParams(0, 0.1, 0.5)))


@given(params(max_ab=2.0))
def test_free_fermion_anisotropy_vanishes(p):
    if p.alpha > 1e-6 and p.beta > 1e-6:
        assert abs(anisotropy(weights_from_params(p))) < 1e-9


def test_uniform_configs():
    assert set(SixVertexConfig.uniform(3, True).types()) == {1}
    assert set(SixVertexConfig.uniform(3, False).types()) == {2}


def test_ice_violation_reported():
    cfg = SixVertexConfig.from_arrays(2, [True, False, True, True], [True] * 4)
    assert not cfg.satisfies_ice_rule()
    with pytest.raises(IceRuleError):
        cfg.types()


def test_figure_configuration():
    cfg = figure_config()
    assert cfg.satisfies_ice_rule()
    assert cfg.types() == (5, 6, 3, 1, 6, 5, 2, 4, 5, 4, 2, 6, 6, 1, 3, 5)
    # two each of types 1-4, four each of 5 and 6
    assert config_weight(cfg, weights_from_params(FreeFermionParams(0.1, 0.1, 0.5))) == pytest.approx(
        0.24**2 * 0.1**2 * 0.1**2 * 0.5**8, rel=1e-14
    )


def test_config_weight_examples():
    w = weights_from_params(FreeFermionParams(0.1, 0.1, 0.5))
    assert config_weight(SixVertexConfig.uniform(2, True), w) == 1
    assert config_weight(SixVertexConfig.uniform(2, False), w) == pytest.approx(0.00331776, rel=1e-14)


def test_counts_regression():
    assert count_configs(2) == 18
    assert count_configs(3) == 148
    assert partition_enumerate(2, SixVertexWeights(1, 1, 1, 1, 1, 1)) == 18
    with pytest.raises(EnumerationTooLarge):
        count_configs(4)


@pytest.mark.parametrize("n", [2, 3])
def test_enumeration_properties(n):
    configs = list(enumerate_configs(n))
    assert len(set(configs)) == len(configs)
    for cfg in configs:
        assert cfg.satisfies_ice_rule()
        types = cfg.types()
        assert types.count(5) == types.count(6)
        rev = cfg.reversed()
        assert rev.types() == tuple({1: 2, 2: 1, 3: 4, 4: 3, 5: 6, 6: 5}[t] for t in types)
        assert rev.reversed() == cfg


def test_partition_regression():
    p = FreeFermionParams(0.1, 0.1, 0.5)
    assert partition_enumerate(2, weights_from_params(p)) == pytest.approx(1.18042176, rel=1e-14)
    assert partition_enumerate(3, weights_from_params(p)) == pytest.approx(1.0658014973533962, rel=1e-14)
    assert partition_enumerate(3, weights_from_params(FreeFermionParams(0.3, 0.4, 0.8))) == pytest.approx(
        3.7280059746019085, rel=1e-14
    )


@given(params(), st.floats(0.2, 5.0))
def test_c1_c2_enter_only_through_product(p, s):
    w = weights_from_params(p)
    scaled = SixVertexWeights(w.a1, w.a2, w.b1, w.b2, w.c1 * s, w.c2 / s)
    for cfg in enumerate_configs(2):
        assert config_weight(cfg, scaled) == pytest.approx(config_weight(cfg, w), rel=1e-12)


@given(params())
def test_partition_symmetric_in_alpha_beta(p):
    q = FreeFermionParams(p.beta, p.alpha, p.gamma)
    for n in (2, 3):
        assert partition_enumerate(n, weights_from_params(p)) == pytest.approx(
            partition_enumerate(n, weights_from_params(q)), rel=1e-12
        )


@given(st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_partition_increases_with_c1_c2(c, d):
    lo, hi = sorted((c, d))
    if hi - lo < 1e-3:
        return
    z = lambda cc: partition_enumerate(2, SixVertexWeights(1, 1, 1, 1, cc, cc))  # noqa: E731
    assert z(hi) > z(lo)


def test_event_probabilities():
    w = weights_from_params(FreeFermionParams(0.1, 0.1, 0.5))
    assert event_probability_enumerate(3, w, []) == 1
    total = math.fsum(event_probability_enumerate(3, w, [(Vertex(1, 2), t)]) for t in range(1, 7))
    assert total == pytest.approx(1, abs=1e-15)
    assert event_probability_enumerate(3, w, [(Vertex(0, 0), 1)]) == pytest.approx(0.9603435896061779, rel=1e-14)
    with pytest.raises(ValueError):
        event_probability_enumerate(3, w, [(Vertex(0, 0), 1), (Vertex(3, 0), 2)])
    with pytest.raises(ValueError):
        event_probability_enumerate(3, w, [(Vertex(0, 0), 7)])


def test_vertex_type_of_single_vertex():
    cfg = figure_config()
    assert vertex_type(cfg, Vertex(2, 1)) == 2
    assert vertex_type(cfg, Vertex(6, 5)) == 2  # wraps
    assert np.array_equal(np.array(cfg.types()).reshape(4, 4)[0], [5, 6, 3, 1])
    assert TorusSize(4).num_vertices == len(cfg.horiz)
