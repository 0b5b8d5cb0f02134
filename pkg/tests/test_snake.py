import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import params
from icekernel.lattice import MidEdge, TorusSize, Vertex, incident_mid_edges
from icekernel.sixvertex import (
    FreeFermionParams,
    SixVertexConfig,
    config_weight,
    enumerate_configs,
    partition_enumerate,
    weights_from_params,
)
from icekernel.snake import (
    CROSSING,
    PATTERN_OF_TYPE,
    GenSnakeConfig,
    PureSnakeConfig,
    all_generalised_snakes,
    counts,
    cycle_sign,
    fiber,
    inversion_sign,
    perm_sign,
    phi,
    phi_inverse,
    pure_weight,
    random_generalised_snake,
    sh,
    signed_weight,
)

T2 = TorusSize(2)
T4 = TorusSize(4)

# path systems on the 4x4 torus: (start, steps) in doubled coordinates
FIG_PURE_PATHS = [
    ((0, -1), [(1, 1)] * 7),
    ((-1, 6), [(1, 1)]),
    ((-1, 2), [(1, 1), (1, 1), (2, 0), (1, 1), (0, 2)]),
    ((4, -1), [(0, 2), (1, 1), (2, 0)]),
]
FIG_CROSSED_PATHS = [
    ((0, -1), [(1, 1)] * 3 + [(2, 0)] * 2),
    ((-1, 6), [(1, 1)]),
    ((-1, 2), [(1, 1), (1, 1), (2, 0), (2, 0), (1, 1), (1, 1)]),
    ((4, -1), [(0, 2)] * 4),
]


def snake_from_paths(size, paths):
    image = list(range(size.num_mid_edges))
    for (d1, d2), steps in paths:
        for s1, s2 in steps:
            src = MidEdge(d1, d2)
            d1, d2 = d1 + s1, d2 + s2
            image[size.index(src)] = size.index(MidEdge(d1, d2))
    return GenSnakeConfig(size, tuple(image))


def figure_config():
    horiz = "- + + + + - - - - - - + + + + -".split()
    vert = "+ - - + - + - + + + - - - + - +".split()
    return SixVertexConfig.from_arrays(T4, [c == "+" for c in horiz], [c == "+" for c in vert])


def all_type2():
    return phi(SixVertexConfig.uniform(T2, False))


def fully_crossed():
    return GenSnakeConfig.from_patterns(T2, [CROSSING] * 4)


def test_identity_snake():
    ident = phi(SixVertexConfig.uniform(T2, True))
    assert ident.image == tuple(range(8))
    assert counts(ident) == (0, 0, 0, 0)
    assert perm_sign(ident) == 1
    assert signed_weight(ident, FreeFermionParams(0.1, 0.1, 0.5)) == 1
    assert pure_weight(ident, FreeFermionParams(0.1, 0.1, 0.5)) == 1
    assert phi_inverse(ident) == SixVertexConfig.uniform(T2, True)


def test_all_type2_snake():
    snake = all_type2()
    for i in range(4):
        v = T2.vertex(i)
        w, s, e, n = incident_mid_edges(v, T2)
        assert snake.image[T2.index(w)] == T2.index(n)
        assert snake.image[T2.index(s)] == T2.index(e)
    assert counts(snake) == (0, 0, 8, 0)
    assert perm_sign(snake) == inversion_sign(snake.image)
    p = FreeFermionParams(0.1, 0.1, 0.5)
    assert signed_weight(snake, p) == pytest.approx(0.5**8, rel=1e-15)
    assert pure_weight(snake, p) == pytest.approx(0.24**4, rel=1e-15)


def test_fully_crossed_fiber_element():
    g = fully_crossed()
    assert counts(g) == (4, 4, 0, 4)
    assert signed_weight(g, FreeFermionParams(0.1, 0.1, 0.5)) == pytest.approx(1e-8, rel=1e-12)
    assert not g.is_pure
    with pytest.raises(ValueError):
        PureSnakeConfig(T2, g.image)
    with pytest.raises(ValueError):
        phi_inverse(g)


def test_fiber_sizes():
    assert len(list(fiber(all_type2()))) == 16
    ident = phi(SixVertexConfig.uniform(T2, True))
    assert list(fiber(ident)) == [ident]


def test_sh():
    g = fully_crossed()
    assert sh(g) == all_type2()
    single = GenSnakeConfig.from_patterns(T2, [CROSSING] + [PATTERN_OF_TYPE[2]] * 3)
    assert sh(single) == all_type2()
    for cfg in enumerate_configs(2):
        p = phi(cfg)
        assert sh(p) == p
        for g in fiber(p):
            assert sh(g) == p
            assert sh(sh(g)) == sh(g)


def test_illegal_images_rejected():
    with pytest.raises(ValueError):
        GenSnakeConfig(T2, (0, 0, 1, 2, 3, 4, 5, 6))
    # swapping two far mid-edges is a permutation but not a snake
    image = list(range(8))
    image[0], image[5] = image[5], image[0]
    with pytest.raises(ValueError):
        GenSnakeConfig(T2, tuple(image))


@pytest.mark.parametrize("n", [2, 3])
def test_phi_bijection(n):
    images = set()
    for cfg in enumerate_configs(n):
        snake = phi(cfg)
        assert snake.is_pure
        assert phi_inverse(snake) == cfg
        images.add(snake.image)
    assert len(images) == len(list(enumerate_configs(n)))


@given(params())
def test_pushforward_on_t2(p):
    w = weights_from_params(p)
    for cfg in enumerate_configs(2):
        assert pure_weight(phi(cfg), p) == pytest.approx(config_weight(cfg, w), rel=1e-12, abs=1e-300)


@given(params())
def test_generalised_snakes_sum_to_partition(p):
    total = math.fsum(signed_weight(g, p) for g in all_generalised_snakes(T2))
    assert total == pytest.approx(partition_enumerate(2, weights_from_params(p)), rel=1e-12)


@given(st.permutations(range(9)))
def test_cycle_sign_matches_inversions(perm):
    assert cycle_sign(perm) == inversion_sign(perm)


def test_cycle_sign_transposition():
    assert cycle_sign([1, 0, 2]) == -1
    assert cycle_sign([1, 2, 0]) == 1


def test_random_snakes_are_valid(rng):
    size = TorusSize(3)
    seen_crossing = False
    for _ in range(200):
        g = random_generalised_snake(size, rng)
        sh_g = sh(g)
        assert sh_g.is_pure
        assert len(g.crossings()) == counts(g).S
        seen_crossing |= bool(g.crossings())
    assert seen_crossing


def test_crossings_only_at_type2_sites():
    for cfg in enumerate_configs(2):
        types = cfg.types()
        p = phi(cfg)
        for g in fiber(p):
            for v in g.crossings():
                assert types[T2.vertex_index(v)] == 2


def test_patterns_round_trip():
    for pats in itertools.islice(itertools.product(list(PATTERN_OF_TYPE.values()), repeat=4), 0, None, 97):
        try:
            g = GenSnakeConfig.from_patterns(T2, list(pats))
        except ValueError:
            continue
        assert g.patterns() == list(pats)
    assert np.all(np.sort(all_type2().image) == np.arange(8))
    assert Vertex(0, 0) not in all_type2().crossings()


def test_figure_configuration_path_system():
    snake = phi(figure_config())
    assert snake == snake_from_paths(T4, FIG_PURE_PATHS)
    assert counts(snake) == (2, 2, 12, 0)
    assert phi_inverse(snake) == figure_config()


def test_figure_uncrossing():
    crossed = snake_from_paths(T4, FIG_CROSSED_PATHS)
    assert sorted(crossed.crossings()) == [Vertex(2, 1), Vertex(2, 2)]
    assert counts(crossed).S == 2
    assert sh(crossed) == snake_from_paths(T4, FIG_PURE_PATHS)
    assert crossed in list(fiber(sh(crossed)))
