import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import params
from icekernel.kasteleyn import (
    THETAS,
    build_K,
    c_theta,
    corr_finite,
    corr_finite_detailed,
    det_K,
    det_K_spectral,
    k_inverse_dense,
    k_inverse_entry,
    kasteleyn_sign_sum,
    log_partition_kasteleyn,
    partition_kasteleyn,
    vertex_event_finite,
    vertex_event_pairs,
)
from icekernel.lattice import MidEdge, TorusSize, Vertex, incident_mid_edges, mid_edges, vertices
from icekernel.sixvertex import FreeFermionParams, event_probability_enumerate, partition_enumerate, weights_from_params
from icekernel.snake import all_generalised_snakes, counts, perm_sign

P = FreeFermionParams(0.3, 0.4, 0.8)


def test_c_theta_values():
    assert c_theta(2, (0, 0)) == Fraction(-1, 2)
    assert c_theta(2, (1, 1)) == Fraction(1, 2)
    assert c_theta(3, (0, 0)) == Fraction(1, 2)
    with pytest.raises(ValueError):
        c_theta(2, (2, 0))


def test_identity_operator():
    # gamma -> 0 with alpha = beta = 0 leaves K = I
    op = build_K(3, (0, 0), FreeFermionParams(0, 0, 1e-12))
    assert np.max(np.abs(op.entries - np.eye(18))) <= 1e-12
    assert det_K(op).value() == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("theta", THETAS)
def test_lu_and_spectral_determinants_agree(n, theta):
    lu = det_K(build_K(n, theta, P))
    sp = det_K_spectral(n, theta, P)
    assert lu.value() == pytest.approx(sp.value(), rel=1e-12)


def test_operator_structure():
    op = build_K(3, (1, 0), P)
    K = op.entries
    # identity plus exactly two off-diagonal steps per row
    assert np.allclose(np.diag(K), 1)
    assert all(np.count_nonzero(row) == 3 for row in K)


def test_partition_regression():
    assert partition_kasteleyn(2, FreeFermionParams(0.1, 0.1, 0.5)) == pytest.approx(1.18042176, rel=1e-13)
    assert partition_kasteleyn(3, P) == pytest.approx(3.7280059746019085, rel=1e-13)
    assert partition_kasteleyn(2, FreeFermionParams(0, 0, 0.5)) == pytest.approx(1.12890625, rel=1e-13)


@given(params())
def test_partition_matches_enumeration(p):
    for n in (2, 3):
        assert partition_kasteleyn(n, p) == pytest.approx(partition_enumerate(n, weights_from_params(p)), rel=1e-10)


def test_log_partition_large_torus_is_finite():
    assert math.isfinite(log_partition_kasteleyn(16, P))


def test_sign_lemma_exhaustive_on_t2():
    for g in all_generalised_snakes(TorusSize(2)):
        a, b, c, s = counts(g)
        rhs = kasteleyn_sign_sum(2, a, b, c)
        assert abs(rhs - perm_sign(g) * (-1) ** s) < 1e-12


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("theta", THETAS)
def test_fourier_inverse_matches_dense_inverse(n, theta):
    K = build_K(n, theta, P).entries
    inv = k_inverse_dense(n, theta, P)
    assert np.max(np.abs(inv - np.linalg.inv(K))) < 1e-11
    x, y = MidEdge(1, 0), MidEdge(2, 1)
    size = TorusSize(n)
    assert k_inverse_entry(n, theta, P, x, y) == pytest.approx(inv[size.index(x), size.index(y)], abs=1e-14)


def test_corr_finite_examples():
    assert corr_finite(3, P, []) == 1
    v = Vertex(1, 1)
    w, s, _, _ = incident_mid_edges(v, 3)
    value = corr_finite(3, P, [(w, w), (s, s)])
    assert value == pytest.approx(event_probability_enumerate(3, weights_from_params(P), [(v, 1)]), abs=1e-9)
    with pytest.raises(ValueError):
        corr_finite(3, P, [(MidEdge(1, 0), MidEdge(5, 0))])


def test_corr_finite_is_real_and_bounded():
    for v in vertices(3):
        for t in range(1, 7):
            res = corr_finite_detailed(3, P, vertex_event_pairs([(v, t)], 3)[0])
            assert res.imag_residue < 1e-10
            assert -1e-10 <= res.value <= 1 + 1e-10


@given(st.integers(0, 2), st.integers(0, 2), st.integers(1, 6))
def test_corr_finite_translation_covariant(u1, u2, t):
    base = vertex_event_pairs([(Vertex(0, 0), t)], 3)[0]
    shifted = [
        (MidEdge(x.d1 + 2 * u1, x.d2 + 2 * u2), MidEdge(y.d1 + 2 * u1, y.d2 + 2 * u2)) for x, y in base
    ]
    assert corr_finite(3, P, shifted) == pytest.approx(corr_finite(3, P, base), abs=1e-10)


def test_type2_has_two_realisations():
    assert len(vertex_event_pairs([(Vertex(0, 0), 2)])) == 2
    assert len(vertex_event_pairs([(Vertex(0, 0), 2), (Vertex(1, 0), 2)])) == 4
    assert len(vertex_event_pairs([(Vertex(0, 0), 5)])) == 1
    with pytest.raises(ValueError):
        vertex_event_pairs([(Vertex(0, 0), 1), (Vertex(3, 0), 1)], 3)


@pytest.mark.parametrize("n", [2, 3])
def test_vertex_events_match_enumeration(n, rng):
    w = weights_from_params(P)
    for v in vertices(n):
        total = 0.0
        for t in range(1, 7):
            got = vertex_event_finite(n, P, [(v, t)])
            assert got == pytest.approx(event_probability_enumerate(n, w, [(v, t)]), abs=1e-9)
            total += got
        assert total == pytest.approx(1, abs=1e-9)
    verts = vertices(n)
    for _ in range(20):
        i, j = rng.choice(len(verts), size=2, replace=False)
        cons = [(verts[i], int(rng.integers(1, 7))), (verts[j], int(rng.integers(1, 7)))]
        assert vertex_event_finite(n, P, cons) == pytest.approx(event_probability_enumerate(n, w, cons), abs=1e-9)


def test_frozen_point_on_torus():
    p = FreeFermionParams(0, 0, 0.5)
    # only all-type-1 and type-2 loops survive; check against enumeration
    assert vertex_event_finite(3, p, [(Vertex(0, 0), 1)]) == pytest.approx(
        event_probability_enumerate(3, weights_from_params(p), [(Vertex(0, 0), 1)]), abs=1e-12
    )
    assert len(mid_edges(3)) == 18


def test_thread_count_does_not_change_results(monkeypatch):
    from icekernel import kasteleyn

    p = FreeFermionParams(0.25, 0.35, 0.75)
    values = []
    for threads in ("1", "3"):
        monkeypatch.setenv("ICEKERNEL_THREADS", threads)
        assert kasteleyn._workers() == int(threads)
        kasteleyn._finite_torus.cache_clear()
        values.append((partition_kasteleyn(6, p), vertex_event_finite(6, p, [(Vertex(0, 0), 2)])))
    assert values[0][0] == pytest.approx(values[1][0], rel=1e-13)
    assert values[0][1] == pytest.approx(values[1][1], abs=1e-13)
