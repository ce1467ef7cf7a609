import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_measure, f_naive
from pottstree.freetree import build_ball
from pottstree.model import (
    Atom,
    ConstantField,
    DuplicatedRootField,
    GbcAssignment,
    IidDiscreteField,
    IidUniformField,
    ModelParams,
    PerVertexField,
    check_marginal_consistency,
    compatibility_residual,
    exact_ball_measure,
    expand_vector,
    f_jacobian,
    f_map,
    field_from_json,
    pm_one_coordinates,
    realize_field,
    reduce_vector,
    solve_inward,
)


@settings(max_examples=200)
@given(st.lists(st.floats(-8, 8), min_size=1, max_size=5), st.floats(1.0, 50.0))
def test_f_matches_defining_ratio(u, theta):
    got = f_map(np.array(u), theta)
    np.testing.assert_allclose(got, f_naive(u, theta), rtol=1e-12, atol=1e-12)


def test_f_is_stable_for_huge_arguments():
    out = f_map(np.array([800.0, -800.0]), 5.0)
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(math.log(5.0))
    # both sums are dominated by exp(800), so the second ratio tends to 1
    assert out[1] == pytest.approx(0.0, abs=1e-12)
    out = f_map(np.array([-800.0, -800.0]), 5.0)
    np.testing.assert_allclose(out, [-math.log(5.0)] * 2)


@pytest.mark.parametrize("q1", [1, 2, 4])
def test_jacobian_matches_finite_differences(q1):
    rng = np.random.default_rng(q1)
    u = rng.normal(size=q1) * 2
    theta = 3.7
    jac = f_jacobian(u, theta)
    eps = 1e-6
    for j in range(q1):
        e = np.zeros(q1)
        e[j] = eps
        fd = (f_map(u + e, theta) - f_map(u - e, theta)) / (2 * eps)
        np.testing.assert_allclose(jac[:, j], fd, atol=1e-8)


def test_f_bounded_by_log_theta():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(1000, 3)) * 20
    assert np.all(np.abs(f_map(u, 4.0)) <= math.log(4.0) + 1e-12)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6), st.floats(-3, 3))
def test_reduction_ignores_constant_shifts(v, c):
    v = np.array(v)
    np.testing.assert_allclose(reduce_vector(v + c), reduce_vector(v), atol=1e-12)
    np.testing.assert_allclose(reduce_vector(expand_vector(reduce_vector(v))), reduce_vector(v), atol=1e-12)


def test_free_measure_k2_q2_n1():
    # zero field and zero boundary: Z = 2 (theta + 1)^3, all-equal weight theta^3
    params = ModelParams(2, 2, 2.0)
    ball = build_ball(2, 1)
    gbc = GbcAssignment(ball, np.zeros((ball.size, 1)))
    m = exact_ball_measure(params, np.zeros((ball.size, 1)), gbc)
    assert m.probs[(0,) * 4] == pytest.approx(4 / 27, rel=1e-14)
    assert m.probs.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("k,q,n", [(2, 2, 2), (2, 3, 1), (3, 2, 1)])
def test_exact_measure_matches_brute_force(k, q, n):
    rng = np.random.default_rng(k * 100 + q * 10 + n)
    ball = build_ball(k, n)
    theta = 2.3
    xi = rng.normal(size=(ball.size, q - 1))
    h = rng.normal(size=(ball.size, q - 1))
    m = exact_ball_measure(ModelParams(k, q, theta), xi, GbcAssignment(ball, h))
    words = [w.letters for w in ball.words()]
    xf = expand_vector(xi)
    hf = expand_vector(h)
    verts, table = brute_force_measure(k, q, theta, n, {w: xf[i] for i, w in enumerate(words)},
                                       {w: hf[i] for i, w in enumerate(words)})
    assert verts == words
    for sigma, p in table.items():
        assert m.probs[sigma] == pytest.approx(p, rel=1e-11, abs=1e-15)


@pytest.mark.parametrize("k,q,n", [(2, 2, 2), (2, 3, 1), (3, 2, 1)])
def test_solve_inward_is_compatible_and_consistent(k, q, n):
    rng = np.random.default_rng(5)
    ball = build_ball(k, n + 1)
    xi = rng.normal(size=(ball.size, q - 1))
    gbc = solve_inward(ball, xi, 2.5, rng.normal(size=(len(ball.leaves), q - 1)))
    assert compatibility_residual(gbc, xi, 2.5).max_residual < 1e-13
    rep = check_marginal_consistency(ModelParams(k, q, 2.5), xi, gbc, n)
    assert rep.compatible and rep.consistent and rep.tv < 1e-12


def test_perturbed_field_is_detected():
    rng = np.random.default_rng(9)
    ball = build_ball(2, 2)
    xi = rng.normal(size=(ball.size, 2))
    gbc = solve_inward(ball, xi, 3.0, rng.normal(size=(len(ball.leaves), 2)))
    h = gbc.h.copy()
    h[ball.sphere(1).start] += 0.05
    rep = check_marginal_consistency(ModelParams(2, 3, 3.0), xi, GbcAssignment(ball, h), 1)
    assert not rep.compatible and not rep.consistent and rep.agrees
    assert rep.tv > 1e-6


def test_consistency_needs_bigger_ball():
    ball = build_ball(2, 1)
    gbc = GbcAssignment(ball, np.zeros((ball.size, 1)))
    with pytest.raises(ValueError):
        check_marginal_consistency(ModelParams(2, 2, 2.0), np.zeros((ball.size, 1)), gbc, 1)


def test_state_limit():
    ball = build_ball(2, 3)
    gbc = GbcAssignment(ball, np.zeros((ball.size, 2)))
    with pytest.raises(Exception, match="exceeds"):
        exact_ball_measure(ModelParams(2, 3, 2.0), np.zeros((ball.size, 2)), gbc, state_limit=1000)


def test_field_realization_is_prefix_consistent_and_seeded():
    spec = pm_one_coordinates(3)
    small, big = build_ball(2, 3), build_ball(2, 6)
    a = realize_field(spec, small, 3, seed=4)
    b = realize_field(spec, big, 3, seed=4)
    np.testing.assert_array_equal(a, b[:small.size])
    np.testing.assert_array_equal(b, realize_field(spec, big, 3, seed=4))
    assert not np.array_equal(b, realize_field(spec, big, 3, seed=5))
    u = realize_field(IidUniformField(), big, 3, seed=1)
    assert u.shape == (big.size, 2) and np.all(np.abs(u) <= 1)


def test_duplicated_root_is_constant():
    spec = DuplicatedRootField(tuple(pm_one_coordinates(3).atoms))
    xi = realize_field(spec, build_ball(2, 4), 3, seed=2)
    assert np.all(xi == xi[0])


def test_field_json_roundtrip():
    specs = [ConstantField((0.5, 0.0)), pm_one_coordinates(2), IidUniformField(),
             DuplicatedRootField((Atom((1.0, 0.0), 1.0),)), PerVertexField({"e": (1.0,)})]
    for s in specs:
        assert field_from_json(s.to_json()) == s


def test_bad_atoms_rejected():
    with pytest.raises(ValueError):
        IidDiscreteField((Atom((1.0, 0.0), 0.3),))
    with pytest.raises(ValueError):
        field_from_json({"type": "nope"})


def test_per_vertex_field_must_cover_ball():
    with pytest.raises(ValueError, match="missing"):
        realize_field(PerVertexField({"e": (1.0,)}), build_ball(2, 1), 2)
