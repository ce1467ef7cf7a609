import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottstree import homogeneous as hom
from pottstree.homogeneous import (
    DomainError,
    a_pm,
    alpha_m,
    alpha_pm,
    b_func,
    count_pair,
    count_total,
    count_zero_field,
    critical_constants,
    curves,
    k_func,
    k_profile,
    k_slope_sign,
    l_func,
    log_k_func,
    oracle_enumerate,
    p_k,
    pair_roots,
    pair_solution,
    q3_slope_polys,
    q3_chi,
    q3_t_star,
    scalar_roots,
    second_derivative_K1_at_1,
    solution_residual,
    theta_c,
    theta_m,
    theta_m0,
    theta_m_eliminated,
    tilde_theta_1,
    v_m,
)


def test_p_k_is_accurate_near_one():
    for k in (2, 3, 7):
        assert p_k(1.0, k) == k - 1
        v = 1 + 1e-9
        assert p_k(v, k) == pytest.approx(sum(v**i for i in range(1, k)), rel=1e-15)


def test_theta_c_examples():
    assert theta_c(2, 5) == pytest.approx(0.5 * (math.sqrt(153) - 3), abs=1e-12)
    assert theta_c(2, 2) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        alpha_pm(2, 5, 4.0)


@pytest.mark.parametrize("k,q", [(2, 2), (2, 3), (3, 4), (4, 6)])
def test_scalar_roots_solve_the_homogeneous_system(k, q):
    theta = theta_c(k, q) + 2.0
    am, ap = alpha_pm(k, q, theta)
    for alpha, expected in ((0.5 * (am + ap), 3), (ap + 0.2, 1), (am - 0.2, 1)):
        roots = scalar_roots(k, q, theta, alpha)
        assert len(roots) == expected == hom.count_scalar(k, q, theta, alpha)
        for u in roots:
            z = np.ones(q - 1)
            z[0] = u
            sol = hom.HomSolution(z, "scalar", u=u)
            assert solution_residual(sol, k, theta, alpha) < 1e-10


def test_a_product_identity():
    for k, q in ((2, 3), (3, 5), (5, 2)):
        for th in np.linspace(theta_c(k, q) + 0.01, theta_c(k, q) + 15, 20):
            am, ap = a_pm(k, q, th)
            assert am * ap == pytest.approx(b_func(th, q) ** (-(k + 1)), rel=1e-10)


def test_q2_antisymmetry_and_limits():
    for k in (2, 3, 4):
        for th in np.linspace(theta_c(k, 2) + 0.1, 40, 15):
            am, ap = alpha_pm(k, 2, th)
            assert am + ap == pytest.approx(0.0, abs=1e-10)
            assert ap > 0


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 5), st.integers(3, 7), st.floats(1.01, 30), st.floats(0.05, 20))
def test_pair_reflection_symmetry(k, q, theta, v):
    for m in range(1, q - 1):
        mc = q - 1 - m
        assert l_func(mc, v, theta, k, q) == pytest.approx(v**k * l_func(m, 1 / v, theta, k, q), rel=1e-10, abs=1e-10)
        try:
            a = k_func(mc, v, theta, k, q)
        except DomainError:
            continue
        assert a == pytest.approx(k_func(m, 1 / v, theta, k, q), rel=1e-10, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 5), st.integers(3, 6), st.floats(1.05, 30), st.floats(0.05, 20))
def test_slope_sign_matches_finite_difference(k, q, theta, v):
    m = 1
    if l_func(m, v, theta, k, q) <= 1e-3:
        return
    h = 1e-6 * v
    try:
        fd = (log_k_func(m, v + h, theta, k, q) - log_k_func(m, v - h, theta, k, q)) / (2 * h)
    except DomainError:
        return
    s = k_slope_sign(m, v, theta, k, q)
    if abs(fd) > 1e-5:
        assert np.sign(s) == np.sign(fd)


def test_v_m_maximises_l():
    assert v_m(2, 1, 5.0) == pytest.approx(2.0)
    for k in (2, 3, 5):
        vm = v_m(k, 2, 6.0)
        top = l_func(2, vm, 6.0, k, 5)
        for v in np.geomspace(0.01, 100, 400):
            assert l_func(2, v, 6.0, k, 5) <= top + 1e-12


def test_theta_m_examples_and_cross_check():
    assert theta_m(2, 5, 1) == pytest.approx(1 + 2 * math.sqrt(3), abs=1e-12)
    assert theta_m(2, 5, 2) == pytest.approx(5.0, abs=1e-12)
    for k in (2, 3, 4, 6):
        for q in (3, 4, 5, 7):
            for m in range(1, q - 1):
                assert theta_m(k, q, m) == pytest.approx(theta_m_eliminated(k, q, m), rel=1e-11)
                assert theta_m(k, q, m) == pytest.approx(theta_m(k, q, q - 1 - m), rel=1e-11)
    with pytest.raises(DomainError):
        theta_m(2, 5, 4)


def test_alpha_m_zero_at_theta_m0():
    for k, q in ((2, 3), (2, 5), (3, 4), (4, 7)):
        for m in range(1, (q - 1) // 2 + 1):
            t0 = theta_m0(k, q, m)
            assert abs(alpha_m(k, q, m, t0)) < 1e-9
            assert alpha_m(k, q, m, t0 * 0.999) < 0 < alpha_m(k, q, m, t0 * 1.001)


def test_alpha_m_diverges_at_theta_m():
    # the maximum of K_m tends to zero with the positivity window, so alpha_m -> -inf
    k, q, m = 2, 5, 1
    tm = theta_m(k, q, m)
    vals = [alpha_m(k, q, m, tm + eps) for eps in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert np.all(np.diff(vals) < 0)
    # log-type divergence: equal decrements per decade of eps, within a factor 2
    steps = -np.diff(vals)
    assert steps.max() < 2 * steps.min()
    with pytest.raises(DomainError):
        alpha_m(k, q, m, tm - 1e-3)


def test_constants_examples():
    cc = critical_constants(2, 5)
    assert cc.theta_0_plus == pytest.approx(6.0, abs=1e-12)
    assert cc.theta_m0[0] == pytest.approx(5.0, abs=1e-12)
    assert cc.theta_m0[1] == pytest.approx(1 + 2 * math.sqrt(6), abs=1e-12)
    q2 = critical_constants(2, 2)
    assert q2.theta_c == pytest.approx(3.0) and q2.theta_0_plus == pytest.approx(3.0)
    assert critical_constants(5, 3).theta_0_minus == pytest.approx(1.6966, abs=5e-4)
    assert critical_constants(5, 8).theta_0_minus == pytest.approx(2.1803, abs=5e-4)
    for k, ref in ((2, (1 + math.sqrt(41)) / 2), (3, 7 / 3), (4, (1 + math.sqrt(1081)) / 18)):
        assert tilde_theta_1(k) == pytest.approx(ref, abs=1e-12)


def test_alpha_plus_zero_at_theta0_plus():
    for k, q in ((2, 3), (2, 5), (3, 4)):
        th = 1 + q / (k - 1)
        assert abs(alpha_pm(k, q, th)[1]) < 1e-8
        assert abs(alpha_pm(k, q, theta_m0(k, q, 1))[0]) < 1e-8


def test_zero_field_counts():
    for q in (2, 3, 4, 5):
        assert count_zero_field(2, q, 20.0) == 2**q - 1
        assert count_zero_field(2, q, 1.05) == 1


def test_count_total_rejects_zero_field():
    with pytest.raises(DomainError):
        count_total(2, 3, 5.0, 0.0)


def test_pair_solutions_solve_the_system():
    k, q, theta, alpha = 2, 5, 6.9, -0.3
    for m in range(1, q - 1):
        pr = pair_roots(k, q, m, theta, alpha)
        for v in pr.roots:
            u, vv = pair_solution(k, q, m, theta, v)
            z = np.ones(q - 1)
            z[0] = u
            z[1:1 + m] = vv
            sol = hom.HomSolution(z, "pair", m=m, u=u, v=vv)
            assert solution_residual(sol, k, theta, alpha) < 1e-9


@pytest.mark.parametrize("k,q,theta,alpha", [(2, 5, 6.9, -0.3), (2, 3, 8.0, 0.4), (2, 3, 8.0, -1.0),
                                             (2, 2, 5.0, 0.05), (3, 4, 3.0, -0.2)])
def test_classifier_matches_oracle(k, q, theta, alpha):
    nu = count_total(k, q, theta, alpha).nu
    sols = oracle_enumerate(k, q, theta, alpha, n_sobol=2000)
    assert len(sols) == nu
    assert all(s.residual < 1e-10 for s in sols)
    assert all(s.kind != "unshaped" for s in sols)


def test_oracle_zero_field():
    sols = oracle_enumerate(2, 3, 20.0, 0.0, n_sobol=1000)
    assert len(sols) == 7
    with pytest.raises(DomainError):
        oracle_enumerate(2, 7, 3.0, 0.1)


def test_q3_boundary_behaviour():
    k, q = 2, 3
    t1 = theta_m(k, q, 1)
    th = t1 + 1e-3
    assert count_pair(k, q, 1, th, alpha_m(k, q, 1, th)) == 0
    t10 = theta_m0(k, q, 1)
    th = t10 - 1e-3
    assert count_pair(k, q, 1, th, alpha_m(k, q, 1, th)) >= 1


@pytest.mark.parametrize("k", [2, 3, 4])
def test_slope_polynomials(k):
    ts = q3_t_star(k)
    assert q3_slope_polys(k, 1.0, ts)[1] == pytest.approx(0.0, abs=1e-9)
    for t in np.linspace(0, ts, 10):
        ys = np.linspace(2, 50, 1000)
        vs = [0.5 * (y + math.sqrt(y * y - 4)) for y in ys]
        vals = [q3_slope_polys(k, v, t)[1] for v in vs]
        assert np.all(np.diff(vals) < 0)
    for v in (0.3, 0.9, 2.0, 7.0):
        for t in (0.5, 2.0, 6.0):
            R, Rt = q3_slope_polys(k, v, t)
            assert R == pytest.approx(q3_chi(k, v) * Rt, rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_slope_sign_equals_sign_of_v_minus_one_times_R(k):
    for th in (2.5, 4.0, 9.0):
        prof = k_profile(k, 3, 1, th)
        if prof is None:
            continue
        for v in np.geomspace(prof.v_lo, prof.v_hi, 200)[1:-1]:
            if abs(v - 1) < 1e-6:
                continue
            R = q3_slope_polys(k, v, th - 1)[0]
            assert np.sign(k_slope_sign(1, v, th, k, 3)) == np.sign((v - 1) * R)


@pytest.mark.parametrize("k,theta", [(2, 4.0), (3, 3.0), (4, 2.5), (2, 12.0)])
def test_second_derivative_closed_form(k, theta):
    h = 1e-4
    fd = (k_func(1, 1 + h, theta, k, 3) - 2 * k_func(1, 1, theta, k, 3) + k_func(1, 1 - h, theta, k, 3)) / h**2
    assert second_derivative_K1_at_1(k, theta) == pytest.approx(fd, rel=1e-5)


def test_curves_shape_and_domains():
    cs = curves(2, 5, np.linspace(4.47, 10, 50))
    assert np.isnan(cs.alpha_minus[0])
    ok = np.isfinite(cs.alpha_m[:, 1])
    assert np.all(cs.alpha_m[ok, 0] >= cs.alpha_m[ok, 1] - 1e-12)
    assert not cs.warnings
    with pytest.raises(ValueError):
        curves(2, 5, [5.0, 4.0])
