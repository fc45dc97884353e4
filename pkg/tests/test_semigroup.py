from math import e, factorial, pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadrop.errors import BadDimension, GridUnderResolved, InsufficientData, ParameterOutOfRange, TruncationTooLarge
from quadrop.mehler import gaussian_moment
from quadrop.semigroup import (
    FunctionState,
    SmoothingSeries,
    check_gevrey_frequency,
    evolve_hermite,
    evolve_mehler,
    gaussian_state,
    gevrey_to_frequency,
    grid_state,
    gs_bound_constants,
    hermite_functions,
    hermite_matrix,
    hermite_tail_mass,
    measure_smoothing,
    measured_sup,
    mehler_grid_propagator,
    noise_state,
    predicted_exponent,
    seminorm,
    smoothing_exponent_fit,
    state_from_csv,
    state_to_csv,
    supported_orders,
)
from quadrop.symbol_core import build_symbol, hamilton_map, harmonic_oscillator, heat_symbol, kfp_symbol

HEAT_Q = heat_symbol(1)
HEAT = hamilton_map(HEAT_Q)


def heat_gaussian(t):
    s = 1 + 2 * t
    return lambda x: s**-0.5 * np.exp(-x**2 / (2 * s))


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# --- Hermite functions and matrices ------------------------------------------------------


def test_hermite_functions_orthonormal():
    x, w = np.polynomial.hermite.hermgauss(80)
    H = hermite_functions(30, x) * np.exp(x**2 / 2)
    G = (H * w) @ H.T
    np.testing.assert_allclose(G, np.eye(30), atol=1e-12)


def test_oscillator_matrix_diagonal():
    M = hermite_matrix(harmonic_oscillator(1), 20).dense
    np.testing.assert_allclose(M, np.diag(2 * np.arange(20) + 1.0), atol=1e-12)


def test_heat_matrix_ladder_oracle():
    # -d^2 = (a a^+ + a^+ a - a^2 - a^+^2) / 2 on Hermite functions
    N = 16
    M = hermite_matrix(build_symbol(np.diag([0.0, 1.0])), N).dense
    ref = np.zeros((N, N))
    for k in range(N):
        ref[k, k] = k + 0.5
        if k + 2 < N:
            ref[k, k + 2] = ref[k + 2, k] = -sqrt((k + 1) * (k + 2)) / 2
    np.testing.assert_allclose(M, ref, atol=1e-12)


def test_kfp_matrix_accretive():
    op = hermite_matrix(kfp_symbol(1, 0.0), 16)
    rng = np.random.default_rng(0)
    A = op.dense
    for _ in range(100):
        v = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
        assert (np.vdot(v, A @ v) / np.vdot(v, v)).real >= -1e-8
    assert op.numerical_range_min() >= -1e-8


def test_truncation_guard():
    with pytest.raises(TruncationTooLarge):
        hermite_matrix(HEAT_Q, 65)
    with pytest.raises(TruncationTooLarge):
        hermite_matrix(build_symbol(np.eye(6)), 8)


# --- evolution -----------------------------------------------------------------------------


def test_oscillator_ground_state():
    op = hermite_matrix(harmonic_oscillator(1), 12)
    u = FunctionState("hermite", np.eye(12)[0].astype(complex), 1, N=12)
    v = evolve_hermite(op, 0.7, u)
    np.testing.assert_allclose(v.data, np.exp(-0.7) * u.data, atol=1e-14)


def test_heat_hermite_closed_form():
    t = 0.2
    v = evolve_hermite(hermite_matrix(HEAT_Q, 48), t, gaussian_state("hermite", 1, N=48)).to_grid(12.0, 256)
    ref = grid_state(heat_gaussian(t), 1, 12.0, 256)
    assert rel(v.data, ref.data) <= 1e-6


def test_heat_mehler_closed_form():
    u = gaussian_state("grid", 1, L=12.0, M=256)
    for t in (0.05, 0.2, 1.0):
        v = evolve_mehler(HEAT, t, u)
        ref = grid_state(heat_gaussian(t), 1, 12.0, 256)
        assert rel(v.data, ref.data) <= 1e-8


def test_mehler_identity_at_zero():
    u = gaussian_state("grid", 1, center=[0.4], L=12.0, M=128)
    np.testing.assert_array_equal(evolve_mehler(HEAT, 0.0, u).data, u.data)


def test_mehler_tail_guard():
    u = gaussian_state("grid", 1, L=4.0, M=64)
    with pytest.raises(GridUnderResolved):
        evolve_mehler(HEAT, 2.0, u)
    with pytest.raises(BadDimension):
        evolve_mehler(HEAT, 0.1, gaussian_state("hermite", 1, N=8))


def test_oscillator_backends_agree():
    F = hamilton_map(harmonic_oscillator(1))
    op = hermite_matrix(harmonic_oscillator(1), 48)
    ug = gaussian_state("grid", 1, center=[0.5], width=0.8, L=12.0, M=256)
    uh = gaussian_state("hermite", 1, center=[0.5], width=0.8, N=48)
    for t in (0.1, 0.25, 0.5):
        a = evolve_mehler(F, t, ug)
        b = evolve_hermite(op, t, uh).to_grid(12.0, 256)
        assert rel(a.data, b.data) <= 1e-8


def test_grid_propagator_matches_evolution():
    u = gaussian_state("grid", 1, center=[0.3], L=8.0, M=64)
    P = mehler_grid_propagator(HEAT, 0.3, 8.0, 64)
    np.testing.assert_allclose(P @ u.data, evolve_mehler(HEAT, 0.3, u).data, atol=1e-13)
    # small times stay bounded
    assert np.linalg.norm(mehler_grid_propagator(HEAT, 1e-5, 8.0, 64), 2) <= 1 + 1e-8


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.floats(0.02, 0.4), t2=st.floats(0.02, 0.4))
def test_contraction_and_semigroup_law(seed, t1, t2):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 1.0)
    q = kfp_symbol(1, a) if seed % 2 else harmonic_oscillator(1)
    F = hamilton_map(q)
    op = hermite_matrix(q, 12)
    data = rng.standard_normal((12,) * q.n) + 1j * rng.standard_normal((12,) * q.n)
    u = FunctionState("hermite", data / np.linalg.norm(data), q.n, N=12)
    v1 = evolve_hermite(op, t1, u)
    assert v1.norm() <= u.norm() * (1 + 1e-8)
    both = evolve_hermite(op, t2, v1)
    direct = evolve_hermite(op, t1 + t2, u)
    assert rel(both.data, direct.data) <= 1e-5
    if q.n == 1:
        ug = gaussian_state("grid", 1, center=[rng.uniform(-1, 1)], L=10.0, M=128)
        g1 = evolve_mehler(F, t1, ug)
        assert g1.norm() <= ug.norm() * (1 + 1e-8)
        assert rel(evolve_mehler(F, t2, g1).data, evolve_mehler(F, t1 + t2, ug).data) <= 1e-5


def test_kfp_mehler_contraction_and_law():
    F = hamilton_map(kfp_symbol(1, 0.0))
    u = gaussian_state("grid", 2, center=[0.3, -0.2], L=6.0, M=32)
    v = evolve_mehler(F, 0.2, u, check=False)
    assert v.norm() <= u.norm() * (1 + 1e-8)
    w = evolve_mehler(F, 0.3, v, check=False)
    assert rel(w.data, evolve_mehler(F, 0.5, u, check=False).data) <= 1e-5


# --- states --------------------------------------------------------------------------------


def test_representation_round_trip():
    uh = gaussian_state("hermite", 1, center=[0.5], N=48)
    back = uh.to_grid(12.0, 256).to_hermite(48)
    assert rel(back.data, uh.data) <= 1e-8
    assert hermite_tail_mass(uh) < 1e-10


def test_state_csv_round_trip():
    u = gaussian_state("grid", 2, L=4.0, M=8)
    v = state_from_csv(state_to_csv(u))
    np.testing.assert_array_equal(v.data, u.data)
    assert (v.L, v.M) == (4.0, 8)
    h = noise_state(1, 10, seed=2)
    np.testing.assert_array_equal(state_from_csv(state_to_csv(h)).data, h.data)


# --- seminorms --------------------------------------------------------------------------------


def test_seminorm_gaussian_values():
    u = gaussian_state("grid", 1, L=12.0, M=256)
    assert seminorm(u, (0,), (0,)) == pytest.approx(pi**0.25, rel=1e-12)
    assert seminorm(u, (2,), (0,)) ** 2 == pytest.approx(gaussian_moment(2), rel=1e-10)
    assert seminorm(u, (2,), (0,)) ** 2 == pytest.approx(0.75 * sqrt(pi), rel=1e-10)


def test_seminorm_derivative_of_heat_solution():
    # ||d/dx u_t||^2 = sqrt(pi) / (2 (1 + 2t)^(3/2)) for u_t the heat-evolved Gaussian
    t = 0.3
    v = evolve_mehler(HEAT, t, gaussian_state("grid", 1, L=12.0, M=256))
    ref = sqrt(sqrt(pi) / 2) * (1 + 2 * t) ** -0.75
    assert seminorm(v, (0,), (1,)) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("order", [(0, 0), (1, 0), (0, 1), (2, 1), (1, 3), (4, 0), (0, 4)])
def test_seminorm_representations_agree(order):
    a, b = order
    uh = gaussian_state("hermite", 1, center=[0.3], width=0.9, N=48)
    ug = uh.to_grid(12.0, 256)
    assert seminorm(uh, (a,), (b,)) == pytest.approx(seminorm(ug, (a,), (b,)), rel=1e-6)


def test_seminorm_2d_representations_agree():
    uh = gaussian_state("hermite", 2, center=[0.3, -0.1], N=32)
    ug = uh.to_grid(10.0, 64)
    for alpha, beta in [((1, 0), (0, 1)), ((0, 2), (1, 1))]:
        assert seminorm(uh, alpha, beta) == pytest.approx(seminorm(ug, alpha, beta), rel=1e-6)


def test_seminorm_order_cap():
    with pytest.raises(ValueError):
        seminorm(gaussian_state("hermite", 1, N=8), (5,), (4,))


# --- smoothing rates ----------------------------------------------------------------------------


def test_predicted_exponent():
    assert predicted_exponent(1, 0, 2) == 3 * (9 * 2 / 4 + 2 + 3)
    assert predicted_exponent(0, 1, 1) == 1 + 9 / 4 + 3


def test_supported_orders_kfp():
    orders = supported_orders(2, (2,), (1, 2), 2)
    assert ((0, 0), (0, 0)) in orders
    assert all(a[0] == 0 for a, _ in orders)
    assert len(orders) == 1 + 3 + 6


def test_heat_derivative_rate_is_half():
    ts = np.geomspace(0.1, 1.0, 8)
    series = measure_smoothing(HEAT_Q, 0, [((0,), (1,))], ts, N=48, N_ref=64)
    rep = smoothing_exponent_fit(series)
    assert rep.exponents[((0,), (1,))] == pytest.approx(0.5, abs=0.05)
    assert rep.passed


def test_smooth_datum_exponents_non_positive():
    # a Gaussian datum is already smooth: seminorms stay bounded as t -> 0
    ts = np.geomspace(1e-4, 1e-2, 8)
    u = gaussian_state("grid", 1, L=12.0, M=256)
    orders = [((0,), (0,)), ((0,), (1,)), ((0,), (2,))]
    vals = np.array([[seminorm(evolve_mehler(HEAT, t, u), a, b) for t in ts] for a, b in orders])
    series = SmoothingSeries(t=ts, orders=orders, values=vals, reference=vals, u_norm=u.norm(), n=1, k0=0)
    rep = smoothing_exponent_fit(series)
    assert all(e <= 1e-2 for e in rep.exponents.values())
    assert rep.passed


def test_smoothing_needs_eight_times():
    with pytest.raises(InsufficientData):
        measure_smoothing(HEAT_Q, 0, [((0,), (1,))], np.geomspace(0.1, 1, 5), N=16)


def test_smoothing_report_table_shape():
    ts = np.geomspace(0.1, 1.0, 8)
    series = measure_smoothing(HEAT_Q, 0, [((0,), (0,)), ((0,), (2,))], ts, N=32, N_ref=40)
    rep = smoothing_exponent_fit(series)
    table = rep.table((0,), (2,))
    assert len(table) == 8
    assert all(len(r) == 3 for r in table)


# --- Gelfand-Shilov utilities --------------------------------------------------------------------


def test_gevrey_constants():
    b, w = gevrey_to_frequency(1.0, 1.0, 1)
    assert b == 2.0 and w == pytest.approx(1 / (16 * e))
    _, w2 = gevrey_to_frequency(1.0, 2.0, 1)
    assert w2 == pytest.approx(w / 4)
    with pytest.raises(ValueError):
        gevrey_to_frequency(0.0, 1.0, 1)


def test_gevrey_frequency_conclusion_for_gaussian():
    u = grid_state(lambda x: np.exp(-x**2), 1, 12.0, 256)
    chk = check_gevrey_frequency(u, max_order=10)
    assert chk.margin >= 1


def test_gs_bound_dominates_gaussian():
    # f = exp(-x^2): |f| <= exp(-c1 x^2) with c1 < 1, |f^| = sqrt(pi) exp(-xi^2 / 4)
    u = grid_state(lambda x: np.exp(-x**2), 1, 12.0, 256)
    bound = gs_bound_constants(1.0, 0.99, sqrt(pi), 0.25, 1)
    for a in range(7):
        for b in range(7 - a):
            assert measured_sup(u, (a,), (b,)) <= bound((a,), (b,))


def test_gs_bound_homogeneity_and_range():
    b1 = gs_bound_constants(1.0, 0.5, 1.0, 0.5, 1)
    b2 = gs_bound_constants(2.0, 0.5, 1.0, 0.5, 1)
    for order in [((0,), (0,)), ((2,), (1,))]:
        assert b2(*order) == pytest.approx(sqrt(2) * b1(*order), rel=1e-12)
    assert np.isfinite(b1((0,), (0,)))
    with pytest.raises(ParameterOutOfRange):
        gs_bound_constants(1.0, 1.0, 1.0, 0.5, 1)
