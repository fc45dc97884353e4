import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from quadrop.errors import BadDimension, NotAccretive, NotSymmetric
from quadrop.symbol_core import (
    GOUSpec,
    build_symbol,
    diffusive_decomposition,
    exact_partial_dims,
    gou_symbol,
    hamilton_flow_vanishing,
    hamilton_map,
    harmonic_oscillator,
    heat_symbol,
    im_kernel_inclusion,
    kalman_rank,
    kfp_coeff,
    kfp_symbol,
    kolmogorov_symbol,
    sigma,
    singular_space,
    smallest_k0,
)


def random_accretive(rng, n):
    m = 2 * n
    A = rng.standard_normal((m, m))
    re = A @ A.T
    B = rng.standard_normal((m, m))
    return re + 1j * (B + B.T)


# --- construction ----------------------------------------------------------------


def test_build_symbol_heat():
    q = build_symbol(np.diag([0.0, 1.0]))
    assert q.n == 1
    assert q(np.array([0.0, 3.0])) == pytest.approx(9.0)


def test_build_symbol_rejects_negative_real_part():
    with pytest.raises(NotAccretive):
        build_symbol(np.diag([0.0, -1.0]))


def test_build_symbol_rejects_asymmetry_and_odd_size():
    with pytest.raises(NotSymmetric):
        build_symbol(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(BadDimension):
        build_symbol(np.eye(3))


def test_kfp_symbol_values():
    # q = |eta|^2 + 1/4 |v|^2 + i(<v, xi> - a <x, eta>) on (x, v, xi, eta)
    a = 0.7
    q = kfp_symbol(1, a)
    x, v, xi, eta = 0.3, -1.1, 0.8, 2.0
    expected = eta**2 + v**2 / 4 + 1j * (v * xi - a * x * eta)
    assert q(np.array([x, v, xi, eta])) == pytest.approx(expected, rel=1e-14)


# --- Hamilton map ------------------------------------------------------------------


def test_hamilton_map_heat():
    F = hamilton_map(build_symbol(np.diag([0.0, 1.0])))
    np.testing.assert_allclose(F.F, [[0, 1], [0, 0]])


@pytest.mark.parametrize("a", [0.0, 0.7])
def test_hamilton_map_kfp_closed_form(a):
    I = np.eye(1)
    Z = np.zeros((1, 1))
    expected = 0.5 * np.block([
        [Z, 1j * I, Z, Z],
        [-a * 1j * I, Z, Z, 2 * I],
        [Z, Z, Z, a * 1j * I],
        [Z, -0.5 * I, -1j * I, Z],
    ])
    np.testing.assert_allclose(hamilton_map(kfp_symbol(1, a)).F, expected, atol=1e-15)


def test_hamilton_map_gou_closed_form():
    rng = np.random.default_rng(1)
    n = 3
    A = rng.standard_normal((n, n))
    Q, R, B = A @ A.T, np.diag([0.0, 1.0, 2.0]), rng.standard_normal((n, n))
    q, _ = gou_symbol(GOUSpec(Q=Q, R=R, B=B))
    expected = 0.5 * np.block([[-1j * B, Q], [-R, 1j * B.T]])
    np.testing.assert_allclose(hamilton_map(q).F, expected, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_hamilton_map_is_sigma_skew(seed, n):
    rng = np.random.default_rng(seed)
    F = hamilton_map(build_symbol(random_accretive(rng, n)))
    assert F.skew_defect(rng, trials=20) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_symbol_is_sigma_of_hamilton_map(seed):
    # q(X) = sigma(X, F X)
    rng = np.random.default_rng(seed)
    q = build_symbol(random_accretive(rng, 2))
    X = rng.standard_normal(4)
    assert sigma(X, hamilton_map(q).F @ X) == pytest.approx(q(X), rel=1e-10, abs=1e-10)


# --- singular space ------------------------------------------------------------------


def test_kfp_singular_space_without_potential():
    an = singular_space(hamilton_map(kfp_symbol(1, 0.0)))
    assert an.dim_S == 1 and an.k0 == 1
    assert abs(an.basis_S[0, 0]) == pytest.approx(1.0)
    assert an.index_sets.I == (2,) and an.index_sets.J == (1, 2)
    assert an.diffusive and an.imF_kernel_inclusion


def test_kfp_singular_space_two_dimensional():
    an = singular_space(hamilton_map(kfp_symbol(2, 0.0)))
    assert an.dim_S == 2 and an.k0 == 1
    assert an.index_sets.I == (3, 4) and an.index_sets.J == (1, 2, 3, 4)
    assert an.diffusive


def test_kfp_singular_space_with_potential():
    an = singular_space(hamilton_map(kfp_symbol(1, 0.7)))
    assert an.dim_S == 0 and an.k0 == 1
    assert an.index_sets.I == (1, 2) and an.index_sets.J == (1, 2)
    assert an.diffusive


def test_kolmogorov_classification():
    F = hamilton_map(kolmogorov_symbol())
    an = singular_space(F)
    assert an.dim_S == 2 and an.k0 == 1
    assert an.index_sets.I == () and an.index_sets.J == (1, 2)
    assert an.diffusive
    assert not im_kernel_inclusion(F, an.basis_S)


def test_k0_examples():
    assert smallest_k0(hamilton_map(harmonic_oscillator(1))) == 0
    assert smallest_k0(hamilton_map(kfp_symbol(1, 0.0))) == 1
    assert smallest_k0(hamilton_map(kolmogorov_symbol())) == 1


def test_exact_partial_dims_oracle():
    # exact rational arithmetic agrees with the SVD path
    dims, k0 = exact_partial_dims(kfp_coeff(1, 0.0))
    assert k0 == 1
    assert tuple(dims) == singular_space(hamilton_map(kfp_symbol(1, 0.0))).partial_dims
    dims, k0 = exact_partial_dims([[0, 0, 0, 0], [0, 0, "1/2*I", 0], [0, "1/2*I", 0, 0], [0, 0, 0, 1]])
    assert k0 == 1 and dims[-1] == 2


def test_im_kernel_inclusion_trivial_space():
    F = hamilton_map(harmonic_oscillator(1))
    assert im_kernel_inclusion(F, np.zeros((2, 0)))


def test_diffusive_decomposition_trivial_space():
    idx, diff = diffusive_decomposition(np.zeros((4, 0)), 2)
    assert idx.I == (1, 2) and idx.J == (1, 2) and diff


def test_diffusive_decomposition_rotated_space():
    v = np.array([[1.0], [1.0], [0.0], [0.0]]) / np.sqrt(2)
    idx, diff = diffusive_decomposition(v, 2)
    assert idx is None and not diff


# --- generalized Ornstein-Uhlenbeck ------------------------------------------------------


def test_gou_heat():
    q, basis = gou_symbol(GOUSpec(Q=2 * np.eye(2), R=np.zeros((2, 2)), B=np.zeros((2, 2))))
    np.testing.assert_allclose(q.coeff, np.diag([0, 0, 1, 1]))
    np.testing.assert_allclose(basis @ basis.T, np.diag([1, 1, 0, 0]), atol=1e-14)


def test_gou_trivial_space():
    _, basis = gou_symbol(GOUSpec(Q=np.eye(2), R=np.eye(2), B=np.zeros((2, 2))))
    assert basis.shape[1] == 0


def test_gou_worked_example_kernel_chain():
    a, b, c, d, e = 1.0, 2.0, 0.5, 1.5, 3.0
    Qh = np.array([[a, c], [c, b]])
    spec = GOUSpec(Q=Qh @ Qh, R=np.diag([0.0, e]), B=np.array([[0.0, d], [0.0, 0.0]]))
    _, basis = gou_symbol(spec)
    x_part = basis[:2][:, np.linalg.norm(basis[:2], axis=0) > 0.5]
    assert x_part.shape[1] == 1
    assert abs(x_part[0, 0]) == pytest.approx(1.0)
    assert kalman_rank(spec.B, Qh) == (True, 2)


def test_gou_kalman_singular_space():
    # q = 1/2|Q^{1/2} xi|^2 - i<Bx, xi> under the Kalman condition has S = R^n x {0}
    spec = GOUSpec(Q=np.diag([0.0, 2.0]), R=np.zeros((2, 2)), B=np.array([[0.0, -1.0], [0.0, 0.0]]))
    q, basis = gou_symbol(spec)
    np.testing.assert_allclose(basis @ basis.T, np.diag([1, 1, 0, 0]), atol=1e-14)
    an = singular_space(hamilton_map(q))
    np.testing.assert_allclose(an.basis_S @ an.basis_S.T, basis @ basis.T, atol=1e-12)


def _max_principal_angle(U, V):
    if U.shape[1] != V.shape[1]:
        return np.inf
    if U.shape[1] == 0:
        return 0.0
    return float(np.max(sla.subspace_angles(U, V)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_gou_closed_form_matches_generic(seed, n):
    rng = np.random.default_rng(seed)
    def psd(rank):
        A = rng.integers(-2, 3, size=(n, rank)).astype(float)
        return A @ A.T
    B = rng.integers(-1, 2, size=(n, n)).astype(float)
    spec = GOUSpec(Q=psd(rng.integers(0, n + 1)), R=psd(rng.integers(0, n + 1)), B=B)
    q, basis = gou_symbol(spec)
    an = singular_space(hamilton_map(q), rank_tol=1e-9)
    assert _max_principal_angle(basis, an.basis_S) <= 1e-8


# --- Kalman rank ---------------------------------------------------------------------


def test_kalman_rank_examples():
    assert kalman_rank(np.zeros((3, 3)), np.eye(3)) == (True, 3)
    assert kalman_rank(np.array([[0.0, 1.0], [0.0, 0.0]]), np.diag([1.0, 0.0])) == (False, 1)


# --- Hamilton flow ---------------------------------------------------------------------


def test_flow_vanishing_kfp():
    q = kfp_symbol(1, 0.0)
    assert hamilton_flow_vanishing(q, np.array([1.0, 0, 0, 0]))
    assert not hamilton_flow_vanishing(q, np.array([0, 1.0, 0, 0]))
    assert hamilton_flow_vanishing(q, np.zeros(4))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 2))
def test_flow_vanishes_exactly_on_singular_space(seed, n):
    rng = np.random.default_rng(seed)
    Qh = np.diag(rng.integers(0, 2, size=n).astype(float))
    spec = GOUSpec(Q=Qh, R=np.zeros((n, n)), B=rng.integers(-1, 2, size=(n, n)).astype(float))
    q, basis = gou_symbol(spec)
    for j in range(basis.shape[1]):
        assert hamilton_flow_vanishing(q, basis[:, j])
    if basis.shape[1] < 2 * n:
        an = singular_space(hamilton_map(q), rank_tol=1e-9)
        X = an.basis_perp[:, 0]
        assert not hamilton_flow_vanishing(q, X)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 2))
def test_partial_dims_non_increasing(seed, n):
    rng = np.random.default_rng(seed)
    an = singular_space(hamilton_map(build_symbol(random_accretive(rng, n))))
    assert all(a >= b for a, b in zip(an.partial_dims, an.partial_dims[1:]))
