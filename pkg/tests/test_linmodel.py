"""State-space model, simulation, and regressor construction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from texplore.errors import DataError, DimensionError, DomainError, StabilityError
from texplore.linmodel import (
    ParameterVector,
    PriorSet,
    SystemModel,
    Trajectory,
    build_regressors,
    draw_noise,
    kron_weighted_sqnorm,
    pack_theta,
    prior_contains,
    prior_from_dict,
    prior_to_dict,
    simulate,
    system_from_dict,
    system_from_theta,
    system_to_dict,
    theta_bound,
    unpack_theta,
    validate_true_system,
)

CHAIN_A = np.array([[0.49, 0.49, 0.0], [0.0, 0.49, 0.49], [0.0, 0.0, 0.49]])
CHAIN_B = np.array([[0.0], [0.0], [0.49]])


def random_stable_system(rng, n_x=2, n_u=1, sigma_w=0.1):
    A = rng.normal(size=(n_x, n_x))
    A *= 0.9 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-9)
    B = rng.normal(size=(n_x, n_u))
    return SystemModel(A, B, sigma_w)


# -- model and parameter packing -------------------------------------------


def test_pack_unpack_roundtrip():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 2))
    pv = pack_theta(A, B)
    A2, B2 = unpack_theta(pv)
    assert_allclose(A2, A)
    assert_allclose(B2, B)
    assert pv.theta.shape == (3 * 5,)


def test_pack_theta_is_column_stacking():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[5.0], [6.0]])
    pv = pack_theta(A, B)
    assert_allclose(pv.theta, [1.0, 3.0, 2.0, 4.0, 5.0, 6.0])


def test_system_from_theta_matches_pack():
    rng = np.random.default_rng(4)
    sys = random_stable_system(rng, n_x=3, n_u=2)
    sys2 = system_from_theta(pack_theta(sys.A, sys.B), sigma_w=sys.sigma_w)
    assert_allclose(sys2.A, sys.A)
    assert_allclose(sys2.B, sys.B)
    assert sys2.sigma_w == sys.sigma_w


def test_validate_true_system_accepts_stable_controllable():
    validate_true_system(SystemModel(CHAIN_A, CHAIN_B, 0.01))


def test_validate_true_system_rejects_unstable():
    sys = SystemModel(np.array([[1.01]]), np.array([[1.0]]), 0.0)
    with pytest.raises(StabilityError):
        validate_true_system(sys)


def test_validate_true_system_rejects_uncontrollable():
    # B is an eigenvector of the diagonal A, so the second mode is unreachable
    sys = SystemModel(np.diag([0.5, 0.3]), np.array([[1.0], [0.0]]), 0.0)
    with pytest.raises(StabilityError):
        validate_true_system(sys)


def test_system_model_rejects_negative_noise():
    with pytest.raises(DomainError):
        SystemModel(np.zeros((1, 1)), np.ones((1, 1)), -0.1)


def test_parameter_vector_dimension_check():
    with pytest.raises(DimensionError):
        ParameterVector(np.zeros(5), 2, 1)


# -- prior set -------------------------------------------------------------


def test_prior_membership_symmetric_around_center():
    rng = np.random.default_rng(5)
    center = ParameterVector(rng.normal(size=6), 2, 1)
    prior = PriorSet(center, np.diag([1.0, 2.0, 3.0]))
    d = rng.normal(size=6) * 0.1
    plus = ParameterVector(center.theta + d, 2, 1)
    minus = ParameterVector(center.theta - d, 2, 1)
    assert prior_contains(prior, plus) == prior_contains(prior, minus)


def test_prior_requires_positive_definite_shape():
    center = ParameterVector(np.zeros(6), 2, 1)
    with pytest.raises(DomainError):
        PriorSet(center, np.diag([1.0, 0.0, 1.0]))


def test_theta_bound_identity_shape():
    prior = PriorSet(ParameterVector(np.zeros(6), 2, 1), np.eye(3))
    assert theta_bound(prior) == pytest.approx(1.0)


def test_theta_bound_scaled_shape():
    theta0 = np.zeros(6)
    theta0[0] = 2.0
    prior = PriorSet(ParameterVector(theta0, 2, 1), 4.0 * np.eye(3))
    assert theta_bound(prior) == pytest.approx(2.5)


def test_theta_bound_chain_benchmark_prior():
    theta0 = pack_theta(CHAIN_A, CHAIN_B).theta + 4e-4
    prior = PriorSet(ParameterVector(theta0, 3, 1), 1e3 * np.eye(4))
    expected = np.linalg.norm(theta0) + 10.0 ** (-1.5)
    assert theta_bound(prior) == pytest.approx(expected, rel=1e-12)


def test_prior_contains_center_and_boundary():
    center = ParameterVector(np.zeros(6), 2, 1)
    prior = PriorSet(center, np.eye(3))
    assert prior_contains(prior, center)
    e1 = np.zeros(6)
    e1[0] = 1.0
    assert prior_contains(prior, ParameterVector(e1 * 1.0, 2, 1))
    assert not prior_contains(prior, ParameterVector(e1 * 1.0001, 2, 1))


def test_kron_weighted_sqnorm_matches_explicit_kron():
    rng = np.random.default_rng(6)
    W = rng.normal(size=(3, 3))
    W = W @ W.T
    d = rng.normal(size=6)
    expected = d @ np.kron(W, np.eye(2)) @ d
    assert kron_weighted_sqnorm(d, W, 2) == pytest.approx(expected, rel=1e-12)


# -- simulation ------------------------------------------------------------


def test_simulate_memoryless_constant_input():
    sys = SystemModel(np.zeros((1, 1)), np.eye(1), 0.0)
    T = 10
    traj = simulate(sys, np.ones((T, 1)), "none")
    assert traj.X[0, 0] == 0.0
    assert_allclose(traj.X[1:, 0], np.ones(T))


def test_simulate_impulse_response_geometric():
    sys = SystemModel(np.array([[0.5]]), np.array([[1.0]]), 0.0)
    T = 8
    U = np.zeros((T, 1))
    U[0, 0] = 1.0
    traj = simulate(sys, U, "none")
    expected = np.concatenate([[0.0], 0.5 ** np.arange(T)])
    assert_allclose(traj.X[:, 0], expected)


def test_simulate_chain_zero_input_stays_zero():
    sys = SystemModel(CHAIN_A, CHAIN_B, 0.0)
    traj = simulate(sys, np.zeros((50, 1)), "none")
    assert_allclose(traj.X, np.zeros((51, 3)))


def test_simulate_recurrence_exact():
    rng = np.random.default_rng(7)
    sys = random_stable_system(rng, n_x=3, n_u=2)
    T = 40
    U = rng.normal(size=(T, 2))
    traj = simulate(sys, U, "gaussian", seed=11)
    for k in range(T):
        step = sys.A @ traj.X[k] + sys.B @ U[k] + traj.W[k]
        assert_allclose(traj.X[k + 1], step, rtol=0.0, atol=1e-13)


def test_simulate_matches_loop_oracle():
    rng = np.random.default_rng(8)
    sys = random_stable_system(rng, n_x=2, n_u=1)
    T = 30
    U = rng.normal(size=(T, 1))
    W = rng.normal(size=(T, 2)) * 0.05
    traj = simulate(sys, U, W)
    x = np.zeros(2)
    for k in range(T):
        x = sys.A @ x + sys.B @ U[k] + W[k]
        assert_allclose(traj.X[k + 1], x, rtol=0.0, atol=1e-12)


def test_trajectory_rejects_nonzero_start():
    X = np.ones((3, 1))
    with pytest.raises(DataError):
        Trajectory(X=X, U=np.zeros((2, 1)), W=np.zeros((2, 1)), T=2)


# -- noise -----------------------------------------------------------------


def test_draw_noise_zero_sigma_is_zero():
    W = draw_noise("gaussian", 0.0, 50, 3, seed=0)
    assert_allclose(W, np.zeros((50, 3)))


def test_draw_noise_gaussian_variance():
    W = draw_noise("gaussian", 0.01, 10**5, 1, seed=1)
    var = float(np.var(W))
    assert abs(var - 1e-4) <= 0.05 * 1e-4


def test_draw_noise_deterministic():
    W1 = draw_noise("gaussian", 0.3, 64, 2, seed=9)
    W2 = draw_noise("gaussian", 0.3, 64, 2, seed=9)
    assert np.array_equal(W1, W2)


def test_draw_noise_uniform_bounded_with_matching_proxy():
    sigma = 0.2
    W = draw_noise("uniform", sigma, 10**4, 1, seed=2)
    assert np.max(np.abs(W)) <= sigma * np.sqrt(3.0) + 1e-12
    assert float(np.var(W)) <= sigma**2 * 1.05


def test_draw_noise_unknown_kind():
    with pytest.raises(DomainError):
        draw_noise("poisson", 0.1, 10, 1, seed=0)


# -- regressors ------------------------------------------------------------


def test_regressors_single_step():
    sys = SystemModel(np.zeros((1, 1)), np.eye(1), 0.0)
    traj = simulate(sys, np.array([[2.5]]), "none")
    phi = build_regressors(traj)
    assert_allclose(phi.Phi, np.array([[0.0], [2.5]]))


def test_regressors_reproduce_noiseless_states():
    rng = np.random.default_rng(10)
    sys = random_stable_system(rng, n_x=3, n_u=2)
    T = 25
    U = rng.normal(size=(T, 2))
    traj = simulate(sys, U, "none")
    phi = build_regressors(traj)
    AB = np.hstack([sys.A, sys.B])
    for k in range(T):
        assert_allclose(traj.X[k + 1], AB @ phi.Phi[:, k], rtol=0.0, atol=1e-12)


def test_regressor_gram_is_psd():
    rng = np.random.default_rng(11)
    sys = random_stable_system(rng)
    traj = simulate(sys, rng.normal(size=(60, 1)), "gaussian", seed=3)
    G = build_regressors(traj).gram()
    assert_allclose(G, G.T, rtol=0.0, atol=1e-12)
    assert np.linalg.eigvalsh(G)[0] >= -1e-12


# -- serialization ---------------------------------------------------------


def test_system_dict_roundtrip():
    sys = SystemModel(CHAIN_A, CHAIN_B, 0.01)
    sys2 = system_from_dict(system_to_dict(sys))
    assert_allclose(sys2.A, sys.A)
    assert_allclose(sys2.B, sys.B)
    assert sys2.sigma_w == sys.sigma_w


def test_prior_dict_roundtrip():
    prior = PriorSet(ParameterVector(np.arange(6.0), 2, 1), np.diag([1.0, 2.0, 3.0]))
    prior2 = prior_from_dict(prior_to_dict(prior), 2, 1)
    assert_allclose(prior2.theta_hat0.theta, prior.theta_hat0.theta)
    assert_allclose(prior2.D0, prior.D0)
