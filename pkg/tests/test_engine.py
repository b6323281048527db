import numpy as np
import pytest
from scipy.linalg import block_diag

from eqfslam import engine as eqf
from eqfslam import slam2d
from eqfslam import symmetry as sym
from eqfslam.engine import FilterConfig, FilterState, NumericalInstabilityError
from eqfslam.symmetry import GroupElement, S

from conftest import random_group, random_state

N = 3


@pytest.fixture
def model(rng):
    return slam2d.slam2d_model(random_state(rng, N))


def default_config(n, dt=0.01, **kw):
    return FilterConfig.isotropic(n, 0.02 ** 2, 0.01 ** 2, 4.0 ** 2, dt, **kw)


def test_origin_velocity_examples(rng):
    v = rng.normal(size=(N, 2))
    np.testing.assert_array_equal(eqf.origin_velocity(GroupElement.identity(N), v), v)
    X = GroupElement(np.zeros(2), [2.0, 2.0])
    np.testing.assert_allclose(eqf.origin_velocity(X, [[1.0, 0.0], [1.0, 0.0]]), [[2.0, 0.0], [2.0, 0.0]])
    X, w = random_group(rng, N), rng.normal(size=(N, 2))
    np.testing.assert_allclose(eqf.origin_velocity(X, sym.psi(X, w)), w, atol=1e-12)


def test_state_error_examples(rng):
    origin, xi = random_state(rng, N), random_state(rng, N)
    X = GroupElement.transport(origin, xi)
    np.testing.assert_allclose(eqf.state_error(X, xi), origin, atol=1e-12)
    np.testing.assert_array_equal(eqf.state_error(GroupElement.identity(N), xi), xi)
    X = random_group(rng, N)
    np.testing.assert_allclose(sym.phi(X, eqf.state_error(X, xi)), xi, atol=1e-12)


def test_chart_examples(rng):
    origin = random_state(rng, N)
    np.testing.assert_array_equal(eqf.subtraction_chart(origin, origin), np.zeros(2 * N))
    np.testing.assert_allclose(eqf.subtraction_chart([[1.5, 2.5]], [[1.0, 2.0]]), [0.5, 0.5])
    e = random_state(rng, N)
    back = eqf.subtraction_chart_inverse(eqf.subtraction_chart(e, origin), origin)
    np.testing.assert_allclose(back, e, atol=1e-14)
    with pytest.raises(sym.DomainError):
        eqf.subtraction_chart_inverse(-origin.ravel(), origin)


def test_build_A_examples(rng):
    model = slam2d.slam2d_model([[1.0, 0.0]])
    np.testing.assert_array_equal(eqf.build_A(model, [[0.0, 0.0]]), np.zeros((2, 2)))
    # origin (1, 0) with v0 = (1, 0): e' = -v0 - dphi_e Lambda(origin, v0) = e - origin, so A = I
    np.testing.assert_allclose(eqf.fd_A(model, [[1.0, 0.0]]), np.eye(2), atol=1e-9)
    np.testing.assert_allclose(eqf.build_A(model, [[1.0, 0.0]]), np.eye(2), atol=1e-15)


def test_build_A_finite_difference_fallback(model, rng):
    v0 = rng.uniform(-3, 3, (N, 2))
    A_fd = eqf.build_A(model.without_analytic(), v0)
    A = eqf.build_A(model, v0)
    assert np.abs(A - A_fd).max() <= 1e-5 * np.abs(A).max()


def test_build_C_examples():
    model = slam2d.slam2d_model([[1.0, 0.0]])
    C_expected = np.array([[0.0, 0.0], [0.0, 1.0]])
    np.testing.assert_allclose(eqf.build_C(model, GroupElement.identity(1)), C_expected, atol=1e-15)
    np.testing.assert_allclose(eqf.fd_C(model, GroupElement.identity(1)), C_expected, atol=1e-9)
    # radial displacement is invisible to the bearing
    model = slam2d.slam2d_model([[0.6, -1.3]])
    for X in (GroupElement.identity(1), GroupElement([1.1], [3.0])):
        np.testing.assert_allclose(eqf.build_C(model, X) @ np.array([0.6, -1.3]), 0.0, atol=1e-15)


def test_riccati_step_no_dynamics_no_output(rng):
    sigma = np.stack([16.0 * np.eye(2)] * N)
    P = np.stack([0.5 * np.eye(2)] * N)
    Z = np.zeros((N, 2, 2))
    out = eqf.riccati_step(sigma, Z, Z, P, np.stack([np.eye(2)] * N), 0.1)
    np.testing.assert_allclose(out, sigma + 0.1 * P)


def test_riccati_step_blocks_match_dense_oracle(model, rng):
    dt = 1e-5
    v0 = rng.uniform(-2, 2, (N, 2))
    X = random_group(rng, N)
    A = slam2d.analytic_A_blocks(model.origin, v0)
    C = slam2d.analytic_C_blocks(model.origin, X)
    sigma = np.stack([np.diag([1.0, 0.5])] * N)
    P = np.stack([0.02 ** 2 * np.eye(2)] * N)
    Q = np.stack([0.01 ** 2 * np.eye(2)] * N)
    out = eqf.riccati_step(sigma, A, C, P, Q, dt)

    Ad, Cd, Sd, Pd, Qd = (block_diag(*M) for M in (A, C, sigma, P, Q))
    dense = Sd + dt * (Ad @ Sd + Sd @ Ad.T + Pd - Sd @ Cd.T @ np.linalg.inv(Qd) @ Cd @ Sd)
    np.testing.assert_allclose(block_diag(*out), dense, rtol=1e-12, atol=1e-12)
    assert np.array_equal(out, np.swapaxes(out, -1, -2))


def test_riccati_step_dense_layout(model, rng):
    A = slam2d.analytic_A_blocks(model.origin, rng.normal(size=(N, 2)))
    C = slam2d.analytic_C_blocks(model.origin, random_group(rng, N))
    sigma = np.stack([np.eye(2)] * N)
    P = Q = np.stack([np.eye(2)] * N)
    blocks = eqf.riccati_step(sigma, A, C, P, Q, 1e-3)
    dense = eqf.riccati_step(*(block_diag(*M) for M in (sigma, A, C, P, Q)), 1e-3)
    np.testing.assert_allclose(dense, block_diag(*blocks), atol=1e-14)


def test_riccati_step_reports_pd_loss(model):
    sigma = np.stack([16.0 * np.eye(2)] * N)
    C = slam2d.analytic_C_blocks(model.origin, GroupElement.identity(N))
    A = np.zeros_like(sigma)
    P = np.stack([0.02 ** 2 * np.eye(2)] * N)
    Q = np.stack([0.01 ** 2 * np.eye(2)] * N)
    with pytest.raises(NumericalInstabilityError, match="block 0"):
        eqf.riccati_step(sigma, A, C, P, Q, 0.01)
    # the sampled scheme takes the same step without leaving the PD cone
    out = eqf.riccati_step_sampled(sigma, A, C, P, Q, 0.01)
    assert np.linalg.eigvalsh(out).min() > 0


def test_riccati_schemes_agree_to_first_order(model, rng):
    A = slam2d.analytic_A_blocks(model.origin, rng.normal(size=(N, 2)))
    C = slam2d.analytic_C_blocks(model.origin, random_group(rng, N))
    sigma = np.stack([np.eye(2)] * N)
    P = Q = np.stack([np.eye(2)] * N)
    gaps = []
    for dt in (1e-3, 5e-4):
        gaps.append(np.abs(eqf.riccati_step(sigma, A, C, P, Q, dt)
                           - eqf.riccati_step_sampled(sigma, A, C, P, Q, dt)).max())
    # O(dt^2) local difference
    assert 3.5 < gaps[0] / gaps[1] < 4.5


def test_innovation_zero_residual(model, rng):
    C = slam2d.analytic_C_blocks(model.origin, random_group(rng, N))
    y = slam2d.measure(random_state(rng, N))
    delta = eqf.innovation(model, np.stack([np.eye(2)] * N), C, np.stack([np.eye(2)] * N), y, y)
    np.testing.assert_array_equal(delta, 0.0)


def test_innovation_dense_oracle():
    model = slam2d.slam2d_model([[0.0, 1.0]])
    C = eqf.build_C(model, GroupElement.identity(1))
    delta_r = 0.1
    y_hat = np.array([[0.0, 1.0]])
    y = y_hat + [[delta_r, 0.0]]
    got = eqf.innovation(model, np.eye(2), C, np.eye(2), y, y_hat)
    # dense composition: inv(Dphi) . I . Sigma . C^T . Q^{-1} . r
    dphi = np.column_stack([-S @ [0.0, 1.0], -np.array([0.0, 1.0])])
    oracle = np.linalg.inv(dphi) @ np.eye(2) @ np.eye(2) @ C.T @ np.linalg.inv(np.eye(2)) @ (y - y_hat)[0]
    np.testing.assert_allclose(got[0], oracle, atol=1e-15)
    np.testing.assert_allclose(got[0], [delta_r, 0.0], atol=1e-15)


def test_innovation_scales_inversely_with_Q(model, rng):
    C = slam2d.analytic_C_blocks(model.origin, random_group(rng, N))
    sigma = np.stack([np.eye(2) * 3.0] * N)
    Q = np.stack([np.diag([0.5, 2.0])] * N)
    y, y_hat = slam2d.measure(random_state(rng, N)), slam2d.measure(random_state(rng, N))
    d1 = eqf.innovation(model, sigma, C, Q, y, y_hat)
    d2 = eqf.innovation(model, sigma, C, 7.0 * Q, y, y_hat)
    np.testing.assert_allclose(d2, d1 / 7.0, rtol=1e-12, atol=1e-16)


def test_observer_step_zero_field(model, rng):
    X = random_group(rng, N)
    for integrator in eqf.OBSERVER_INTEGRATORS:
        out = eqf.observer_step(model, X, np.zeros((N, 2)), np.zeros((N, 2)), 0.01, integrator)
        np.testing.assert_allclose(out.theta, X.theta, atol=1e-15)
        np.testing.assert_allclose(out.scale, X.scale, rtol=1e-15)


def test_observer_step_guards_scale():
    model = slam2d.slam2d_model([[1.0, 0.0]])
    with pytest.raises(NumericalInstabilityError):
        eqf.observer_step(model, GroupElement.identity(1), [[0.0, 0.0]], [[0.0, -200.0]], 0.01)
    out = eqf.observer_step(model, GroupElement.identity(1), [[0.0, 0.0]], [[0.0, -200.0]], 0.01, "lie_euler")
    np.testing.assert_allclose(out.scale, [np.exp(-2.0)])


def test_observer_sign_conventions_agree(model, rng):
    """Specialised per-landmark form with a negated innovation equals the global form."""
    origin = model.origin
    for _ in range(20):
        X = random_group(rng, N)
        v = rng.normal(size=(N, 2))
        sigma = np.stack([np.diag(rng.uniform(0.1, 2, 2)) for _ in range(N)])
        Q = np.stack([np.eye(2) * 1e-2] * N)
        y, y_hat = slam2d.measure(random_state(rng, N)), slam2d.measure(sym.phi(X, origin))
        C = slam2d.analytic_C_blocks(origin, X)
        delta = eqf.innovation(model, sigma, C, Q, y, y_hat)

        # per-landmark form: theta' = lift_omega - D_theta, a' = a (lift_alpha - D_a),
        # with D = -Dphi^{-1} Sigma_i (I - xx^T/|x|^2) R(theta_i) / |x| Q_i^{-1} (y_i - yhat_i)
        x_hat = sym.phi(X, origin)
        sq_hat = np.einsum("ij,ij->i", x_hat, x_hat)
        lam_theta = -np.einsum("ij,jk,ik->i", x_hat, S, v) / sq_hat
        lam_a = np.einsum("ij,ij->i", x_hat, v) / sq_hat
        D = np.empty((N, 2))
        for i, x in enumerate(origin):
            sq = x @ x
            inv = np.vstack([x @ S, -x]) / sq
            proj = np.eye(2) - np.outer(x, x) / sq
            D[i] = -inv @ sigma[i] @ proj @ sym.rotation_matrix(X.theta[i]) / np.sqrt(sq) \
                @ np.linalg.inv(Q[i]) @ (y[i] - y_hat[i])
        theta_rate = lam_theta - D[:, 0]
        a_rate = X.scale * (lam_a - D[:, 1])

        dt = 1e-3
        stepped = eqf.observer_step(model, X, v, delta, dt, "euler")
        np.testing.assert_allclose(sym.wrap_angle(stepped.theta - X.theta) / dt, theta_rate, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose((stepped.scale - X.scale) / dt, a_rate, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(-D, delta, rtol=1e-13, atol=1e-14)


def test_estimate_examples(model, rng):
    cfg = default_config(N)
    state = eqf.initial_state(cfg)
    np.testing.assert_array_equal(eqf.estimate(state, model.origin), model.origin)
    X = random_group(rng, N)
    xi = random_state(rng, N)
    state = FilterState(X, state.sigma)
    np.testing.assert_allclose(eqf.estimate(state, eqf.state_error(X, xi)), xi, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(eqf.estimate(state, model.origin), axis=1),
                               np.linalg.norm(model.origin, axis=1) / X.scale, rtol=1e-13)


def test_filter_config_validation():
    with pytest.raises(ValueError, match="dt"):
        default_config(2, dt=-0.01)
    with pytest.raises(ValueError, match="positive definite"):
        FilterConfig(-np.eye(2), np.eye(2), np.eye(2), 0.1)
    with pytest.raises(ValueError, match="symmetric"):
        FilterConfig(np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2), np.eye(2), 0.1)
    with pytest.raises(ValueError, match="block diagonal"):
        FilterConfig(np.eye(4) + 0.1 * np.eye(4)[::-1], np.eye(4), np.eye(4), 0.1)


def _update(model, cfg, state, v, y, dt):
    return eqf.filter_update(model, cfg, state, v, y, dt)


def test_filter_update_tracks_with_perfect_init(rng):
    n = 4
    x = random_state(rng, n, 1.0, 2.0)
    model = slam2d.slam2d_model(x)
    cfg = default_config(n, integrator="exact_hold")
    state = eqf.initial_state(cfg)
    for k in range(300):
        v = np.array([2 * np.cos(2 * k * cfg.dt), 0.0])
        state = eqf.filter_update(model, cfg, state, slam2d.embed_velocity(v, n), slam2d.measure(x))
        x = x - cfg.dt * v
        assert np.all(np.linalg.eigvalsh(state.sigma) > 0)
    np.testing.assert_allclose(eqf.estimate(state, model.origin), x, atol=1e-12)
    assert state.t == pytest.approx(3.0)


def test_filter_update_keeps_sigma_pd_with_default_gains(rng):
    n = 4
    x = random_state(rng, n, 1.0, 2.0)
    origin = x + rng.uniform(-1, 1, (n, 2))
    model = slam2d.slam2d_model(origin)
    cfg = default_config(n, integrator="exact_hold")
    state = eqf.initial_state(cfg)
    state = eqf.filter_update(model, cfg, state, slam2d.embed_velocity([2.0, 0.0], n), slam2d.measure(x))
    np.testing.assert_array_equal(state.sigma, np.swapaxes(state.sigma, -1, -2))
    assert np.linalg.eigvalsh(state.sigma).min() > 0


def test_matching_output_gives_pure_lift_step(model, rng):
    v = rng.normal(size=(N, 2))
    for integrator in eqf.OBSERVER_INTEGRATORS:
        cfg = FilterConfig.isotropic(N, 1e-2, 1e-2, 1.0, 1e-3, integrator=integrator)
        state = FilterState(random_group(rng, N), np.stack([np.eye(2)] * N))
        y_hat = slam2d.measure(eqf.estimate(state, model.origin))
        out = eqf.filter_update(model, cfg, state, v, y_hat)
        ref = eqf.observer_step(model, state.X, v, np.zeros((N, 2)), cfg.dt, integrator)
        np.testing.assert_array_equal(out.X.theta, ref.theta)
        np.testing.assert_array_equal(out.X.scale, ref.scale)


def test_A_is_independent_of_observer_state(model, rng):
    cfg = default_config(N)
    v0 = rng.normal(size=(N, 2))
    mats = []
    for _ in range(3):
        X = random_group(rng, N)
        diag = []
        state = FilterState(X, np.stack([np.eye(2)] * N))
        y = slam2d.measure(random_state(rng, N))
        eqf.filter_update(model, cfg, state, sym.psi(X, v0), y, diagnostics=diag)
        np.testing.assert_allclose(diag[0].v_origin, v0, atol=1e-12)
        mats.append(diag[0].A)
    np.testing.assert_allclose(mats[0], mats[1], atol=1e-12)
    np.testing.assert_allclose(mats[0], mats[2], atol=1e-12)


def test_error_coordinates_depend_only_on_error(model, rng):
    X = random_group(rng, N)
    xi = random_state(rng, N)
    Z = random_group(rng, N)
    e1 = eqf.state_error(X, xi)
    e2 = eqf.state_error(X @ Z, sym.phi(Z, xi))
    np.testing.assert_allclose(eqf.subtraction_chart(e1, model.origin),
                               eqf.subtraction_chart(e2, model.origin), atol=1e-12)


@pytest.mark.parametrize("riccati", eqf.RICCATI_SCHEMES)
def test_filter_update_richardson(rng, riccati):
    n = 2
    origin = random_state(rng, n, 1.0, 2.0)
    model = slam2d.slam2d_model(origin)
    X = random_group(rng, n)
    sigma = np.stack([np.diag([0.3, 0.1]), np.diag([0.2, 0.4])])
    v = rng.normal(size=(n, 2))
    y = slam2d.measure(random_state(rng, n, 1.0, 2.0))
    gaps = []
    for dt in (2e-3, 1e-3):
        cfg = FilterConfig.isotropic(n, 1e-2, 1e-1, 1.0, dt, riccati=riccati)
        s0 = FilterState(X, sigma)
        full = eqf.filter_update(model, cfg, s0, v, y, dt)
        half = eqf.filter_update(model, cfg, eqf.filter_update(model, cfg, s0, v, y, dt / 2), v, y, dt / 2)
        gaps.append(max(np.abs(sym.wrap_angle(full.X.theta - half.X.theta)).max(),
                        np.abs(full.X.scale - half.X.scale).max(),
                        np.abs(full.sigma - half.sigma).max()))
    assert 3.0 < gaps[0] / gaps[1] < 5.0


def test_finite_difference_model_runs_like_analytic(rng):
    n = 2
    x = random_state(rng, n, 1.0, 2.0)
    origin = x + rng.uniform(-0.3, 0.3, (n, 2))
    model = slam2d.slam2d_model(origin)
    cfg = default_config(n)
    s_an = s_fd = eqf.initial_state(cfg)
    for k in range(50):
        v = slam2d.embed_velocity([2 * np.cos(2 * k * cfg.dt), 0.0], n)
        y = slam2d.measure(x)
        s_an = eqf.filter_update(model, cfg, s_an, v, y)
        s_fd = eqf.filter_update(model.without_analytic(), cfg, s_fd, v, y)
        x = x - cfg.dt * v
    np.testing.assert_allclose(eqf.estimate(s_fd, origin), eqf.estimate(s_an, origin), atol=1e-6)
    np.testing.assert_allclose(s_fd.sigma, s_an.sigma, rtol=1e-5)
