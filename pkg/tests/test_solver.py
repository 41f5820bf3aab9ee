import numpy as np
import pytest

from oracles import data_matrix, dense_admm, dense_alpha_update, gram
from sskcf.labeling import make_labels
from sskcf.solver import (
    PartTrainingInput,
    SingularSystemError,
    SolverConfig,
    compute_omega,
    init_part,
    recover_filter,
    solve_joint,
    update_alpha,
    update_alpha_r,
    update_b,
    update_q,
    update_v,
)
from sskcf.spectral import dft2, idft2, linear_kernel_spectrum

rng = np.random.default_rng(11)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(C=0)
    with pytest.raises(ValueError):
        SolverConfig(delta=-1)
    with pytest.raises(ValueError):
        SolverConfig(kernel="poly")
    with pytest.raises(ValueError):
        SolverConfig(penalty_sign=0.5)
    assert SolverConfig().with_overrides(beta=0.0).beta == 0.0


def test_training_input_validation():
    with pytest.raises(ValueError):
        PartTrainingInput(np.zeros((4, 4, 2)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        PartTrainingInput(np.zeros((4, 4)), np.zeros((4, 4)), omega=0.0)


# -- initialisation -------------------------------------------------------------


def test_init_zero_labels():
    s = init_part(rng.standard_normal((4, 4, 3)), np.zeros((4, 4)), SolverConfig())
    np.testing.assert_array_equal(s.alpha_hat, 0)
    assert s.b == 0


def test_init_scalar_toy_matches_dense_formula():
    cfg = SolverConfig(kernel="linear", C=1e15)
    s = init_part(np.array([[2.0]]), np.array([[1.0]]), cfg)
    # (X^T y) / (X X^T + 1/C) = 2 / 4
    assert idft2(s.alpha_hat)[0, 0] == pytest.approx(0.5, rel=1e-12)
    assert s.b == 1.0


@pytest.mark.parametrize("channels", [1, 3])
def test_init_matches_dense_solve(channels):
    x = rng.standard_normal((4, 4, channels))
    y = np.sign(rng.standard_normal((4, 4)))
    cfg = SolverConfig(kernel="linear", C=10.0)
    s = init_part(x, y, cfg)
    K = gram(x)
    rhs = data_matrix(x).T @ y.ravel() if channels == 1 else y.ravel()
    expected = np.linalg.solve(K + np.eye(16) / cfg.C, rhs)
    np.testing.assert_allclose(idft2(s.alpha_hat).ravel(), expected, rtol=1e-9, atol=1e-12)
    assert s.b == pytest.approx(y.mean())


# -- omega, root ------------------------------------------------------------------


def test_omega_values():
    w = dft2(rng.standard_normal((4, 4)))
    assert compute_omega(w, w, 3.0) == 1.0
    kappa = 1.5
    d = np.zeros((4, 4))
    d[1, 2] = np.sqrt(2) * kappa  # ||d||^2 = 2 kappa^2
    assert compute_omega(dft2(d), np.zeros((4, 4)), kappa) == pytest.approx(np.exp(-1.0))
    om = [compute_omega(dft2(t * d), 0 * d, kappa) for t in (0.0, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(om, om[1:]))


def test_recover_filter_matches_dense_primal():
    x = rng.standard_normal((3, 4, 2))
    alpha = rng.standard_normal((3, 4))
    w = idft2(recover_filter(dft2(x), dft2(alpha)))
    expected = 0.5 * alpha.ravel() @ data_matrix(x)
    np.testing.assert_allclose(w.ravel(), expected, atol=1e-12)


def test_alpha_r():
    a = [dft2(rng.standard_normal((3, 3))) for _ in range(3)]
    np.testing.assert_allclose(update_alpha_r(a[:1], [0.7]), a[0], rtol=1e-15)
    np.testing.assert_allclose(update_alpha_r(a[:2], [1, 1]), (a[0] + a[1]) / 2)
    expected = 0.2 * a[0] + 0.3 * a[1] + 0.5 * a[2]
    np.testing.assert_allclose(update_alpha_r(a, [0.2, 0.3, 0.5]), expected, atol=1e-12)
    with pytest.raises(ValueError):
        update_alpha_r([], [])


# -- v, q, b ------------------------------------------------------------------------


def test_v_scalar_cases():
    kf = np.ones((3, 3))
    z = np.zeros((3, 3), complex)
    y = np.ones((3, 3))
    np.testing.assert_array_equal(update_v(kf, z, 1.0, y), 0)
    np.testing.assert_allclose(update_v(kf, z, 2.0, y), 1)


def test_v_matches_dense():
    x = rng.standard_normal((4, 4, 2))
    y = np.sign(rng.standard_normal((4, 4)))
    alpha = rng.standard_normal((4, 4))
    b = 0.3
    v = update_v(linear_kernel_spectrum(x, x), dft2(alpha), b, y)
    K = gram(x)
    expected = np.maximum(y.ravel() * (0.5 * K @ alpha.ravel() + b) - 1, 0)
    np.testing.assert_allclose(v.ravel(), expected, atol=1e-10)
    assert np.all(v >= 0)


def test_q_and_b():
    y = np.array([[1.0, -1.0], [0.0, 1.0]])
    np.testing.assert_array_equal(update_q(y, np.zeros_like(y)), y)
    v = np.zeros_like(y)
    v[0, 0] = 0.5
    q = update_q(y, v)
    assert q[0, 0] == 1.5
    nz = y != 0
    v = np.abs(rng.standard_normal(y.shape))
    assert np.all(np.sign(update_q(y, v))[nz] == y[nz])
    assert update_b(np.zeros((3, 3))) == 0
    assert update_b(y) == 0.25
    r = rng.standard_normal((5, 4))
    assert update_b(r) == pytest.approx(r.sum() / 20)


# -- alpha update -----------------------------------------------------------------


def _random_update_case(shape, channels, sign, C=1e4, delta=0.05, beta=5.0):
    x = rng.standard_normal((*shape, channels))
    q = rng.standard_normal(shape)
    b = float(rng.standard_normal())
    ar = rng.standard_normal(shape)
    ap = rng.standard_normal(shape)
    om = float(rng.uniform(0.1, 1.0))
    cfg = SolverConfig(kernel="linear", C=C, delta=delta, beta=beta, penalty_sign=sign)
    got = idft2(update_alpha(linear_kernel_spectrum(x, x), q, b, dft2(ar), dft2(ap), om, cfg)).ravel()
    want = dense_alpha_update(gram(x), q.ravel(), b, ar.ravel(), ap.ravel(), om, C, delta, beta, sign)
    return got, want


@pytest.mark.parametrize("sign", [-1.0, 1.0])
@pytest.mark.parametrize("channels", [1, 2])
def test_update_alpha_matches_dense(sign, channels):
    got, want = _random_update_case((4, 4), channels, sign)
    assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)


def test_update_alpha_reduces_to_plain_closed_form():
    x = rng.standard_normal((4, 4))
    kf = linear_kernel_spectrum(x, x)
    q = rng.standard_normal((4, 4))
    cfg = SolverConfig(kernel="linear", delta=0.0, beta=0.0)
    got = update_alpha(kf, q, 0.2, dft2(rng.standard_normal((4, 4))), np.zeros((4, 4)), 1.0, cfg)
    # stationarity of the plain problem: (K/2 + I/(2C)) a = q - b
    a = idft2(got).ravel()
    lhs = (0.5 * gram(x) + np.eye(16) / (2 * cfg.C)) @ a
    np.testing.assert_allclose(lhs, q.ravel() - 0.2, atol=1e-9)


def test_update_alpha_dc_cancellation():
    y = make_labels((6, 6))
    x = rng.standard_normal((6, 6))
    cfg = SolverConfig(kernel="linear")
    z = np.zeros((6, 6), complex)
    a = update_alpha(linear_kernel_spectrum(x, x), y, y.mean(), z, z, 1.0, cfg)
    assert abs(a[0, 0]) < 1e-9


def test_update_alpha_singular():
    cfg = SolverConfig(C=1.0, delta=0.0, beta=0.5, penalty_sign=-1.0)  # 1/(2C) - beta = 0
    z = np.zeros((2, 2), complex)
    with pytest.raises(SingularSystemError):
        update_alpha(np.zeros((2, 2)), np.ones((2, 2)), 0.0, z, z, 1.0, cfg)


# -- joint solve ------------------------------------------------------------------


def _parts(n, shape=(4, 4), channels=2, prev=True):
    y = make_labels(shape)
    return [
        PartTrainingInput(
            rng.standard_normal((*shape, channels)),
            y,
            alpha_prev=dft2(rng.standard_normal(shape)) if prev else None,
            omega=float(rng.uniform(0.2, 1.0)),
        )
        for _ in range(n)
    ]


@pytest.mark.parametrize("sign", [-1.0, 1.0])
def test_joint_iterates_match_dense_admm(sign):
    parts = _parts(3, channels=2)
    cfg = SolverConfig(kernel="linear", C=50.0, delta=0.3, beta=0.2, penalty_sign=sign, tau=1e-30)
    sols = solve_joint(parts, cfg, max_iter=4)
    states = dense_admm(
        [p.x for p in parts], parts[0].y, [idft2(p.alpha_prev).ravel() for p in parts],
        [p.omega for p in parts], cfg.C, cfg.delta, cfg.beta, sign, 4,
    )
    for s, (a, b) in zip(sols, states[-1]):
        np.testing.assert_allclose(idft2(s.alpha_hat).ravel(), a, rtol=1e-8, atol=1e-10)
        assert s.b == pytest.approx(b, rel=1e-10)


def test_single_part_fixed_point_matches_standalone():
    part = _parts(1, shape=(6, 6), channels=1, prev=False)[0]
    # small C keeps the contraction fast enough to reach a true fixed point
    cfg = SolverConfig(kernel="linear", C=1.0, delta=0.0, beta=0.0, tau=1e-11)
    sol = solve_joint([part], cfg, max_iter=5000)[0]
    assert sol.history[-1] < cfg.tau
    # fixed point of the plain SVM iteration
    K = gram(part.x)
    y = part.y.ravel()
    a = idft2(sol.alpha_hat).ravel()
    v = np.maximum(y * (0.5 * K @ a + sol.b) - 1, 0)
    q = y + y * v
    np.testing.assert_allclose(q, sol.q.ravel(), atol=1e-6)
    np.testing.assert_allclose(np.linalg.solve(0.5 * K + np.eye(36) / (2 * cfg.C), q - q.mean()), a, atol=1e-6)


def test_identical_parts_stay_identical():
    x = rng.standard_normal((6, 6, 3))
    y = make_labels((6, 6))
    parts = [PartTrainingInput(x.copy(), y) for _ in range(4)]
    cfg = SolverConfig(penalty_sign=1.0)
    sols = solve_joint(parts, cfg, max_iter=5)
    root = update_alpha_r([s.alpha_hat for s in sols], [1] * 4)
    for s in sols:
        np.testing.assert_allclose(s.alpha_hat, sols[0].alpha_hat, atol=0)
        np.testing.assert_allclose(s.alpha_hat, root, rtol=1e-12)


def test_part_order_symmetry():
    parts = _parts(3, shape=(6, 6), channels=3)
    cfg = SolverConfig(penalty_sign=1.0)
    a = solve_joint(parts, cfg)
    perm = [2, 0, 1]
    b = solve_joint([parts[k] for k in perm], cfg)
    for k, j in enumerate(perm):
        np.testing.assert_allclose(b[k].alpha_hat, a[j].alpha_hat, rtol=1e-10, atol=1e-12)


def test_v_nonnegative_and_q_consistent():
    parts = _parts(2, shape=(6, 6), channels=3)
    sols = solve_joint(parts, SolverConfig(penalty_sign=1.0), max_iter=5)
    for p, s in zip(parts, sols):
        assert np.all(s.v >= 0)
        np.testing.assert_allclose(s.q, p.y + p.y * s.v)
        assert s.b == pytest.approx(s.q.mean())


def test_solve_joint_errors():
    with pytest.raises(ValueError):
        solve_joint([], SolverConfig())
    a = PartTrainingInput(np.zeros((4, 4)), np.zeros((4, 4)))
    b = PartTrainingInput(np.zeros((5, 5)), np.zeros((5, 5)))
    with pytest.raises(ValueError):
        solve_joint([a, b], SolverConfig())
