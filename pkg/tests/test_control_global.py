import numpy as np
import pytest
from hypothesis import given, strategies as st

from bearingform import fixtures as fx
from bearingform.control_global import (
    Equilibrium,
    classify_equilibrium,
    collision_bound,
    control_velocity,
    degree_of_rigidity,
    jacobian,
    lyapunov_constants,
    reflected_configuration,
    theta,
)
from bearingform.errors import CollisionError, DegenerateError, ValidationError
from bearingform.graph import build_graph
from bearingform.target import BearingConstraints, compute_target


def test_zero_velocity_at_target_and_reflection():
    c = fx.constraints("square")
    p = fx.square()[1]
    assert np.linalg.norm(control_velocity(p, c)) <= 1e-12
    assert np.linalg.norm(control_velocity(reflected_configuration(p), c)) <= 1e-12


def test_pair_velocity_by_hand():
    c = BearingConstraints(build_graph(2, [(1, 2)]), [[1.0, 0.0]])
    v = control_velocity(np.array([[0.0, 1.0], [0.0, -1.0]]), c)
    np.testing.assert_allclose(v, [[-1, 0], [1, 0]], atol=1e-15)


def test_velocity_reports_collision():
    c = fx.constraints("square")
    p = fx.square()[1].copy()
    p[1] = p[0]
    with pytest.raises(CollisionError) as err:
        control_velocity(p, c)
    assert err.value.edge == (1, 2)
    assert isinstance(err.value, DegenerateError)


def _naive_velocity(p, c):
    # v_i = -sum_j P(g_ij) g*_ij, written per agent
    v = np.zeros_like(p)
    for i in range(1, c.graph.n + 1):
        for j in c.graph.neighbors(i):
            e = p[j - 1] - p[i - 1]
            g = e / np.linalg.norm(e)
            gs = c.bearing(i, j)
            v[i - 1] -= gs - g * (g @ gs)
    return v


@given(st.integers(0, 10_000), st.sampled_from(["square", "octagon", "cube", "hexagonal_pyramid"]))
def test_velocity_properties(seed, name):
    c = fx.constraints(name)
    rng = np.random.default_rng(seed)
    p = rng.uniform(-2, 2, size=(c.graph.n, c.d))
    v = control_velocity(p, c)
    np.testing.assert_allclose(v, _naive_velocity(p, c), atol=1e-12)
    deg = np.array([c.graph.degree(i) for i in range(1, c.graph.n + 1)])
    assert np.all(np.linalg.norm(v, axis=1) <= deg + 1e-12)
    assert np.linalg.norm(v.sum(axis=0)) <= 1e-12
    assert abs(np.sum(p * v)) <= 1e-10 * max(1.0, np.linalg.norm(p))


def _fd_jacobian(p, c, h=1e-6):
    n, d = p.shape
    J = np.zeros((n * d, n * d))
    for a in range(n * d):
        dp = np.zeros(n * d)
        dp[a] = h
        J[:, a] = ((control_velocity(p + dp.reshape(n, d), c) - control_velocity(p - dp.reshape(n, d), c)) / (2 * h)).ravel()
    return J


@pytest.mark.parametrize("seed", range(4))
def test_jacobian_matches_finite_differences(seed):
    c = fx.constraints("cube")
    p = np.random.default_rng(seed).uniform(-1, 1, size=(8, 3))
    assert np.max(np.abs(jacobian(p, c) - _fd_jacobian(p, c))) <= 1e-5


def test_jacobian_block_structure():
    c = fx.constraints("square")
    p = np.random.default_rng(1).uniform(-1, 1, size=(4, 2))
    A = jacobian(p, c)
    # agents 2 and 4 are not neighbours
    assert np.all(A[2:4, 6:8] == 0) and np.all(A[6:8, 2:4] == 0)
    for i in range(4):
        row = sum(A[2 * i:2 * i + 2, 2 * j:2 * j + 2] for j in range(4))
        assert np.max(np.abs(row)) <= 1e-12


def test_jacobian_at_the_two_equilibria():
    c = fx.constraints("square")
    p = fx.square()[1]
    A0 = jacobian(p, c)
    Ar = jacobian(reflected_configuration(p), c)
    np.testing.assert_allclose(A0, -Ar, atol=1e-10)
    np.testing.assert_allclose(Ar, Ar.T, atol=1e-10)
    lam = np.linalg.eigvalsh(Ar)
    assert lam.min() >= -1e-10 and lam.max() > 0


def test_classify_equilibrium():
    ps = fx.square()[1]
    assert classify_equilibrium(ps, ps) is Equilibrium.DESIRED
    assert classify_equilibrium(2 * ps.mean(axis=0) - ps, ps) is Equilibrium.REFLECTED
    assert classify_equilibrium(ps * 3.0, ps) is Equilibrium.NONE


def test_collision_bound():
    ps = fx.square()[1]
    assert collision_bound(ps, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert collision_bound(ps, 0.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValidationError):
        collision_bound(ps, 1.0)
    with pytest.raises(ValidationError):
        collision_bound(ps, -0.1)


def test_degree_of_rigidity():
    sq = degree_of_rigidity(fx.constraints("square"))
    assert sq.ibr and sq.value > 1e-3
    cyc = degree_of_rigidity(fx.constraints("four_cycle"))
    assert not cyc.ibr and cyc.value <= 1e-10
    # bearings only: a scaled and shifted target gives the same constraints and eigenvalue
    g, p = fx.square()
    again = degree_of_rigidity(BearingConstraints.from_configuration(g, 3.7 * p + 1.0))
    assert abs(again.value - sq.value) <= 1e-12


def test_theta_and_constants():
    ps = fx.square()[1]
    r = ps - ps.mean(axis=0)
    assert theta(-2 * r, r) == pytest.approx(0.0, abs=1e-7)
    assert theta(np.zeros_like(r), r) == pytest.approx(np.pi / 2)
    alpha, K = lyapunov_constants(ps, fx.constraints("square"), np.pi / 2)
    assert alpha == pytest.approx(1.0 / (4 * 3 * 0.5), rel=1e-12)   # min edge 1, s^2 = 1/2
    assert K == pytest.approx(2 * alpha * degree_of_rigidity(fx.constraints("square")).value)


def test_target_of_reflected_start_is_reflection_of_start():
    # starting at the reflected equilibrium, the target is its own reflection
    c = fx.constraints("square")
    ps = fx.square()[1]
    sol = compute_target(c, reflected_configuration(ps))
    np.testing.assert_allclose(sol.p_star, ps, atol=1e-10)
