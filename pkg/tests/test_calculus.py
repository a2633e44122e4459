import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhhj.calculus import (
    Chart,
    OneFormField,
    ScalarField,
    VectorField,
    d_oneform,
    exterior_derivative,
    fd_gradient,
    fd_jacobian,
    lie_bracket,
    rk4_integrate,
)
from nhhj.errors import DivergenceError, NumericalFailure

coords = st.floats(-3.0, 3.0, allow_nan=False)
points2 = st.tuples(coords, coords).map(np.array)
points3 = st.tuples(coords, coords, coords).map(np.array)


def test_chart_rejects_duplicate_names():
    with pytest.raises(ValueError):
        Chart.from_names("x", "x")


def test_chart_sub_keeps_names_and_periodicity():
    c = Chart.from_names("theta", "psi", "x", periodic=("theta",))
    s = c.sub([0, 2])
    assert s.coordinate_names == ("theta", "x")
    assert list(s.periodic_mask) == [True, False]


def test_fd_gradient_linear():
    g = fd_gradient(lambda q: q[0], np.array([2.0, 3.0]), h=1e-5)
    np.testing.assert_allclose(g, [1.0, 0.0], atol=1e-9)


def test_fd_gradient_quadratic():
    g = fd_gradient(lambda q: 0.5 * (q[0] ** 2 + q[1] ** 2), np.array([1.0, 1.0]))
    np.testing.assert_allclose(g, [1.0, 1.0], atol=1e-8)


@given(points3, st.tuples(coords, coords, coords), st.floats(-2, 2))
def test_fd_gradient_exact_on_quadratics(q, lin, c):
    A = np.array([[2.0, 0.3, -0.1], [0.3, 1.0, 0.5], [-0.1, 0.5, 3.0]])
    b = np.array(lin)
    f = lambda x: 0.5 * x @ A @ x + b @ x + c
    np.testing.assert_allclose(fd_gradient(f, q), A @ q + b, atol=1e-8 * max(1.0, np.max(np.abs(q))) ** 2)


def test_fd_gradient_uses_analytic_gradient_when_present():
    f = ScalarField(lambda q: 0.0, gradient=lambda q: np.array([7.0, 8.0]))
    np.testing.assert_array_equal(fd_gradient(f, np.zeros(2)), [7.0, 8.0])


def test_fd_gradient_non_finite_raises():
    with pytest.raises(NumericalFailure):
        fd_gradient(lambda q: float("nan") if q[0] > 0 else 0.0, np.array([0.0]))


def test_scalar_field_check_gradient(robot):
    good = ScalarField(lambda q: np.sin(q[0]) * q[1], gradient=lambda q: np.array([np.cos(q[0]) * q[1], np.sin(q[0])]))
    bad = ScalarField(good.fn, gradient=lambda q: np.array([0.0, 0.0]))
    q = np.array([0.4, 1.3])
    assert good.check_gradient(q)
    assert not bad.check_gradient(q)


def test_robot_hamiltonian_gradient_is_zero(robot):
    sysm = robot.system
    q = np.array([0.7, -0.2, 0.5, 1.1])
    p = np.array([1.0, 3.0, 0.5, -0.4])
    fd = fd_gradient(lambda x: sysm.H(x, p), q)
    np.testing.assert_allclose(fd, np.zeros(4), atol=1e-9)
    np.testing.assert_allclose(sysm.dH_dq(q, p), np.zeros(4), atol=1e-15)


def test_fd_jacobian_layout():
    F = lambda q: np.array([q[0] * q[1], q[1] ** 2, 3.0 * q[0]])
    J = fd_jacobian(F, np.array([2.0, -1.0]))
    expected = np.array([[-1.0, 2.0], [0.0, -2.0], [3.0, 0.0]])
    np.testing.assert_allclose(J, expected, atol=1e-8)


def test_lie_bracket_coordinate_fields_commute():
    X = VectorField(lambda q: np.array([1.0, 0.0]))
    Y = VectorField(lambda q: np.array([0.0, 1.0]))
    np.testing.assert_allclose(lie_bracket(X, Y, np.array([0.3, 0.4])), 0.0, atol=1e-12)


def test_lie_bracket_rotating_field():
    # coordinates (theta, x); [d_theta, cos(theta) d_x] = -sin(theta) d_x
    X = VectorField(lambda q: np.array([1.0, 0.0]))
    Y = VectorField(lambda q: np.array([0.0, np.cos(q[0])]))
    np.testing.assert_allclose(lie_bracket(X, Y, np.array([0.0, 0.0])), [0.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(lie_bracket(X, Y, np.array([np.pi / 2, 0.0])), [0.0, -1.0], atol=1e-8)


def _field(a, b):
    return VectorField(lambda q: np.array([np.sin(a * q[1]) + q[2], b * q[0] * q[2], np.cos(q[0]) - a * q[1]]))


@given(points3, st.floats(-2, 2), st.floats(-2, 2))
def test_lie_bracket_antisymmetric(q, a, b):
    X, Y = _field(a, b), _field(b, a)
    s = lie_bracket(X, Y, q) + lie_bracket(Y, X, q)
    np.testing.assert_allclose(s, 0.0, atol=1e-8)
    np.testing.assert_allclose(lie_bracket(X, X, q), 0.0, atol=1e-8)


def test_d_oneform_exact_form_vanishes():
    dS = OneFormField(lambda q: np.array([q[1], q[0]]))
    X = VectorField(lambda q: np.array([1.0, q[0]]))
    Y = VectorField(lambda q: np.array([np.sin(q[1]), 2.0]))
    assert abs(d_oneform(dS, X, Y, np.array([0.4, -1.2]))) < 1e-6


def test_d_oneform_q2_dq1():
    gamma = OneFormField(lambda q: np.array([q[1], 0.0]))
    X = VectorField(lambda q: np.array([1.0, 0.0]))
    Y = VectorField(lambda q: np.array([0.0, 1.0]))
    assert d_oneform(gamma, X, Y, np.array([0.3, 0.7])) == pytest.approx(-1.0, abs=1e-8)


@given(points3, st.floats(-2, 2), st.floats(-2, 2))
def test_d_oneform_of_exact_forms(q, a, b):
    grad = lambda x: np.array([a * np.cos(x[0]) * x[1], a * np.sin(x[0]) + b * x[2] ** 2, 2 * b * x[1] * x[2]])
    X, Y = _field(a, b), _field(b, -a)
    assert abs(d_oneform(OneFormField(grad), X, Y, q)) < 1e-6


@given(points3, st.floats(-2, 2))
def test_d_oneform_antisymmetric_and_matches_matrix(q, a):
    gamma = OneFormField(lambda x: np.array([x[1] * x[2], a * x[0] ** 2, np.sin(x[1])]))
    X, Y = _field(a, 1.0), _field(0.5, a)
    dXY = d_oneform(gamma, X, Y, q)
    assert dXY == pytest.approx(-d_oneform(gamma, Y, X, q), abs=1e-7)
    W = exterior_derivative(gamma, q)
    assert X(q) @ W @ Y(q) == pytest.approx(dXY, abs=1e-6)


def test_rk4_constant_derivative():
    tr = rk4_integrate(lambda x: np.ones(1), np.zeros(1), 0.1, 10)
    assert tr.final[0] == pytest.approx(1.0, abs=1e-14)
    assert len(tr) == 11
    np.testing.assert_allclose(tr.times, np.arange(11) * 0.1)


def test_rk4_exponential():
    tr = rk4_integrate(lambda x: x, np.ones(1), 0.01, 100)
    assert abs(tr.final[0] - np.e) < 1e-8


def test_rk4_order_ratio():
    errs = [abs(rk4_integrate(lambda x: x, np.ones(1), dt, round(1 / dt)).final[0] - np.e) for dt in (0.1, 0.05)]
    assert errs[0] / errs[1] >= 12


def test_rk4_oscillator_energy_drift():
    f = lambda x: np.array([x[1], -x[0]])
    tr = rk4_integrate(f, np.array([1.0, 0.0]), 1e-3, 10_000, observers={"E": lambda x: 0.5 * x @ x})
    E = tr.diagnostics["E"]
    assert np.max(np.abs(E - E[0])) <= 1e-10


def test_rk4_divergence_reports_last_valid():
    with pytest.raises(DivergenceError) as info:
        rk4_integrate(lambda x: x**2, np.ones(1), 0.1, 200)
    assert info.value.last_valid is not None
    assert info.value.last_valid >= 1


@pytest.mark.parametrize("dt,steps", [(0.0, 10), (-1e-3, 10), (1e-3, 0)])
def test_rk4_rejects_bad_step(dt, steps):
    with pytest.raises(ValueError):
        rk4_integrate(lambda x: x, np.ones(1), dt, steps)


def test_rk4_post_step_applied():
    tr = rk4_integrate(lambda x: np.ones(2), np.zeros(2), 0.1, 5, post_step=lambda x: np.array([x[0], 0.0]))
    assert np.all(tr.states[1:, 1] == 0.0)
