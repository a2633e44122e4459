import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhhj.calculus import Chart, OneFormField, ScalarField, VectorField
from nhhj.errors import ConfigError, FrameError
from nhhj.hamilton_jacobi import (
    ConditionResult,
    HJReport,
    SampleGrid,
    check_forced,
    check_nonholonomic,
    check_nonholonomic_lagrangian,
    check_unconstrained,
    classical_ansatz,
    default_tolerance,
    hj_flow,
    theorem_equivalence_test,
)
from nhhj.mechanics import CotangentState, MechanicalSystem, SemibasicForce
from nhhj.models import build_model
from nhhj.nonholonomic import ConstraintSet, HorizontalFrame, integrate_nonholonomic

CUBE = SampleGrid.uniform(4, -1.0, 1.0, 5)


def free(n):
    return MechanicalSystem(Chart.from_names(*[f"q{i}" for i in range(n)]), lambda q: np.eye(n),
                            ScalarField(lambda q: 0.0, gradient=lambda q: np.zeros(n)),
                            metric_derivative=lambda q: np.zeros((n, n, n)))


def test_grid_parse_and_points():
    g = SampleGrid.parse("0:1:3, -1:1:2")
    assert g.dim == 2 and g.size == 6
    pts = g.points()
    np.testing.assert_array_equal(pts[:3], [[0.0, -1.0], [0.0, 1.0], [0.5, -1.0]])
    assert SampleGrid.parse("2:5:1").points().tolist() == [[2.0]]


@pytest.mark.parametrize("text", ["0:1", "a:1:3", "0:1:0", "0:inf:3", "0:1:3.5"])
def test_grid_parse_rejects(text):
    with pytest.raises(ConfigError):
        SampleGrid.parse(text)


def test_grid_cap_and_extra_points():
    with pytest.raises(ConfigError):
        SampleGrid.uniform(6, 0.0, 1.0, 10)
    with pytest.raises(ConfigError):
        SampleGrid()
    g = SampleGrid([0.0], [1.0], [2], extra_points=[[0.25]])
    np.testing.assert_array_equal(g.points().ravel(), [0.0, 1.0, 0.25])
    s = SampleGrid([0.0, 5.0], [1.0, 6.0], [2, 3]).select([1, 0])
    assert s.counts == [3, 2] and s.lower == [5.0, 0.0]


def test_constant_covector_solves_free_problem():
    r = check_unconstrained(free(2), lambda q: np.array([1.5, -0.5]), SampleGrid.uniform(2, -1, 1, 5))
    assert r.passed and r.max_residual() < 1e-8
    assert r.kind == "unconstrained"


def test_oscillator_exact_form_with_varying_energy_fails():
    osc = build_model("oscillator")
    r = check_unconstrained(osc.system, osc.candidates["dW_q2"], osc.default_grid)
    assert not r.passed
    assert r["closed"].passed
    # d(H o dW) = 5q, largest at |q| = 1
    assert r["hj_equation"].raw_residual == pytest.approx(5.0, rel=1e-6)
    assert r["hj_equation"].residual > 0.1


def test_non_closed_form_fails_closedness():
    r = check_unconstrained(free(2), lambda q: np.array([q[1], 0.0]), SampleGrid.uniform(2, -1, 1, 5))
    assert not r["closed"].passed
    assert r["closed"].raw_residual == pytest.approx(1.0, abs=1e-8)


def test_zero_force_equals_unconstrained():
    osc = build_model("oscillator")
    zero = SemibasicForce(cotangent=lambda q, p: np.zeros(1))
    g = osc.candidates["energy_level"]
    a = check_forced(osc.system, zero, g, osc.default_grid)
    b = check_unconstrained(osc.system, g, osc.default_grid)
    assert [c.residual for c in a.conditions] == [c.residual for c in b.conditions]
    assert [c.worst_point for c in a.conditions] == [c.worst_point for c in b.conditions]
    assert a.passed and b.passed


def test_forced_example_and_doubled_force():
    ok = build_model("forced1d")
    r = check_forced(ok.system, ok.force, ok.candidates["sqrt"], ok.default_grid)
    assert r.passed and r.max_residual() <= 1e-6
    bad = build_model("forced1d", {"force_k": 2.0})
    rb = check_forced(bad.system, bad.force, bad.candidates["sqrt"], bad.default_grid)
    assert not rb.passed
    # unnormalized residual is the force mismatch
    assert rb["hj_equation"].raw_residual == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", ["gamma1", "gamma2", "gamma3"])
def test_robot_solutions_pass_on_cube(robot, name):
    r = check_nonholonomic(robot.system, robot.constraints, robot.candidates[name], CUBE)
    assert r.passed
    assert r.names() == ["image", "ideal", "annihilator"]
    assert r.max_residual() < 1e-8


def test_gamma2_is_not_closed(robot):
    r = check_unconstrained(robot.system, robot.candidates["gamma2"], CUBE)
    assert not r["closed"].passed


def test_doubled_dx_fails_image(robot):
    r = check_nonholonomic(robot.system, robot.constraints, robot.candidates["gamma2_doubled_dx"], CUBE)
    assert not r.passed
    assert r["image"].residual > 0 or r["annihilator"].residual > 1e-2


@pytest.mark.parametrize("i", [1, 2, 3])
def test_lifted_fields_are_the_robot_solutions(robot, i):
    X = robot.tangent_candidates[f"Y{i}H"]
    gamma = robot.candidates[f"gamma{i}"]
    for q in CUBE.points()[::37]:
        np.testing.assert_allclose(robot.system.metric(q) @ X(q), gamma(q), atol=1e-15)
    r = check_nonholonomic_lagrangian(robot.system, robot.constraints, X, robot.default_grid)
    assert r.passed and r.kind == "nonholonomic_lagrangian"
    assert "lagrangian_energy" in r.names()


def test_lagrangian_check_rejects_random_field(robot):
    X = VectorField(lambda q: np.array([np.sin(q[2]), q[0], 1.0, q[3] ** 2]))
    assert not check_nonholonomic_lagrangian(robot.system, robot.constraints, X, robot.default_grid).passed


def test_lagrangian_check_without_constraints():
    osc = build_model("oscillator")
    X = VectorField(lambda q: np.sqrt(4.0 - q**2))
    r = check_nonholonomic_lagrangian(osc.system, ConstraintSet.empty(1), X, osc.default_grid)
    assert r.passed


def test_hj_flow_gamma1_and_gamma2(robot):
    q0 = robot.from_user([0.3, -0.2, 0.0, 0.5])
    t1 = hj_flow(robot.system, robot.candidates["gamma1"], q0, 1e-2, 300)
    u = robot.to_user(t1.states)
    t = t1.times
    np.testing.assert_allclose(u, np.column_stack([0.3 + 0 * t, -0.2 + 0 * t, t, 0.5 + 0 * t]), atol=1e-12)
    t2 = hj_flow(robot.system, robot.candidates["gamma2"], q0, 1e-2, 300)
    u = robot.to_user(t2.states)
    np.testing.assert_allclose(u, np.column_stack([t + 0.3, -0.2 + 0 * t, 0 * t, t + 0.5]), atol=1e-12)
    t0 = hj_flow(robot.system, lambda q: np.zeros(4), q0, 1e-2, 10)
    np.testing.assert_array_equal(t0.states, np.tile(q0, (11, 1)))


@pytest.mark.parametrize("name", ["gamma1", "gamma2", "gamma3"])
def test_passing_candidates_have_small_equivalence_deviation(robot, name):
    r = check_nonholonomic(robot.system, robot.constraints, robot.candidates[name], CUBE, tolerance=1e-8)
    assert r.passed
    dev = theorem_equivalence_test(robot.system, robot.constraints, robot.candidates[name], np.zeros(4), 1e-3, 1000)
    assert dev <= 1e-5


def test_equivalence_negative_control(robot):
    dev = theorem_equivalence_test(robot.system, robot.constraints, robot.candidates["gamma2_perturbed"],
                                   np.zeros(4), 1e-3, 1000)
    assert dev > 1e-2


def test_equivalence_accepts_precomputed_motion(robot):
    q0 = np.array([0.0, 0.1, 0.2, 0.3])
    gamma = robot.candidates["gamma3"]
    motion = integrate_nonholonomic(robot.system, robot.constraints, CotangentState(q0, gamma(q0)), 1e-3, 200)
    fresh = theorem_equivalence_test(robot.system, robot.constraints, gamma, q0, 1e-3, 200)
    reused = theorem_equivalence_test(robot.system, robot.constraints, gamma, q0, 1e-3, 200, motion=motion)
    assert reused == fresh
    with pytest.raises(ValueError):
        theorem_equivalence_test(robot.system, robot.constraints, gamma, q0, 1e-3, 100, motion=motion)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_exact_forms_pass_the_ideal_condition(a, b, c):
    # S = a sin(theta) x + b psi y^2 + c x y
    dS = lambda q: np.array([a * np.cos(q[0]) * q[2], b * q[3] ** 2, a * np.sin(q[0]) + c * q[3],
                             2 * b * q[1] * q[3] + c * q[2]])
    robot = build_model("robot")
    grid = SampleGrid.uniform(4, -1.0, 1.0, 3)
    r = check_nonholonomic(robot.system, robot.constraints, dS, grid)
    assert r["ideal"].residual < 1e-6


def recombined_frame(cons, seed):
    base = HorizontalFrame(cons)

    def frame(q):
        # smooth invertible recombination with moderate condition number
        A = np.eye(2) + 0.3 * np.array([[np.sin(q[0] + seed), np.cos(q[1])], [q[2] / 2, -np.sin(q[3])]])
        assert np.linalg.cond(A) <= 10
        return A @ base(q)

    return HorizontalFrame(cons, frame=frame)


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("name,verdict", [("gamma2", True), ("gamma3", True), ("gamma2_perturbed", False)])
def test_frame_independence(robot, seed, name, verdict):
    frame = recombined_frame(robot.constraints, seed)
    r = check_nonholonomic(robot.system, robot.constraints, robot.candidates[name], robot.default_grid, frame=frame)
    assert r["annihilator"].passed is verdict
    assert r.passed is verdict


def test_bad_frame_raises(robot):
    frame = HorizontalFrame(robot.constraints, frame=lambda q: np.eye(4)[:2])
    with pytest.raises(FrameError):
        check_nonholonomic(robot.system, robot.constraints, robot.candidates["gamma1"], robot.default_grid, frame=frame)


def test_classical_ansatz_lands_in_constraint_submanifold(robot):
    dS = lambda q: np.array([q[1], q[0], q[3], q[2]])
    gamma = classical_ansatz(robot.system, robot.constraints, dS)
    r = check_nonholonomic(robot.system, robot.constraints, gamma, CUBE)
    assert r["image"].passed


def test_default_tolerance():
    assert default_tolerance(build_model("robot").system) == 1e-6
    assert default_tolerance(build_model("robot", analytic=False).system) == 1e-4


def test_fd_only_robot_still_verifies():
    r = build_model("robot", analytic=False)
    rep = check_nonholonomic(r.system, r.constraints, r.candidates["gamma3"], r.default_grid)
    assert rep.passed
    assert rep["image"].tolerance == 1e-4


def test_report_structure_and_ties():
    pts = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 1.0]])
    from nhhj.hamilton_jacobi import _condition

    c = _condition("x", pts, [1.0, 1.0, 1.0], np.ones(3), 0.5)
    assert c.worst_point == (0.0, 1.0)
    assert not c.passed
    rep = HJReport("k", [c, ConditionResult("y", 0.0, (0.0, 0.0), 1e-6, True, 0.0)])
    d = rep.to_dict(point_map=lambda p: p[::-1])
    assert d["pass"] is False
    assert set(d["conditions"][0]) == {"condition", "residual", "raw_residual", "worst_point", "tolerance", "pass"}
    assert d["conditions"][0]["worst_point"] == [1.0, 0.0]
    assert "FAIL" in rep.summary()
    with pytest.raises(KeyError):
        rep["nope"]
