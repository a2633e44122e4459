"""Sampled Hamilton-Jacobi checks for unconstrained, forced and constrained problems.

Each check evaluates residuals on a tensor grid and reports the worst point.
Residuals are divided by ``1 + |gamma|`` at each point; the raw maximum is
kept alongside.

Run with ``python demos/hj_verification.py``.
"""

import numpy as np

from nhhj import (
    SampleGrid,
    build_model,
    check_forced,
    check_nonholonomic,
    check_nonholonomic_lagrangian,
    check_unconstrained,
    theorem_equivalence_test,
)

# %% unconstrained: the energy-level momentum of an oscillator
osc = build_model("oscillator")
for name, gamma in osc.candidates.items():
    report = check_unconstrained(osc.system, gamma, osc.default_grid)
    print(f"oscillator/{name}\n{report.summary()}")

# %% forced: p(q) = sqrt(2 k q) under a constant force, then with the force doubled
for force_k in (1.0, 2.0):
    m = build_model("forced1d", {"force_k": force_k})
    report = check_forced(m.system, m.force, m.candidates["sqrt"], m.default_grid)
    hj = report["hj_equation"]
    print(f"forced1d force_k={force_k}: {'PASS' if report.passed else 'FAIL'} "
          f"(normalized {hj.residual:.3e}, raw {hj.raw_residual:.3e})")

# %% nonholonomic: image, ideal and annihilator conditions on the robot
robot = build_model("robot")
grid = robot.default_grid
for name, gamma in robot.candidates.items():
    report = check_nonholonomic(robot.system, robot.constraints, gamma, grid)
    worst = max(report.conditions, key=lambda c: c.residual)
    print(f"robot/{name}: {'PASS' if report.passed else 'FAIL'}; worst {worst.condition} "
          f"{worst.residual:.2e} at (x, y, theta, psi) = {robot.to_user(worst.worst_point)}")

# %% the same candidates checked from the tangent side
curved = build_model("curved")
for name, X in curved.tangent_candidates.items():
    report = check_nonholonomic_lagrangian(curved.system, curved.constraints, X, curved.default_grid)
    print(f"curved/{name}\n{report.summary()}")

# %% a passing candidate's integral curves are constrained motions
q0 = robot.from_user([0.3, -0.2, 0.0, 0.5])
for name in ("gamma3", "gamma2_perturbed"):
    dev = theorem_equivalence_test(robot.system, robot.constraints, robot.candidates[name], q0, 1e-3, 2000)
    print(f"{name}: |gamma(sigma(t)) - constrained motion| = {dev:.2e}")

# %% a custom grid; bounds per axis in internal order (theta, psi, x, y)
small = SampleGrid([0.0, -1.0, -1.0, -1.0], [np.pi, 1.0, 1.0, 1.0], [4, 3, 3, 3])
print("gamma3 on a small grid:", check_nonholonomic(robot.system, robot.constraints,
                                                    robot.candidates["gamma3"], small).passed)
