"""Čaplygin reduction of the robot and of a system with a curved connection.

Coordinates split into base (theta, psi) and fiber (x, y). The constraints
say the fiber velocity is ``-Gamma(q) u`` for a base velocity ``u``. The
reduced system lives on the base with metric ``M* = H^T M H`` and a
gyroscopic force ``alpha*`` built from the connection's curvature.

Run with ``python demos/caplygin_reduction.py``.
"""

import numpy as np

from nhhj import (
    TangentState,
    build_model,
    curvature,
    equivalence_test,
    lift_hj_solution,
    project_hj_solution,
    reduce,
)

# %% robot: diagonal reduced metric, curvature, zero reduced force
robot = build_model("robot")
conn = robot.connection
red = reduce(robot.system, conn)
print("reduced metric M*(theta, psi):\n", red.system.metric(np.zeros(2)))
for theta in (0.0, np.pi / 4, np.pi / 2):
    K = curvature(conn, np.array([theta, 0.0, 0.0, 0.0]))
    print(f"theta={theta:.3f}: R^x_(theta psi)={K[0, 0, 1]:+.4f}, R^y_(theta psi)={K[1, 0, 1]:+.4f}")
print("alpha* at u=(1, 2):", red.alpha(np.array([0.4, 0.1]), np.array([1.0, 2.0])))

# %% reduced and full constrained motions agree on the base
q0 = robot.from_user([0.3, -0.2, 0.0, 0.5])
s0 = TangentState(q0, conn.lift(q0, np.array([1.0, 1.0])))
print("robot equivalence deviation:", equivalence_test(robot.system, conn, s0, 1e-3, 2000, reduced=red))

# %% curved connection: z' = c q2 q1', so alpha* does not vanish
curved = build_model("curved")
cred = reduce(curved.system, curved.connection)
rng = np.random.default_rng(0)
alpha = max(np.max(np.abs(cred.alpha(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)))) for _ in range(200))
print(f"curved: max |alpha*| over 200 samples = {alpha:.3f}")
s0 = TangentState(curved.default_q0, curved.connection.lift(curved.default_q0, np.array([1.0, 0.5])))
print("curved equivalence deviation:", equivalence_test(curved.system, curved.connection, s0, 1e-3, 2000))

# %% lift a base field to Q, check it, and project it back
for name, Y in curved.base_fields.items():
    YH, lifted = lift_hj_solution(curved.system, curved.connection, Y, curved.default_grid)
    Yb, projected = project_hj_solution(curved.system, curved.connection, YH, curved.default_grid, reduced=cred)
    qa = np.array([0.2, -0.7])
    print(f"{name}: lifted check {'PASS' if lifted.passed else 'FAIL'}, "
          f"reduced check {'PASS' if projected.passed else 'FAIL'}, "
          f"|project(lift(Y)) - Y| = {np.max(np.abs(Yb(qa) - Y(qa))):.1e}")
