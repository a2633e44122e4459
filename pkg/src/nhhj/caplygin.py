"""Čaplygin systems: constraints given by an Ehresmann connection.

Coordinates are ordered ``(base block q^a, fiber block q^i)``. The
connection is described by its Christoffel components ``Gamma^i_a(q)``; the
horizontal lift of a base velocity ``u`` is ``(u, -Gamma u)`` and the
constraint 1-forms are ``mu^i = dq^i + Gamma^i_a dq^a``.

Reduction replaces the constrained system on ``Q`` by an unconstrained one on
the base, with metric ``M* = H^T M H`` (``H = [I; -Gamma]``) and the
gyroscopic force ``alpha*_a = p_i u^b R^i_ab`` built from the curvature.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import ScalarField, Trajectory, VectorField, fd_jacobian
from .errors import InvarianceViolation, NotProjectable
from .hamilton_jacobi import (
    SampleGrid,
    check_forced,
    check_nonholonomic_lagrangian,
)
from .mechanics import (
    MechanicalSystem,
    SemibasicForce,
    TangentState,
    integrate_hamiltonian,
    legendre,
)
from .nonholonomic import ConstraintSet, HorizontalFrame, integrate_nonholonomic

INVARIANCE_TOL = 1e-8
PROJECTABILITY_TOL = 1e-8


class EhresmannConnection:
    """Connection on a fibration with ``base_dim`` base and ``fiber_dim`` fiber coordinates.

    Parameters
    ----------
    christoffel : callable
        ``q -> Gamma`` of shape ``(fiber_dim, base_dim)``.
    dchristoffel : callable, optional
        ``q -> dGamma`` with ``dGamma[i, a, B] = dGamma^i_a / dq^B`` over all
        ``n`` coordinates. Finite differences otherwise.
    """

    def __init__(self, base_dim: int, fiber_dim: int, christoffel: Callable,
                 dchristoffel: Optional[Callable] = None, name: str = ""):
        self.base_dim = base_dim
        self.fiber_dim = fiber_dim
        self.christoffel = christoffel
        self.dchristoffel = dchristoffel
        self.name = name

    @property
    def dim(self):
        return self.base_dim + self.fiber_dim

    def gamma(self, q):
        G = np.asarray(self.christoffel(np.asarray(q, dtype=float)), dtype=float)
        return G.reshape(self.fiber_dim, self.base_dim)

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        if self.dchristoffel is not None:
            return np.asarray(self.dchristoffel(q), dtype=float).reshape(self.fiber_dim, self.base_dim, self.dim)
        return fd_jacobian(self.gamma, q)

    def lift_matrix(self, q):
        """``H = [I; -Gamma]``, mapping base velocities to horizontal velocities."""
        return np.vstack([np.eye(self.base_dim), -self.gamma(q)])

    def lift(self, q, u):
        return self.lift_matrix(q) @ np.asarray(u, dtype=float)

    def constraints(self) -> ConstraintSet:
        """Constraint rows ``(Gamma | I)`` of the horizontal distribution."""
        k, m, n = self.base_dim, self.fiber_dim, self.dim

        def phi(q):
            return np.hstack([self.gamma(q), np.eye(m)])

        def dphi(q):
            d = np.zeros((m, n, n))
            d[:, :k, :] = self.derivative(q)
            return d

        return ConstraintSet(phi, m, n, dphi=dphi, name=f"horizontal({self.name})")

    def horizontal_frame(self) -> HorizontalFrame:
        """Frame of lifted base coordinate fields, ``Z_a = d_a - Gamma^i_a d_i``."""
        return HorizontalFrame(self.constraints(), frame=lambda q: self.lift_matrix(q).T)


def horizontal_project(conn: EhresmannConnection, s: TangentState) -> TangentState:
    """Keep base velocities, replace fiber velocities by ``-Gamma u``."""
    k = conn.base_dim
    return TangentState(s.q, conn.lift(s.q, s.v[:k]))


def curvature(conn: EhresmannConnection, q):
    """Curvature components ``R[i, a, b]``.

    ``R^i_ab = d_b Gamma^i_a - d_a Gamma^i_b
               + Gamma^j_a d_j Gamma^i_b - Gamma^j_b d_j Gamma^i_a``
    where ``d_j`` differentiates along fiber coordinate ``j``.
    """
    k = conn.base_dim
    G = conn.gamma(q)
    dG = conn.derivative(q)
    dbase = dG[:, :, :k]
    dfib = dG[:, :, k:]
    return (
        dbase
        - np.transpose(dbase, (0, 2, 1))
        + np.einsum("ja,ibj->iab", G, dfib)
        - np.einsum("jb,iaj->iab", G, dfib)
    )


@dataclass
class ReducedSystem:
    """Unconstrained base system ``(L*, alpha*)`` evaluated at a reference fiber point."""

    system: MechanicalSystem
    force: SemibasicForce
    reference_fiber: np.ndarray
    connection: EhresmannConnection
    full_system: MechanicalSystem

    def full_point(self, qa):
        return np.concatenate([np.asarray(qa, dtype=float), self.reference_fiber])

    def alpha(self, qa, u):
        return self.force.alpha(self.system, qa, u)

    def lagrangian(self, qa, u):
        return self.system.L(qa, u)


def reduced_force(sysQ: MechanicalSystem, conn: EhresmannConnection, reference_fiber):
    """``alpha*_a(q^a, u) = (dL/dqdot^i) u^b R^i_ab`` at the horizontal velocity."""
    k = conn.base_dim
    ref = np.asarray(reference_fiber, dtype=float)

    def alpha(qa, u):
        q = np.concatenate([qa, ref])
        p = sysQ.metric(q) @ conn.lift(q, u)
        return np.einsum("i,b,iab->a", p[k:], u, curvature(conn, q))

    return SemibasicForce(tangent=alpha)


def _invariance_check(sysQ, conn, reference_fiber, samples=8, seed=0):
    rng = np.random.default_rng(seed)
    k, m = conn.base_dim, conn.fiber_dim
    for _ in range(samples):
        qa = rng.uniform(-1.0, 1.0, k)
        u = rng.uniform(-1.0, 1.0, k)
        other = reference_fiber + rng.uniform(-1.0, 1.0, m)
        vals = []
        for fib in (reference_fiber, other):
            q = np.concatenate([qa, fib])
            vals.append(sysQ.L(q, conn.lift(q, u)))
        if abs(vals[0] - vals[1]) > INVARIANCE_TOL * max(1.0, abs(vals[0])):
            raise InvarianceViolation(
                f"L on horizontal lifts differs between fibers ({vals[0]!r} vs {vals[1]!r}) at base {qa}"
            )


def reduce(
    sysQ: MechanicalSystem,
    conn: EhresmannConnection,
    reference_fiber=None,
    check_invariance: bool = True,
) -> ReducedSystem:
    """Reduced lagrangian ``L*`` and force ``alpha*`` of a Čaplygin system.

    Raises
    ------
    InvarianceViolation
        If ``L`` restricted to horizontal velocities depends on the fiber
        point (two-fiber sampling).
    """
    k, m = conn.base_dim, conn.fiber_dim
    ref = np.zeros(m) if reference_fiber is None else np.asarray(reference_fiber, dtype=float)
    if check_invariance:
        _invariance_check(sysQ, conn, ref)
    full = lambda qa: np.concatenate([np.asarray(qa, dtype=float), ref])

    def metric(qa):
        q = full(qa)
        H = conn.lift_matrix(q)
        M = H.T @ sysQ.metric(q) @ H
        return 0.5 * (M + M.T)

    dmetric = None
    if sysQ.metric_derivative is not None and conn.dchristoffel is not None:
        def dmetric(qa):
            q = full(qa)
            H = conn.lift_matrix(q)
            M = sysQ.metric(q)
            dM = np.asarray(sysQ.metric_derivative(q), dtype=float)[:k]
            dG = conn.derivative(q)[:, :, :k]
            out = np.empty((k, k, k))
            for c in range(k):
                dH = np.vstack([np.zeros((k, k)), -dG[:, :, c]])
                out[c] = dH.T @ M @ H + H.T @ dM[c] @ H + H.T @ M @ dH
            return out

    pot = sysQ.potential
    grad = None
    if pot.gradient is not None:
        grad = lambda qa: np.asarray(pot.gradient(full(qa)), dtype=float)[:k]
    potential = ScalarField(lambda qa: pot(full(qa)), gradient=grad, name="reduced_potential")
    chart = sysQ.chart.sub(range(k))
    red_sys = MechanicalSystem(chart, metric, potential, metric_derivative=dmetric,
                               name=f"{sysQ.name}*")
    return ReducedSystem(red_sys, reduced_force(sysQ, conn, ref), ref, conn, sysQ)


def reduced_dynamics(red: ReducedSystem, s0: TangentState, dt: float, steps: int) -> Trajectory:
    """Integrate the forced reduced Hamilton equations from a base tangent state.

    States in the returned trajectory are ``(q^a, p_a)``.
    """
    return integrate_hamiltonian(red.system, legendre(red.system, s0), dt, steps, force=red.force)


def equivalence_test(
    sysQ: MechanicalSystem,
    conn: EhresmannConnection,
    s0: TangentState,
    dt: float,
    steps: int,
    reduced: Optional[ReducedSystem] = None,
) -> float:
    """Max deviation between the projected constrained motion and the reduced motion.

    ``s0`` is made horizontal first. Compares base positions and velocities.
    """
    k = conn.base_dim
    s0 = horizontal_project(conn, s0)
    red = reduced or reduce(sysQ, conn, reference_fiber=s0.q[k:])
    cons = conn.constraints()
    nh = integrate_nonholonomic(sysQ, cons, legendre(sysQ, s0), dt, steps)
    full_v = np.array([sysQ.velocity(q, p) for q, p in zip(nh.q, nh.p)])
    rt = reduced_dynamics(red, TangentState(s0.q[:k], s0.v[:k]), dt, steps)
    rq, rp = rt.states[:, :k], rt.states[:, k:]
    red_v = np.array([red.system.velocity(q, p) for q, p in zip(rq, rp)])
    return float(max(np.max(np.abs(nh.q[:, :k] - rq)), np.max(np.abs(full_v[:, :k] - red_v))))


def horizontal_lift_field(conn: EhresmannConnection, Y) -> VectorField:
    """``Y^H(q) = (Y(q^a), -Gamma(q) Y(q^a))``."""
    k = conn.base_dim
    return VectorField(lambda q: conn.lift(q, Y(q[:k])), name=f"{getattr(Y, 'name', 'Y')}^H")


def lift_hj_solution(
    sysQ: MechanicalSystem,
    conn: EhresmannConnection,
    Y,
    grid: SampleGrid,
    constraints: Optional[ConstraintSet] = None,
    frame: Optional[HorizontalFrame] = None,
    tolerance: Optional[float] = None,
):
    """Lift a base field horizontally and check it against the constrained HJ problem.

    Returns ``(Y^H, report)``. The report's ``ideal`` entry is the hypothesis
    that ``d(FL o Y^H)`` lies in the ideal of the horizontal annihilator.
    """
    cons = constraints or conn.constraints()
    YH = horizontal_lift_field(conn, Y)
    report = check_nonholonomic_lagrangian(sysQ, cons, YH, grid, frame, tolerance)
    return YH, report


def check_projectable(conn: EhresmannConnection, X, points, offsets=None, seed=0):
    """Raise NotProjectable if the base components of ``X`` vary along fibers."""
    k, m = conn.base_dim, conn.fiber_dim
    if offsets is None:
        offsets = np.random.default_rng(seed).uniform(-2.0, 2.0, (3, m))
    for q in np.atleast_2d(points):
        base = X(q)[:k]
        for off in offsets:
            shifted = q.copy()
            shifted[k:] = shifted[k:] + off
            dev = np.max(np.abs(X(shifted)[:k] - base))
            if dev > PROJECTABILITY_TOL * max(1.0, np.max(np.abs(base))):
                raise NotProjectable(f"base components change by {dev:.3e} along the fiber at q={q}")


def project_hj_solution(
    sysQ: MechanicalSystem,
    conn: EhresmannConnection,
    X,
    grid: SampleGrid,
    reduced: Optional[ReducedSystem] = None,
    tolerance: Optional[float] = None,
):
    """Project a field on ``Q`` to the base and check the reduced forced HJ problem.

    ``grid`` lives on ``Q``; its points drive the projectability test and its
    base axes form the grid for the reduced checks. Returns ``(Y, report)``.
    """
    k = conn.base_dim
    check_projectable(conn, X, grid.points())
    red = reduced or reduce(sysQ, conn)
    Y = VectorField(lambda qa: X(red.full_point(qa))[:k], name=f"proj({getattr(X, 'name', 'X')})")
    gamma = lambda qa: red.system.metric(qa) @ Y(qa)
    report = check_forced(red.system, red.force, gamma, grid.select(range(k)), tolerance)
    report.kind = "reduced_forced"
    return Y, report
