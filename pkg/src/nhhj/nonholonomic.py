"""Linear nonholonomic constraints and the constrained Hamilton equations.

Constraints are rows of a matrix ``Phi(q)`` (one 1-form ``mu^i = Phi^i_A dq^A``
per row). On the cotangent side they read ``Psi = Phi M^-1 p = 0``. The
multipliers are fixed by requiring ``d/dt Psi = 0`` along the closed loop

    qdot = M^-1 p,   pdot = -dH/dq - Phi^T lam,

which gives ``lam = C^-1 X_H(Psi)`` with the compatibility matrix
``C = Phi M^-1 Phi^T``.
"""

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .calculus import VectorField, fd_jacobian, rk4_integrate
from .errors import FrameError, NumericalFailure, SingularCompatibility
from .mechanics import CotangentState, MechanicalSystem, hamiltonian_field

RANK_TOL = 1e-10
COND_MAX = 1e12
FRAME_TOL = 1e-10


class ConstraintSet:
    """``m`` linear velocity constraints on an ``n``-dimensional chart.

    Parameters
    ----------
    phi : callable
        ``q -> Phi(q)`` of shape ``(m, n)``.
    m, n : int
    dphi : callable, optional
        ``q -> dPhi`` with ``dPhi[i, A, B] = dPhi^i_A / dq^B``; finite
        differences are used when omitted.
    """

    def __init__(self, phi: Callable, m: int, n: int, dphi: Optional[Callable] = None, name: str = ""):
        self.phi = phi
        self.m = m
        self.n = n
        self.dphi = dphi
        self.name = name

    @classmethod
    def empty(cls, n):
        return cls(lambda q: np.zeros((0, n)), 0, n, dphi=lambda q: np.zeros((0, n, n)), name="none")

    def matrix(self, q, check=True):
        P = np.asarray(self.phi(np.asarray(q, dtype=float)), dtype=float).reshape(self.m, self.n)
        if check and self.m:
            sv = np.linalg.svd(P, compute_uv=False)
            if sv[-1] <= RANK_TOL:
                raise SingularCompatibility(
                    f"constraint matrix has rank < {self.m} at q={np.asarray(q)}"
                )
        return P

    def derivative(self, q):
        """``dPhi[i, A, B] = dPhi^i_A / dq^B``."""
        q = np.asarray(q, dtype=float)
        if self.dphi is not None:
            return np.asarray(self.dphi(q), dtype=float).reshape(self.m, self.n, self.n)
        return fd_jacobian(lambda x: self.matrix(x, check=False), q)

    def annihilates(self, v, q, tol=FRAME_TOL):
        return bool(np.max(np.abs(self.matrix(q) @ v), initial=0.0) <= tol)


def null_space_frame(P):
    """Basis of ``ker P`` as rows, built by column-pivoted elimination.

    Columns are ordered by LAPACK's largest-pivot rule; the first ``m`` pivot
    columns are solved for and each remaining column contributes one frame
    vector with a unit entry in that slot.
    """
    m, n = P.shape
    if m == 0:
        return np.eye(n)
    _, R, piv = scipy.linalg.qr(P, mode="economic", pivoting=True)
    if abs(R[m - 1, m - 1]) <= RANK_TOL * max(1.0, abs(R[0, 0])):
        raise FrameError("constraint matrix is rank deficient")
    dep, free = piv[:m], piv[m:]
    sol = -np.linalg.solve(P[:, dep], P[:, free])
    Z = np.zeros((n - m, n))
    for a, col in enumerate(free):
        Z[a, col] = 1.0
        Z[a, dep] = sol[:, a]
    return Z


class HorizontalFrame:
    """Pointwise basis ``Z_a(q)`` of the admissible distribution ``D``.

    With ``frame=None`` the basis is generated from the constraints by
    ``null_space_frame``. ``normalize`` rescales each vector to unit length.
    """

    def __init__(self, constraints: ConstraintSet, frame: Optional[Callable] = None, normalize=True):
        self.constraints = constraints
        self.frame = frame
        self.normalize = normalize

    @property
    def rank(self):
        return self.constraints.n - self.constraints.m

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        P = self.constraints.matrix(q, check=False)
        if self.frame is None:
            Z = null_space_frame(P)
        else:
            Z = np.asarray(self.frame(q), dtype=float).reshape(-1, self.constraints.n)
        if Z.shape[0] != self.rank:
            raise FrameError(f"frame has {Z.shape[0]} vectors, distribution has rank {self.rank}")
        if self.rank and np.linalg.matrix_rank(Z, tol=RANK_TOL) < self.rank:
            raise FrameError(f"frame is degenerate at q={q}")
        if self.normalize and self.rank:
            Z = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        scale = max(1.0, np.max(np.abs(P), initial=0.0))
        if P.size and np.max(np.abs(Z @ P.T)) > FRAME_TOL * scale * max(1.0, np.max(np.abs(Z))):
            raise FrameError(f"frame vectors leave the distribution at q={q}")
        return Z

    def vector_fields(self):
        return [VectorField(lambda q, a=a: self(q)[a], name=f"Z{a + 1}") for a in range(self.rank)]


def constraint_residuals(sys: MechanicalSystem, cons: ConstraintSet, s: CotangentState):
    """``Psi^i = Phi^i_A (M^-1 p)^A``."""
    return cons.matrix(s.q, check=False) @ sys.velocity(s.q, s.p)


def compatibility_matrix(sys: MechanicalSystem, cons: ConstraintSet, q, P=None):
    """``C = Phi M^-1 Phi^T``; raises SingularCompatibility when ill-conditioned."""
    P = cons.matrix(q, check=False) if P is None else P
    C = P @ sys.inverse_metric(q) @ P.T
    C = 0.5 * (C + C.T)
    if cons.m:
        _checked_eigh(C, q)
    return C


def _checked_eigh(C, q):
    # C is symmetric positive semi-definite, so eigenvalues give the 2-norm condition number
    if not np.all(np.isfinite(C)):
        raise NumericalFailure(f"non-finite compatibility matrix at q={np.asarray(q)}")
    # direct LAPACK call: numpy's eigh wrapper dominates the cost for 2x2 blocks
    w, V, info = scipy.linalg.lapack.dsyevd(C)
    if info != 0:
        raise NumericalFailure(f"eigendecomposition failed at q={np.asarray(q)}")
    if not (w[0] > 0 and w[-1] <= COND_MAX * w[0]):
        raise SingularCompatibility(f"compatibility matrix singular at q={np.asarray(q)}")
    return w, V


def residual_q_jacobian(sys: MechanicalSystem, cons: ConstraintSet, q, p):
    """``dPsi^i / dq^B`` at fixed momenta."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    return _residual_q_jacobian(sys, cons, q, p, sys.velocity(q, p), cons.matrix(q, check=False))


def _residual_q_jacobian(sys, cons, q, p, v, P):
    if cons.dphi is not None and sys.metric_derivative is not None:
        dP = cons.derivative(q)
        dM = np.asarray(sys.metric_derivative(q), dtype=float)
        # d(M^-1 p)/dq^B = -M^-1 dM_B M^-1 p
        dv = -sys.inverse_metric(q) @ (dM @ v).T
        return v @ dP + P @ dv
    return fd_jacobian(lambda x: cons.matrix(x, check=False) @ sys.velocity(x, p), q)


def _multipliers(sys, cons, q, p, qdot, pdot_free, P):
    Minv = sys.inverse_metric(q)
    C = P @ Minv @ P.T
    w, V = _checked_eigh(0.5 * (C + C.T), q)
    xh_psi = _residual_q_jacobian(sys, cons, q, p, qdot, P) @ qdot + P @ (Minv @ pdot_free)
    return V @ ((V.T @ xh_psi) / w)


def multipliers(sys: MechanicalSystem, cons: ConstraintSet, s: CotangentState):
    """Multipliers ``lam = C^-1 X_H(Psi)`` keeping ``Psi`` constant to first order.

    ``X_H(Psi)`` is assembled by the chain rule from the free hamiltonian
    field: ``dPsi/dq . qdot + Phi M^-1 . pdot_free``.
    """
    if cons.m == 0:
        return np.zeros(0)
    qdot, pdot = hamiltonian_field(sys, s)
    return _multipliers(sys, cons, s.q, s.p, qdot, pdot, cons.matrix(s.q, check=False))


def _constrained_field(sys, cons, s):
    qdot, pdot = hamiltonian_field(sys, s)
    if cons.m == 0:
        return qdot, pdot, np.zeros(0)
    P = cons.matrix(s.q, check=False)
    lam = _multipliers(sys, cons, s.q, s.p, qdot, pdot, P)
    return qdot, pdot - P.T @ lam, lam


def nonholonomic_field(sys: MechanicalSystem, cons: ConstraintSet, s: CotangentState):
    """Constrained Hamilton equations; returns ``(qdot, pdot)``."""
    qdot, pdot, _ = _constrained_field(sys, cons, s)
    return qdot, pdot


def project_momenta(sys: MechanicalSystem, cons: ConstraintSet, q, p):
    """Metric-orthogonal projection of ``p`` onto ``Psi(q, .) = 0``."""
    if cons.m == 0:
        return np.asarray(p, dtype=float)
    s = CotangentState(q, p)
    psi = constraint_residuals(sys, cons, s)
    C = compatibility_matrix(sys, cons, q)
    return s.p - cons.matrix(q, check=False).T @ np.linalg.solve(C, psi)


@dataclass
class ConstrainedTrajectory:
    """Samples of a constrained motion and their per-sample diagnostics."""

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    residuals: np.ndarray
    multipliers: np.ndarray

    def __post_init__(self):
        k = len(self.times)
        for name in ("q", "p", "energy", "residuals", "multipliers"):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} has {len(getattr(self, name))} samples, expected {k}")

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals), initial=0.0))

    @property
    def energy_drift(self):
        return float(np.max(np.abs(self.energy - self.energy[0])))


def integrate_nonholonomic(
    sys: MechanicalSystem,
    cons: ConstraintSet,
    s0: CotangentState,
    dt: float,
    steps: int,
    project: bool = False,
) -> ConstrainedTrajectory:
    """RK4 integration of the constrained Hamilton equations.

    With ``project=True`` the momenta are projected back onto the constraint
    submanifold after every step; by default the raw drift is kept.
    """
    n = sys.dim
    psi0 = constraint_residuals(sys, cons, s0)
    if psi0.size and np.max(np.abs(psi0)) > 1e-8:
        warnings.warn(
            f"initial state violates the constraints (max |Psi| = {np.max(np.abs(psi0)):.3e})",
            RuntimeWarning,
            stacklevel=2,
        )

    memo = [None, None, None]

    def field(x):
        # one-entry memo: the multiplier observer and the next k1 stage share a state
        key = x.tobytes()
        if memo[0] != key:
            qdot, pdot, lam = _constrained_field(sys, cons, CotangentState(x[:n], x[n:]))
            memo[:] = key, np.concatenate([qdot, pdot]), lam
        return memo[1], memo[2]

    def f(x):
        return field(x)[0]

    post = None
    if project:
        post = lambda x: np.concatenate([x[:n], project_momenta(sys, cons, x[:n], x[n:])])

    def state(x):
        return CotangentState(x[:n], x[n:])

    traj = rk4_integrate(
        f,
        s0.flat(),
        dt,
        steps,
        observers={
            "energy": lambda x: sys.H(x[:n], x[n:]),
            "residuals": lambda x: constraint_residuals(sys, cons, state(x)),
            "multipliers": lambda x: field(x)[1],
        },
        post_step=post,
    )
    m = cons.m
    d = traj.diagnostics
    return ConstrainedTrajectory(
        times=traj.times,
        q=traj.states[:, :n],
        p=traj.states[:, n:],
        energy=d["energy"],
        residuals=d["residuals"].reshape(-1, m),
        multipliers=d["multipliers"].reshape(-1, m),
    )
