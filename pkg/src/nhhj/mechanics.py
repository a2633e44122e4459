"""Mechanical-type lagrangians ``L = 1/2 v.M(q).v - V(q)`` and their hamiltonian side.

For this class of lagrangians the Legendre map is fiberwise linear,
``p = M(q) v``, so both directions are explicit. Forces are semibasic
1-forms, given on the tangent side (``alpha``), the cotangent side
(``beta``) or both; the missing side is obtained through the Legendre map.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .calculus import Chart, ScalarField, Trajectory, fd_gradient, rk4_integrate
from .errors import MetricError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class TangentState:
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


@dataclass(frozen=True)
class CotangentState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))

    def flat(self):
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_flat(cls, x):
        n = len(x) // 2
        return cls(x[:n], x[n:])


class MechanicalSystem:
    """Kinetic metric plus potential on a coordinate chart.

    Parameters
    ----------
    chart : Chart
    mass_metric : callable
        ``q -> M(q)``, symmetric positive-definite ``(n, n)``.
    potential : ScalarField or callable, optional
        ``V(q)``; zero when omitted.
    metric_derivative : callable, optional
        ``q -> dM`` with ``dM[C] = dM/dq^C`` (shape ``(n, n, n)``). When given,
        ``dH/dq`` is computed analytically instead of by finite differences.
    """

    def __init__(
        self,
        chart: Chart,
        mass_metric: Callable,
        potential=None,
        metric_derivative: Optional[Callable] = None,
        name: str = "",
    ):
        self.chart = chart
        self.mass_metric = mass_metric
        if potential is None:
            potential = ScalarField(lambda q: 0.0, gradient=lambda q: np.zeros(chart.dim), name="zero")
        elif not isinstance(potential, ScalarField):
            potential = ScalarField(potential)
        self.potential = potential
        self.metric_derivative = metric_derivative
        self.name = name
        self._cache = None

    @property
    def dim(self):
        return self.chart.dim

    @property
    def has_analytic_derivatives(self):
        return self.metric_derivative is not None and self.potential.gradient is not None

    def metric(self, q):
        """``M(q)`` after checking symmetry and positive-definiteness (read-only array)."""
        return self._metric_pair(q)[0]

    def _checked_metric(self, q):
        M = np.array(self.mass_metric(np.asarray(q, dtype=float)), dtype=float)
        n = self.dim
        if M.shape != (n, n):
            raise MetricError(f"metric has shape {M.shape}, expected {(n, n)}")
        if not np.isfinite(M).all():
            raise MetricError("non-finite metric entries")
        if abs(M - M.T).max() > SYMMETRY_TOL * max(1.0, abs(M).max()):
            raise MetricError("metric is not symmetric")
        return M

    def _metric_pair(self, q):
        # single-entry cache: one field evaluation hits the same q many times;
        # the tuple is replaced atomically so concurrent callers stay consistent
        q = np.asarray(q, dtype=float)
        key = q.tobytes()
        cached = self._cache
        if cached is not None and cached[0] == key:
            return cached[1], cached[2]
        M = self._checked_metric(q)
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise MetricError(f"metric not positive-definite at q={q}") from exc
        Minv = np.linalg.inv(M)
        Minv = 0.5 * (Minv + Minv.T)
        M.flags.writeable = False
        Minv.flags.writeable = False
        self._cache = (key, M, Minv)
        return M, Minv

    def velocity(self, q, p):
        """``v = M(q)^-1 p`` (equivalently ``dH/dp``)."""
        return self._metric_pair(q)[1] @ np.asarray(p, dtype=float)

    def inverse_metric(self, q):
        return self._metric_pair(q)[1]

    def V(self, q):
        return self.potential(q)

    def H(self, q, p):
        p = np.asarray(p, dtype=float)
        return 0.5 * float(p @ self.velocity(q, p)) + self.V(q)

    def E(self, q, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * float(v @ self.metric(q) @ v) + self.V(q)

    def L(self, q, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * float(v @ self.metric(q) @ v) - self.V(q)

    def dV_dq(self, q):
        return fd_gradient(self.potential, q)

    def dH_dq(self, q, p):
        q = np.asarray(q, dtype=float)
        if self.metric_derivative is None:
            return fd_gradient(lambda x: self.H(x, p), q)
        v = self.velocity(q, p)
        dM = np.asarray(self.metric_derivative(q), dtype=float)
        # dM[c] is symmetric, so (dM @ v) @ v = v . dM[c] . v
        return -0.5 * ((dM @ v) @ v) + self.dV_dq(q)


class SemibasicForce:
    """External force 1-form with only ``dq`` components.

    ``cotangent(q, p) -> beta_A`` and/or ``tangent(q, v) -> alpha_A``. Since
    the force is semibasic, transporting it through the Legendre map is plain
    substitution of ``v = M^-1 p`` (or ``p = M v``).
    """

    def __init__(self, cotangent: Optional[Callable] = None, tangent: Optional[Callable] = None):
        if cotangent is None and tangent is None:
            raise ValueError("a force needs at least one of cotangent/tangent")
        self.cotangent = cotangent
        self.tangent = tangent

    def beta(self, sys: MechanicalSystem, q, p):
        if self.cotangent is not None:
            return np.asarray(self.cotangent(np.asarray(q, float), np.asarray(p, float)), dtype=float)
        return np.asarray(self.tangent(np.asarray(q, float), sys.velocity(q, p)), dtype=float)

    def alpha(self, sys: MechanicalSystem, q, v):
        if self.tangent is not None:
            return np.asarray(self.tangent(np.asarray(q, float), np.asarray(v, float)), dtype=float)
        v = np.asarray(v, dtype=float)
        return np.asarray(self.cotangent(np.asarray(q, float), sys.metric(q) @ v), dtype=float)


def legendre(sys: MechanicalSystem, s: TangentState) -> CotangentState:
    return CotangentState(s.q, sys.metric(s.q) @ s.v)


def legendre_inv(sys: MechanicalSystem, s: CotangentState) -> TangentState:
    return TangentState(s.q, sys.velocity(s.q, s.p))


def hamiltonian(sys: MechanicalSystem, s: CotangentState) -> float:
    return sys.H(s.q, s.p)


def lagrangian_energy(sys: MechanicalSystem, s: TangentState) -> float:
    return sys.E(s.q, s.v)


def lagrangian(sys: MechanicalSystem, s: TangentState) -> float:
    return sys.L(s.q, s.v)


def hamiltonian_field(sys: MechanicalSystem, s: CotangentState, force: Optional[SemibasicForce] = None):
    """Hamilton's equations, optionally with a semibasic force.

    Returns ``(qdot, pdot)`` with ``qdot = M^-1 p`` and
    ``pdot = -dH/dq - beta(q, p)``.
    """
    qdot = sys.velocity(s.q, s.p)
    pdot = -sys.dH_dq(s.q, s.p)
    if force is not None:
        pdot = pdot - force.beta(sys, s.q, s.p)
    return qdot, pdot


def flat_hamiltonian_field(sys: MechanicalSystem, force: Optional[SemibasicForce] = None):
    """``hamiltonian_field`` on flat ``(q, p)`` arrays, for the integrator."""
    n = sys.dim

    def f(x):
        qdot, pdot = hamiltonian_field(sys, CotangentState(x[:n], x[n:]), force)
        return np.concatenate([qdot, pdot])

    return f


def integrate_hamiltonian(
    sys: MechanicalSystem,
    s0: CotangentState,
    dt: float,
    steps: int,
    force: Optional[SemibasicForce] = None,
) -> Trajectory:
    """RK4 integration of the (forced) Hamilton equations with an energy trace."""
    n = sys.dim
    return rk4_integrate(
        flat_hamiltonian_field(sys, force),
        s0.flat(),
        dt,
        steps,
        observers={"energy": lambda x: sys.H(x[:n], x[n:])},
    )
