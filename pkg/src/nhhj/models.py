"""Model registry: the rolling robot plus small synthetic systems.

Every model is stored in an internal coordinate order (base block first for
Čaplygin systems) and carries ``user_order`` to present states in the order
users expect. For the robot the user order is ``(x, y, theta, psi)`` and the
internal order is ``(theta, psi, x, y)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .caplygin import EhresmannConnection, horizontal_lift_field
from .calculus import Chart, OneFormField, ScalarField, VectorField
from .errors import ConfigError
from .hamilton_jacobi import SampleGrid
from .mechanics import MechanicalSystem, SemibasicForce
from .nonholonomic import ConstraintSet


@dataclass
class ModelDescriptor:
    name: str
    params: dict
    system: MechanicalSystem
    constraints: ConstraintSet
    connection: Optional[EhresmannConnection] = None
    force: Optional[SemibasicForce] = None
    candidates: Dict[str, OneFormField] = field(default_factory=dict)
    tangent_candidates: Dict[str, VectorField] = field(default_factory=dict)
    base_fields: Dict[str, VectorField] = field(default_factory=dict)
    user_order: tuple = None
    default_grid: SampleGrid = None
    default_q0: np.ndarray = None
    description: str = ""

    def __post_init__(self):
        n = self.system.dim
        if self.user_order is None:
            self.user_order = tuple(range(n))
        if self.default_q0 is None:
            self.default_q0 = np.zeros(n)

    @property
    def dim(self):
        return self.system.dim

    @property
    def internal_names(self):
        return self.system.chart.coordinate_names

    @property
    def user_names(self):
        return tuple(self.internal_names[i] for i in self.user_order)

    def to_user(self, x):
        return np.asarray(x, dtype=float)[..., list(self.user_order)]

    def from_user(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        out[..., list(self.user_order)] = u
        return out

    def user_grid_to_internal(self, grid: SampleGrid) -> SampleGrid:
        inverse = np.argsort(self.user_order)
        return grid.select(inverse)

    def candidate_names(self):
        return list(self.candidates) + list(self.tangent_candidates)


def _positive(params, names):
    for k in names:
        v = params[k]
        if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
            raise ConfigError(f"parameter {k} must be a positive number, got {v!r}")


def _merge(defaults, params):
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown parameters: {sorted(unknown)}")
    out = dict(defaults)
    out.update({k: float(v) if isinstance(v, (int, float)) else v for k, v in params.items()})
    return out


def build_robot(m=1.0, J=1.0, J_omega=1.0, R=1.0, analytic=True) -> ModelDescriptor:
    """Three-wheeled robot with fixed body orientation rolling without sliding.

    Internal coordinates ``(theta, psi, x, y)``; ``theta`` is the steering
    angle, ``psi`` the wheel rotation angle and ``(x, y)`` the centre of mass.
    """
    params = {"m": m, "J": J, "J_omega": J_omega, "R": R}
    _positive(params, params)
    m, J, Jw, R = (float(params[k]) for k in ("m", "J", "J_omega", "R"))

    chart = Chart.from_names("theta", "psi", "x", "y", periodic=("theta", "psi"))
    M = np.diag([J, 3.0 * Jw, m, m])
    dM = np.zeros((4, 4, 4))
    system = MechanicalSystem(
        chart,
        lambda q: M,
        ScalarField(lambda q: 0.0, gradient=(lambda q: np.zeros(4)) if analytic else None),
        metric_derivative=(lambda q: dM) if analytic else None,
        name="robot",
    )

    def phi(q):
        s, c = np.sin(q[0]), np.cos(q[0])
        return np.array([[0.0, 0.0, s, -c], [0.0, -R, c, s]])

    def dphi(q):
        s, c = np.sin(q[0]), np.cos(q[0])
        d = np.zeros((2, 4, 4))
        d[0, 2, 0], d[0, 3, 0] = c, s
        d[1, 2, 0], d[1, 3, 0] = -s, c
        return d

    constraints = ConstraintSet(phi, 2, 4, dphi=dphi if analytic else None, name="rolling")

    def christoffel(q):
        return np.array([[0.0, -R * np.cos(q[0])], [0.0, -R * np.sin(q[0])]])

    def dchristoffel(q):
        d = np.zeros((2, 2, 4))
        d[0, 1, 0] = R * np.sin(q[0])
        d[1, 1, 0] = -R * np.cos(q[0])
        return d

    conn = EhresmannConnection(2, 2, christoffel, dchristoffel if analytic else None, name="robot")

    def gamma1(q):
        return np.array([J, 0.0, 0.0, 0.0])

    def gamma2(q):
        return np.array([0.0, 3.0 * Jw, m * R * np.cos(q[0]), m * R * np.sin(q[0])])

    def gamma3(q):
        return gamma1(q) + gamma2(q)

    def gamma2_perturbed(q):
        # image and ideal conditions still hold; d(H o gamma) leaves D^0
        return (1.0 + 0.5 * q[2]) * gamma2(q)

    def gamma2_doubled_dx(q):
        g = gamma2(q)
        g[2] *= 2.0
        return g

    candidates = {
        "gamma1": OneFormField(gamma1, "gamma1"),
        "gamma2": OneFormField(gamma2, "gamma2"),
        "gamma3": OneFormField(gamma3, "gamma3"),
        "gamma2_perturbed": OneFormField(gamma2_perturbed, "gamma2_perturbed"),
        "gamma2_doubled_dx": OneFormField(gamma2_doubled_dx, "gamma2_doubled_dx"),
    }
    base_fields = {
        "Y1": VectorField(lambda qa: np.array([1.0, 0.0]), "Y1"),
        "Y2": VectorField(lambda qa: np.array([0.0, 1.0]), "Y2"),
        "Y3": VectorField(lambda qa: np.array([1.0, 1.0]), "Y3"),
    }
    tangent = {f"{k}H": horizontal_lift_field(conn, Y) for k, Y in base_fields.items()}
    grid = SampleGrid([0.0, -1.0, -1.0, -1.0], [2.0 * np.pi, 1.0, 1.0, 1.0], [5, 5, 5, 5])
    return ModelDescriptor(
        name="robot",
        params=params,
        system=system,
        constraints=constraints,
        connection=conn,
        candidates=candidates,
        tangent_candidates=tangent,
        base_fields=base_fields,
        user_order=(2, 3, 0, 1),
        default_grid=grid,
        description="mobile robot with fixed orientation rolling without sliding (x, y, theta, psi)",
    )


def _three_dof(name, params, christoffel, dchristoffel, analytic):
    m1, m2, m3, k = (params[s] for s in ("m1", "m2", "m3", "k"))
    chart = Chart.from_names("q1", "q2", "z")
    M = np.diag([m1, m2, m3])
    dM = np.zeros((3, 3, 3))
    V = ScalarField(
        lambda q: 0.5 * k * (q[0] ** 2 + q[1] ** 2),
        gradient=(lambda q: np.array([k * q[0], k * q[1], 0.0])) if analytic else None,
    )
    system = MechanicalSystem(chart, lambda q: M, V, (lambda q: dM) if analytic else None, name=name)
    conn = EhresmannConnection(2, 1, christoffel, dchristoffel if analytic else None, name=name)
    return system, conn


def build_curved(m1=1.0, m2=1.0, m3=1.0, k=0.0, c=1.0, analytic=True) -> ModelDescriptor:
    """Particle with ``z' = c q2 q1'`` (connection ``Gamma = (-c q2, 0)``), nonzero curvature.

    With ``k = 0`` the lift of ``d/dq2`` solves the constrained HJ problem.
    """
    params = {"m1": m1, "m2": m2, "m3": m3, "k": k, "c": c}
    _positive(params, ("m1", "m2", "m3"))
    christoffel = lambda q: np.array([[-c * q[1], 0.0]])

    def dchristoffel(q):
        d = np.zeros((1, 2, 3))
        d[0, 0, 1] = -c
        return d

    system, conn = _three_dof("curved", params, christoffel, dchristoffel, analytic)
    base_fields = {
        "Yq1": VectorField(lambda qa: np.array([1.0, 0.0]), "Yq1"),
        "Yq2": VectorField(lambda qa: np.array([0.0, 1.0]), "Yq2"),
    }
    tangent = {f"{k_}H": horizontal_lift_field(conn, Y) for k_, Y in base_fields.items()}
    return ModelDescriptor(
        name="curved",
        params=params,
        system=system,
        constraints=conn.constraints(),
        connection=conn,
        tangent_candidates=tangent,
        base_fields=base_fields,
        default_grid=SampleGrid.uniform(3, -1.0, 1.0, 5),
        default_q0=np.array([0.3, -0.2, 0.0]),
        description="synthetic 2-base/1-fiber system with curved connection (nonzero alpha*)",
    )


def build_flat(m1=1.0, m2=1.0, m3=1.0, k=1.0, a=0.5, b=-0.3, analytic=True) -> ModelDescriptor:
    """Oscillator with the integrable constraint ``z' = a q1' + b q2'`` (flat connection)."""
    params = {"m1": m1, "m2": m2, "m3": m3, "k": k, "a": a, "b": b}
    _positive(params, ("m1", "m2", "m3"))
    christoffel = lambda q: np.array([[-a, -b]])
    system, conn = _three_dof("flat", params, christoffel, lambda q: np.zeros((1, 2, 3)), analytic)
    candidates = {
        "exact_dS": OneFormField(lambda q: np.array([q[1], q[0], 0.0]), "exact_dS"),
    }
    return ModelDescriptor(
        name="flat",
        params=params,
        system=system,
        constraints=conn.constraints(),
        connection=conn,
        candidates=candidates,
        base_fields={"Yq1": VectorField(lambda qa: np.array([1.0, 0.0]), "Yq1")},
        default_grid=SampleGrid.uniform(3, -1.0, 1.0, 5),
        default_q0=np.array([0.5, 0.0, 0.0]),
        description="synthetic 2-base/1-fiber system with flat connection (alpha* = 0)",
    )


def build_forced_1d(k=1.0, force_k=None, analytic=True) -> ModelDescriptor:
    """Free unit mass on a line with constant force ``beta = -force_k dq``.

    Candidate ``sqrt`` is ``p(q) = sqrt(2 k q)``, which solves the forced HJ
    equation when ``force_k == k``.
    """
    force_k = k if force_k is None else force_k
    params = {"k": k, "force_k": force_k}
    _positive(params, params)
    chart = Chart.from_names("q")
    system = MechanicalSystem(
        chart,
        lambda q: np.eye(1),
        ScalarField(lambda q: 0.0, gradient=(lambda q: np.zeros(1)) if analytic else None),
        metric_derivative=(lambda q: np.zeros((1, 1, 1))) if analytic else None,
        name="forced1d",
    )
    force = SemibasicForce(cotangent=lambda q, p: np.array([-force_k]))
    candidates = {"sqrt": OneFormField(lambda q: np.array([np.sqrt(2.0 * k * q[0])]), "sqrt")}
    return ModelDescriptor(
        name="forced1d",
        params=params,
        system=system,
        constraints=ConstraintSet.empty(1),
        force=force,
        candidates=candidates,
        default_grid=SampleGrid([1.0], [2.0], [21]),
        default_q0=np.array([1.0]),
        description="unit mass under a constant semibasic force",
    )


def build_oscillator(omega=1.0, energy=2.0, analytic=True) -> ModelDescriptor:
    """1D harmonic oscillator; ``energy_level`` solves HJ on ``|q| < sqrt(2E)/omega``."""
    params = {"omega": omega, "energy": energy}
    _positive(params, params)
    w2 = omega**2
    chart = Chart.from_names("q")
    system = MechanicalSystem(
        chart,
        lambda q: np.eye(1),
        ScalarField(lambda q: 0.5 * w2 * q[0] ** 2, gradient=(lambda q: w2 * q) if analytic else None),
        metric_derivative=(lambda q: np.zeros((1, 1, 1))) if analytic else None,
        name="oscillator",
    )
    candidates = {
        "energy_level": OneFormField(lambda q: np.sqrt(2.0 * energy - w2 * q**2), "energy_level"),
        "dW_q2": OneFormField(lambda q: 2.0 * q, "dW_q2"),
    }
    return ModelDescriptor(
        name="oscillator",
        params=params,
        system=system,
        constraints=ConstraintSet.empty(1),
        candidates=candidates,
        default_grid=SampleGrid([-1.0], [1.0], [21]),
        default_q0=np.array([0.0]),
        description="1D harmonic oscillator (unconstrained)",
    )


_DEFAULTS = {
    "robot": (build_robot, {"m": 1.0, "J": 1.0, "J_omega": 1.0, "R": 1.0}),
    "curved": (build_curved, {"m1": 1.0, "m2": 1.0, "m3": 1.0, "k": 0.0, "c": 1.0}),
    "flat": (build_flat, {"m1": 1.0, "m2": 1.0, "m3": 1.0, "k": 1.0, "a": 0.5, "b": -0.3}),
    "forced1d": (build_forced_1d, {"k": 1.0, "force_k": 1.0}),
    "oscillator": (build_oscillator, {"omega": 1.0, "energy": 2.0}),
}


def model_names():
    return list(_DEFAULTS)


def build_model(name: str, params: Optional[dict] = None, analytic: bool = True) -> ModelDescriptor:
    """Build a registered model by name with optional parameter overrides."""
    if name not in _DEFAULTS:
        raise ConfigError(f"unknown model {name!r}; available: {', '.join(_DEFAULTS)}")
    builder, defaults = _DEFAULTS[name]
    return builder(**_merge(defaults, params), analytic=analytic)
