"""Nonholonomic mechanics and sampled Hamilton-Jacobi verification.

The package integrates mechanical systems with linear velocity constraints,
checks Hamilton-Jacobi candidates on sample grids and performs Čaplygin
reduction by an Ehresmann connection.
"""

from .calculus import (
    Chart,
    OneFormField,
    ScalarField,
    Trajectory,
    VectorField,
    d_oneform,
    exterior_derivative,
    fd_gradient,
    fd_jacobian,
    lie_bracket,
    rk4_integrate,
    rk4_step,
)
from .caplygin import (
    EhresmannConnection,
    ReducedSystem,
    check_projectable,
    curvature,
    equivalence_test,
    horizontal_lift_field,
    horizontal_project,
    lift_hj_solution,
    project_hj_solution,
    reduce,
    reduced_dynamics,
    reduced_force,
)
from .config import InitialState, RunConfig
from .errors import (
    ConfigError,
    DivergenceError,
    FrameError,
    InvarianceViolation,
    MetricError,
    NHHJError,
    NotProjectable,
    NumericalFailure,
    SingularCompatibility,
)
from .hamilton_jacobi import (
    ConditionResult,
    HJReport,
    SampleGrid,
    check_forced,
    check_nonholonomic,
    check_nonholonomic_lagrangian,
    check_unconstrained,
    classical_ansatz,
    hj_flow,
    theorem_equivalence_test,
)
from .mechanics import (
    CotangentState,
    MechanicalSystem,
    SemibasicForce,
    TangentState,
    hamiltonian,
    hamiltonian_field,
    integrate_hamiltonian,
    lagrangian,
    lagrangian_energy,
    legendre,
    legendre_inv,
)
from .models import ModelDescriptor, build_model, build_robot, model_names
from .nonholonomic import (
    ConstrainedTrajectory,
    ConstraintSet,
    HorizontalFrame,
    compatibility_matrix,
    constraint_residuals,
    integrate_nonholonomic,
    multipliers,
    nonholonomic_field,
    project_momenta,
)

__version__ = "0.1.0"
