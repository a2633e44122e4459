"""Chart-level numerical calculus.

Central finite differences for scalar, vector and covector fields, the Lie
bracket, exterior derivatives of 1-forms and a fixed-step RK4 integrator.
Every field is a plain callable on numpy arrays; the small wrapper classes
below only attach optional analytic derivatives and names.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DivergenceError, MetricError, NumericalFailure, SingularCompatibility

DEFAULT_STEP = 1e-5


@dataclass(frozen=True)
class Chart:
    """Coordinate chart of an ``n``-dimensional configuration space.

    ``periodic_mask`` flags angle coordinates. It is metadata only: angles are
    always treated as unwrapped reals.
    """

    dim: int
    coordinate_names: tuple
    periodic_mask: tuple = None

    def __post_init__(self):
        names = tuple(self.coordinate_names)
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        if len(names) != self.dim:
            raise ValueError(f"expected {self.dim} coordinate names, got {len(names)}")
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be unique: {names}")
        mask = self.periodic_mask
        mask = (False,) * self.dim if mask is None else tuple(bool(b) for b in mask)
        if len(mask) != self.dim:
            raise ValueError("periodic_mask length must equal dim")
        object.__setattr__(self, "coordinate_names", names)
        object.__setattr__(self, "periodic_mask", mask)

    @classmethod
    def from_names(cls, *names, periodic=()):
        return cls(len(names), names, tuple(n in periodic for n in names))

    def sub(self, indices):
        """Chart on the coordinates selected by ``indices``."""
        return Chart(
            len(indices),
            tuple(self.coordinate_names[i] for i in indices),
            tuple(self.periodic_mask[i] for i in indices),
        )


class ScalarField:
    """A real function on the chart with an optional analytic gradient."""

    def __init__(self, fn: Callable, gradient: Optional[Callable] = None, name: str = ""):
        self.fn = fn
        self.gradient = gradient
        self.name = name

    def __call__(self, q):
        return float(self.fn(np.asarray(q, dtype=float)))

    def check_gradient(self, q, tol=1e-6, h=DEFAULT_STEP):
        """True when the analytic gradient agrees with central differences."""
        if self.gradient is None:
            return True
        exact = np.asarray(self.gradient(np.asarray(q, dtype=float)), dtype=float)
        approx = fd_gradient(self.fn, q, h)
        return bool(np.max(np.abs(exact - approx), initial=0.0) <= tol)


class VectorField:
    """Tangent vector field ``q -> X^A(q)``."""

    def __init__(self, fn: Callable, name: str = ""):
        self.fn = fn
        self.name = name

    def __call__(self, q):
        return np.asarray(self.fn(np.asarray(q, dtype=float)), dtype=float)


class OneFormField:
    """Covector field ``q -> gamma_A(q)``; a section of the cotangent bundle."""

    def __init__(self, fn: Callable, name: str = ""):
        self.fn = fn
        self.name = name

    def __call__(self, q):
        return np.asarray(self.fn(np.asarray(q, dtype=float)), dtype=float)

    def pair(self, X, q):
        """Contraction ``gamma(X)`` at ``q``."""
        return float(self(q) @ X(q))


def _check_finite(value, what):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite value while evaluating {what}")
    return arr


def fd_steps(q, h=DEFAULT_STEP):
    """Per-coordinate difference steps ``h * max(1, |q^A|)``."""
    q = np.asarray(q, dtype=float)
    return h * np.maximum(1.0, np.abs(q))


def fd_gradient(f, q, h=DEFAULT_STEP):
    """Central-difference gradient of a scalar function at ``q``.

    If ``f`` carries an analytic ``gradient`` it is used instead.
    """
    q = np.asarray(q, dtype=float)
    if getattr(f, "gradient", None) is not None:
        return _check_finite(f.gradient(q), "analytic gradient")
    steps = fd_steps(q, h)
    grad = np.empty(q.size)
    for a in range(q.size):
        e = np.zeros(q.size)
        e[a] = steps[a]
        fp = _check_finite(f(q + e), "scalar field")
        fm = _check_finite(f(q - e), "scalar field")
        grad[a] = (fp - fm) / (2.0 * steps[a])
    return grad


def fd_jacobian(F, q, h=DEFAULT_STEP):
    """Central-difference Jacobian ``J[i, B] = dF_i / dq^B`` of an array-valued map."""
    q = np.asarray(q, dtype=float)
    steps = fd_steps(q, h)
    cols = []
    for a in range(q.size):
        e = np.zeros(q.size)
        e[a] = steps[a]
        fp = _check_finite(F(q + e), "field")
        fm = _check_finite(F(q - e), "field")
        cols.append((fp - fm) / (2.0 * steps[a]))
    return np.stack(cols, axis=-1)


def directional_derivative(f, X, q, h=DEFAULT_STEP):
    """``X(f)`` at ``q``, i.e. ``X^A df/dq^A``."""
    return float(fd_gradient(f, q, h) @ X(q))


def lie_bracket(X, Y, q, h=DEFAULT_STEP):
    """Components of ``[X, Y]^A = X^B d_B Y^A - Y^B d_B X^A`` at ``q``."""
    q = np.asarray(q, dtype=float)
    return fd_jacobian(Y, q, h) @ X(q) - fd_jacobian(X, q, h) @ Y(q)


def d_oneform(gamma, X, Y, q, h=DEFAULT_STEP):
    """Exterior derivative of a 1-form evaluated on two vector fields.

    Uses the invariant formula ``X(gamma(Y)) - Y(gamma(X)) - gamma([X, Y])``,
    so the fields themselves are differentiated; see ``exterior_derivative``
    for the tensorial (pointwise) form.
    """
    q = np.asarray(q, dtype=float)
    gY = lambda x: gamma(x) @ Y(x)
    gX = lambda x: gamma(x) @ X(x)
    return (
        directional_derivative(gY, X, q, h)
        - directional_derivative(gX, Y, q, h)
        - float(gamma(q) @ lie_bracket(X, Y, q, h))
    )


def exterior_derivative(gamma, q, h=DEFAULT_STEP):
    """Antisymmetric matrix ``W[A, B] = d_A gamma_B - d_B gamma_A`` at ``q``.

    ``d gamma(X, Y) = X @ W @ Y`` for tangent vectors at ``q``.
    """
    J = fd_jacobian(gamma, q, h)  # J[B, A] = d_A gamma_B
    return J.T - J


@dataclass
class Trajectory:
    """Time-stamped states plus per-sample diagnostics."""

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]


def rk4_step(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_integrate(
    f: Callable,
    x0,
    dt: float,
    steps: int,
    observers: Optional[Mapping[str, Callable]] = None,
    post_step: Optional[Callable] = None,
) -> Trajectory:
    """Classical fixed-step RK4 for an autonomous system ``x' = f(x)``.

    Parameters
    ----------
    f : callable
        State-derivative map on flat numpy arrays.
    x0 : array_like
        Initial state (sample 0 of the trajectory).
    dt, steps : float, int
        Step size and number of steps; ``steps + 1`` samples are stored.
    observers : mapping, optional
        ``name -> g(x)``; each ``g`` is evaluated on every stored sample and
        collected into ``Trajectory.diagnostics[name]``.
    post_step : callable, optional
        Applied to the state after each step (e.g. a projection).

    Raises
    ------
    DivergenceError
        If a non-finite state appears; ``last_valid`` is the last good index.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    observers = dict(observers or {})
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DivergenceError("non-finite initial state", last_valid=None)
    states = np.empty((steps + 1, x.size))
    samples = {name: [] for name in observers}

    def observe(x):
        # observers run on each sample before stepping from it, so caches keyed
        # on the state (metric, memoized fields) are shared with the k1 stage
        for name, g in observers.items():
            samples[name].append(np.asarray(g(x), dtype=float))

    states[0] = x
    observe(x)
    for k in range(steps):
        with np.errstate(all="ignore"):
            try:
                x = rk4_step(f, x, dt)
            except (MetricError, SingularCompatibility):
                raise
            except NumericalFailure as exc:
                raise DivergenceError(f"step {k + 1}: {exc}", last_valid=k) from exc
            if post_step is not None:
                x = post_step(x)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {k + 1}", last_valid=k)
        states[k + 1] = x
        observe(x)
    times = dt * np.arange(steps + 1)
    diagnostics = {name: np.array(v) for name, v in samples.items()}
    return Trajectory(times, states, diagnostics)
