"""Sampled verification of Hamilton-Jacobi candidates.

A candidate is a 1-form ``gamma`` on configuration space (or a vector field
``X`` mapped to ``gamma = M X``). Each check evaluates pointwise residuals of
the defining identities on a sample grid and reports the worst normalized
value per condition. Covector residuals are divided by ``1 + |gamma(q)|_inf``.

Conditions used here:

* ``closed``       -- ``|d gamma|`` on all coordinate pairs;
* ``hj_equation``  -- ``d(H o gamma) + gamma^* beta`` (``beta = 0`` unforced);
* ``image``        -- ``Psi(q, gamma(q))``, the constraints on the momenta;
* ``ideal``        -- ``d gamma(Z_a, Z_b)`` on a frame of the distribution;
  this vanishes iff ``d gamma`` lies in the ideal generated by the
  constraint 1-forms;
* ``annihilator``  -- ``Z_a . d(H o gamma)``, i.e. ``d(H o gamma)`` lies in
  the span of the constraint 1-forms.
"""

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .calculus import OneFormField, Trajectory, exterior_derivative, fd_gradient, rk4_integrate
from .errors import ConfigError
from .mechanics import CotangentState, MechanicalSystem, SemibasicForce
from .nonholonomic import (
    ConstrainedTrajectory,
    ConstraintSet,
    HorizontalFrame,
    compatibility_matrix,
    integrate_nonholonomic,
)

DEFAULT_CAP = 100_000
ANALYTIC_TOL = 1e-6
FD_TOL = 1e-4


@dataclass
class SampleGrid:
    """Tensor grid ``lower..upper`` with ``counts`` samples per axis, plus extra points."""

    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None
    counts: Optional[Sequence[int]] = None
    extra_points: Optional[np.ndarray] = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.counts is not None:
            self.lower = [float(x) for x in self.lower]
            self.upper = [float(x) for x in self.upper]
            self.counts = [int(c) for c in self.counts]
            if not len(self.lower) == len(self.upper) == len(self.counts):
                raise ConfigError("grid bounds and counts must have equal length")
            if any(c < 1 for c in self.counts):
                raise ConfigError("grid counts must be >= 1")
            if not all(np.isfinite(self.lower + self.upper)):
                raise ConfigError("grid bounds must be finite")
        if self.extra_points is not None:
            self.extra_points = np.atleast_2d(np.asarray(self.extra_points, dtype=float))
        if self.counts is None and self.extra_points is None:
            raise ConfigError("empty sample grid")
        if self.size > self.cap:
            raise ConfigError(f"grid has {self.size} points, cap is {self.cap}")

    @property
    def dim(self):
        if self.counts is not None:
            return len(self.counts)
        return self.extra_points.shape[1]

    @property
    def size(self):
        n = int(np.prod(self.counts)) if self.counts is not None else 0
        return n + (0 if self.extra_points is None else len(self.extra_points))

    @classmethod
    def parse(cls, text: str, cap: int = DEFAULT_CAP):
        """Parse ``"lo:hi:count,lo:hi:count,..."``."""
        lower, upper, counts = [], [], []
        for item in text.split(","):
            parts = item.strip().split(":")
            if len(parts) != 3:
                raise ConfigError(f"bad grid axis {item!r}; expected lo:hi:count")
            try:
                lower.append(float(parts[0]))
                upper.append(float(parts[1]))
                counts.append(int(parts[2]))
            except ValueError as exc:
                raise ConfigError(f"bad grid axis {item!r}") from exc
        return cls(lower, upper, counts, cap=cap)

    @classmethod
    def uniform(cls, dim, lo, hi, count):
        return cls([lo] * dim, [hi] * dim, [count] * dim)

    def axes(self):
        return [
            np.array([lo]) if c == 1 else np.linspace(lo, hi, c)
            for lo, hi, c in zip(self.lower, self.upper, self.counts)
        ]

    def points(self):
        pts = []
        if self.counts is not None:
            pts.append(np.array(list(itertools.product(*self.axes())), dtype=float).reshape(-1, self.dim))
        if self.extra_points is not None:
            pts.append(self.extra_points)
        return np.concatenate(pts, axis=0)

    def select(self, indices):
        """Grid on a subset (or permutation) of the axes."""
        idx = list(indices)
        return SampleGrid(
            None if self.counts is None else [self.lower[i] for i in idx],
            None if self.counts is None else [self.upper[i] for i in idx],
            None if self.counts is None else [self.counts[i] for i in idx],
            None if self.extra_points is None else self.extra_points[:, idx],
            cap=self.cap,
        )


@dataclass
class ConditionResult:
    condition: str
    residual: float
    worst_point: tuple
    tolerance: float
    passed: bool
    raw_residual: float

    def to_dict(self, point_map: Optional[Callable] = None):
        pt = np.asarray(self.worst_point, dtype=float)
        if point_map is not None:
            pt = point_map(pt)
        return {
            "condition": self.condition,
            "residual": float(self.residual),
            "raw_residual": float(self.raw_residual),
            "worst_point": [float(x) for x in pt],
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
        }


@dataclass
class HJReport:
    """Per-condition residuals of one check; overall pass iff every condition passes."""

    kind: str
    conditions: List[ConditionResult] = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.condition for c in self.conditions]

    def max_residual(self):
        return max((c.residual for c in self.conditions), default=0.0)

    def merged(self, other: "HJReport", kind=None):
        return HJReport(kind or self.kind, self.conditions + other.conditions)

    def to_dict(self, point_map: Optional[Callable] = None):
        return {
            "kind": self.kind,
            "conditions": [c.to_dict(point_map) for c in self.conditions],
            "pass": self.passed,
        }

    def summary(self):
        lines = [f"{self.kind}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.conditions:
            mark = "ok " if c.passed else "BAD"
            lines.append(f"  [{mark}] {c.condition:<18} {c.residual:.3e} (tol {c.tolerance:.1e})")
        return "\n".join(lines)


def default_tolerance(sys: MechanicalSystem):
    return ANALYTIC_TOL if sys.has_analytic_derivatives else FD_TOL


def _worst(points, values):
    """Index of the maximum; ties go to the lexicographically smallest point."""
    vmax = np.max(values)
    ties = np.flatnonzero(values == vmax)
    if len(ties) == 1:
        return int(ties[0])
    sub = points[ties]
    order = np.lexsort(sub.T[::-1])
    return int(ties[order[0]])


def _condition(name, points, raw, norms, tol):
    raw = np.asarray(raw, dtype=float)
    normalized = raw / norms
    i = _worst(points, normalized)
    return ConditionResult(
        condition=name,
        residual=float(normalized[i]),
        worst_point=tuple(float(x) for x in points[i]),
        tolerance=float(tol),
        passed=bool(normalized[i] <= tol),
        raw_residual=float(np.max(raw)),
    )


def composed_energy(sys: MechanicalSystem, gamma):
    """``q -> H(q, gamma(q))``."""
    return lambda q: sys.H(q, gamma(q))


def _as_gamma(gamma):
    return gamma if isinstance(gamma, OneFormField) else OneFormField(gamma)


def _max_pair(W):
    n = W.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    return float(np.max(np.abs(W[iu])))


def check_forced(
    sys: MechanicalSystem,
    force: Optional[SemibasicForce],
    gamma,
    grid: SampleGrid,
    tolerance: Optional[float] = None,
) -> HJReport:
    """Closedness of ``gamma`` and ``d(H o gamma) = -gamma^* beta`` on the grid.

    ``force=None`` is the unforced problem. Pulling the semibasic ``beta``
    back by ``gamma`` is substitution ``p = gamma(q)``.
    """
    gamma = _as_gamma(gamma)
    tol = default_tolerance(sys) if tolerance is None else tolerance
    pts = grid.points()
    Hg = composed_energy(sys, gamma)
    closed, hj, norms = [], [], []
    for q in pts:
        g = gamma(q)
        norms.append(1.0 + np.max(np.abs(g)))
        closed.append(_max_pair(exterior_derivative(gamma, q)))
        r = fd_gradient(Hg, q)
        if force is not None:
            r = r + force.beta(sys, q, g)
        hj.append(np.max(np.abs(r)))
    norms = np.array(norms)
    kind = "unconstrained" if force is None else "forced"
    return HJReport(
        kind,
        [_condition("closed", pts, closed, norms, tol), _condition("hj_equation", pts, hj, norms, tol)],
    )


def check_unconstrained(sys: MechanicalSystem, gamma, grid: SampleGrid, tolerance=None) -> HJReport:
    """Closed ``gamma`` with ``d(H o gamma) = 0``."""
    return check_forced(sys, None, gamma, grid, tolerance)


def check_nonholonomic(
    sys: MechanicalSystem,
    cons: ConstraintSet,
    gamma,
    grid: SampleGrid,
    frame: Optional[HorizontalFrame] = None,
    tolerance: Optional[float] = None,
) -> HJReport:
    """Image, ideal and annihilator residuals of a nonholonomic HJ candidate."""
    gamma = _as_gamma(gamma)
    frame = frame or HorizontalFrame(cons)
    tol = default_tolerance(sys) if tolerance is None else tolerance
    pts = grid.points()
    Hg = composed_energy(sys, gamma)
    image, ideal, annih, norms = [], [], [], []
    for q in pts:
        g = gamma(q)
        norms.append(1.0 + np.max(np.abs(g)))
        P = cons.matrix(q, check=False)
        image.append(np.max(np.abs(P @ sys.velocity(q, g)), initial=0.0))
        Z = frame(q)
        ideal.append(_max_pair(Z @ exterior_derivative(gamma, q) @ Z.T))
        annih.append(np.max(np.abs(Z @ fd_gradient(Hg, q)), initial=0.0))
    norms = np.array(norms)
    return HJReport(
        "nonholonomic",
        [
            _condition("image", pts, image, norms, tol),
            _condition("ideal", pts, ideal, norms, tol),
            _condition("annihilator", pts, annih, norms, tol),
        ],
    )


def legendre_of_field(sys: MechanicalSystem, X) -> OneFormField:
    """The 1-form ``q -> M(q) X(q)``."""
    return OneFormField(lambda q: sys.metric(q) @ X(q), name=f"FL({getattr(X, 'name', '')})")


def check_nonholonomic_lagrangian(
    sys: MechanicalSystem,
    cons: ConstraintSet,
    X,
    grid: SampleGrid,
    frame: Optional[HorizontalFrame] = None,
    tolerance: Optional[float] = None,
) -> HJReport:
    """Tangent-side check: ``gamma = M X`` through ``check_nonholonomic``.

    Adds ``lagrangian_energy``: ``Z_a . d(E_L o X)``, an independent route to
    the annihilator condition.
    """
    frame = frame or HorizontalFrame(cons)
    tol = default_tolerance(sys) if tolerance is None else tolerance
    gamma = legendre_of_field(sys, X)
    report = check_nonholonomic(sys, cons, gamma, grid, frame, tol)
    pts = grid.points()
    EX = lambda q: sys.E(q, X(q))
    vals, norms = [], []
    for q in pts:
        norms.append(1.0 + np.max(np.abs(gamma(q))))
        vals.append(np.max(np.abs(frame(q) @ fd_gradient(EX, q)), initial=0.0))
    extra = HJReport("", [_condition("lagrangian_energy", pts, vals, np.array(norms), tol)])
    return report.merged(extra, kind="nonholonomic_lagrangian")


def hj_flow(sys: MechanicalSystem, gamma, q0, dt: float, steps: int) -> Trajectory:
    """Integral curve of ``q -> dH/dp(q, gamma(q)) = M^-1 gamma(q)``."""
    return rk4_integrate(lambda q: sys.velocity(q, gamma(q)), np.asarray(q0, dtype=float), dt, steps)


def theorem_equivalence_test(
    sys: MechanicalSystem,
    cons: ConstraintSet,
    gamma,
    q0,
    dt: float,
    steps: int,
    motion: Optional[ConstrainedTrajectory] = None,
) -> float:
    """Sup-norm distance between ``gamma o sigma`` and the constrained motion from ``gamma(q0)``.

    ``sigma`` is the ``hj_flow`` of ``gamma``. For a solution the two
    cotangent curves coincide up to integration error. ``motion`` may supply
    that constrained motion if it was already integrated with the same
    ``dt`` and ``steps``.
    """
    sigma = hj_flow(sys, gamma, q0, dt, steps).states
    lifted = np.hstack([sigma, np.array([gamma(q) for q in sigma])])
    nh = motion
    if nh is None:
        with warnings.catch_warnings():
            # negative controls deliberately start off the constraint submanifold
            warnings.simplefilter("ignore", RuntimeWarning)
            nh = integrate_nonholonomic(sys, cons, CotangentState(q0, gamma(np.asarray(q0, float))), dt, steps)
    if len(nh.times) != len(sigma):
        raise ValueError(f"motion has {len(nh.times)} samples, expected {len(sigma)}")
    direct = np.hstack([nh.q, nh.p])
    return float(np.max(np.abs(lifted - direct)))


def classical_ansatz(sys: MechanicalSystem, cons: ConstraintSet, dS: Callable) -> OneFormField:
    """``gamma = dS - lam_i mu^i`` with ``lam`` fixed by the constraints.

    Provided as a candidate builder only; such forms generally fail the
    ``ideal`` condition.
    """

    def gamma(q):
        g = np.asarray(dS(q), dtype=float)
        if cons.m == 0:
            return g
        P = cons.matrix(q, check=False)
        lam = np.linalg.solve(compatibility_matrix(sys, cons, q), P @ sys.velocity(q, g))
        return g - P.T @ lam

    return OneFormField(gamma, name="classical_ansatz")
