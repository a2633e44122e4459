"""Run configuration: one JSON document fully determines a CLI run.

Example::

    {
      "model": "robot",
      "params": {"m": 1.0, "J": 1.0, "J_omega": 1.0, "R": 1.0},
      "initial": {"q": [0, 0, 0, 0], "candidate": "gamma3"},
      "dt": 0.001,
      "steps": 6284,
      "grid": "-1:1:5,-1:1:5,0:6.283185307179586:5,-1:1:5",
      "tolerance": 1e-6,
      "out": "out",
      "project": false,
      "analytic": true
    }

Coordinates in ``initial`` and ``grid`` are in the model's user order.
"""

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError

DEFAULT_DT = 1e-3
DEFAULT_STEPS = math.ceil(2.0 * math.pi / DEFAULT_DT)


@dataclass(frozen=True)
class InitialState:
    """Initial configuration and momenta (or velocities) in user order.

    ``candidate`` names an HJ candidate whose value at ``q`` supplies the
    momenta; it takes precedence over ``p`` and ``v``.
    """

    q: Optional[tuple] = None
    p: Optional[tuple] = None
    v: Optional[tuple] = None
    candidate: Optional[str] = None

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        if not isinstance(d, dict):
            raise ConfigError("'initial' must be an object")
        unknown = set(d) - {"q", "p", "v", "candidate"}
        if unknown:
            raise ConfigError(f"unknown keys in 'initial': {sorted(unknown)}")
        vec = lambda k: None if d.get(k) is None else _real_tuple(d[k], f"initial.{k}")
        if d.get("p") is not None and d.get("v") is not None:
            raise ConfigError("give at most one of initial.p and initial.v")
        cand = d.get("candidate")
        if cand is not None and not isinstance(cand, str):
            raise ConfigError("initial.candidate must be a string")
        return cls(vec("q"), vec("p"), vec("v"), cand)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in
                (("q", self.q), ("p", self.p), ("v", self.v), ("candidate", self.candidate))}


@dataclass(frozen=True)
class RunConfig:
    model: str = "robot"
    params: dict = field(default_factory=dict)
    initial: InitialState = field(default_factory=InitialState)
    candidate: Optional[str] = None
    dt: float = DEFAULT_DT
    steps: int = DEFAULT_STEPS
    grid: Optional[str] = None
    tolerance: Optional[float] = None
    out: str = "out"
    project: bool = False
    analytic: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.model, str) or not self.model:
            raise ConfigError("model must be a non-empty string")
        if not isinstance(self.params, dict):
            raise ConfigError("params must be an object")
        for k, v in self.params.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"parameter {k} must be a finite number, got {v!r}")
        if isinstance(self.dt, bool) or not isinstance(self.dt, (int, float)) or not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be a positive number, got {self.dt!r}")
        if isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 1:
            raise ConfigError(f"steps must be an integer >= 1, got {self.steps!r}")
        if self.tolerance is not None and (
            isinstance(self.tolerance, bool)
            or not isinstance(self.tolerance, (int, float))
            or not self.tolerance > 0
        ):
            raise ConfigError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.grid is not None and not isinstance(self.grid, str):
            raise ConfigError("grid must be a 'lo:hi:count,...' string")
        for name in ("project", "analytic"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name} must be true or false")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        d = dict(d)
        d["initial"] = InitialState.from_dict(d.get("initial"))
        if "params" in d and d["params"] is None:
            d["params"] = {}
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, **kw):
        """Copy with the non-``None`` keyword values replaced (CLI flags)."""
        kw = {k: v for k, v in kw.items() if v is not None}
        if "params" in kw:
            kw["params"] = {**self.params, **kw["params"]}
        return replace(self, **kw)

    def to_dict(self):
        return {
            "model": self.model,
            "params": dict(sorted(self.params.items())),
            "initial": self.initial.to_dict(),
            "candidate": self.candidate,
            "dt": self.dt,
            "steps": self.steps,
            "grid": self.grid,
            "tolerance": self.tolerance,
            "out": self.out,
            "project": self.project,
            "analytic": self.analytic,
        }


def _real_tuple(x, what):
    if not isinstance(x, (list, tuple)):
        raise ConfigError(f"{what} must be a list of numbers")
    out = []
    for v in x:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{what} entries must be finite numbers, got {v!r}")
        out.append(float(v))
    return tuple(out)
