"""Experiment configuration: a versioned JSON document plus validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .core import MeshError, MeshSpec, named_strategy, validate_mesh
from .decompose import InitialCondition
from .flow import Potential, step_count

SCHEMA_VERSION = 1
SOLVERS = ("tssp", "fga", "fggc", "fggc-multistep")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    solver: str = "fggc"
    dim: int = 1
    epsilon: float = 2.0**-6
    potential: dict = field(default_factory=lambda: {"kind": "cosine"})
    initial: dict = field(default_factory=lambda: {"kind": "gaussian", "alpha": 32.0, "p0": 1.0})
    T_final: float = 0.8
    dt: float = 1e-4
    cq: float = 0.5
    cp: float = math.pi / 8
    dx: float | None = None
    domain: tuple[float, float] = (-2.0, 2.0)
    strategy: str = "Q2P2"
    tau: float = 1e-6
    r_cut: float = 9.0
    rcond: float = 1.5e-10
    T_multi: int = 1
    T_evo: float | None = None
    threads: int = 1
    seed: int = 0
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))

    # construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(asdict(self))
        out["domain"] = list(self.domain)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @property
    def digest(self) -> str:
        """Hash of every setting that can change the computed field."""
        data = self.to_dict()
        data.pop("output")
        data.pop("threads")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # derived objects ----------------------------------------------------
    def mesh(self) -> MeshSpec:
        try:
            return validate_mesh(
                MeshSpec(
                    epsilon=self.epsilon,
                    dim=self.dim,
                    dx=self.epsilon if self.dx is None else self.dx,
                    cq=self.cq,
                    cp=self.cp,
                    domain_lo=(self.domain[0],) * self.dim,
                    domain_hi=(self.domain[1],) * self.dim,
                    dt=self.dt,
                )
            )
        except MeshError as exc:
            raise ConfigError(f"invalid mesh: {exc}") from None

    def make_potential(self) -> Potential:
        try:
            return Potential.from_dict(self.potential)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid potential {self.potential!r}: {exc}") from None

    def make_initial(self) -> InitialCondition:
        try:
            return InitialCondition.from_dict(self.initial)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid initial condition {self.initial!r}: {exc}") from None

    def segments(self) -> tuple[int, float]:
        """``(T_multi, T_evo)`` for the FGGC drivers."""
        if self.solver != "fggc-multistep":
            return 1, self.T_final
        T_evo = self.T_evo if self.T_evo is not None else self.T_final / self.T_multi
        return self.T_multi, T_evo

    def validate(self) -> "ExperimentConfig":
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        self.mesh()
        self.make_potential()
        self.make_initial()
        if not self.T_final >= 0:
            raise ConfigError("T_final must be non-negative")
        try:
            step_count(self.T_final, self.dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.solver in ("fggc", "fggc-multistep"):
            try:
                named_strategy(self.strategy, self.dim)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not 0 <= self.tau < 1:
            raise ConfigError("tau must lie in [0, 1)")
        if not self.r_cut > 0:
            raise ConfigError("r_cut must be positive")
        if not 0 < self.rcond < 1:
            raise ConfigError("rcond must lie in (0, 1)")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.solver == "fggc-multistep":
            if int(self.T_multi) != self.T_multi or self.T_multi < 1:
                raise ConfigError("T_multi must be a positive integer")
            T_multi, T_evo = self.segments()
            if not math.isclose(T_multi * T_evo, self.T_final, rel_tol=1e-9, abs_tol=1e-12):
                raise ConfigError(f"T_multi * T_evo = {T_multi * T_evo} differs from T_final = {self.T_final}")
            try:
                step_count(T_evo, self.dt)
            except ValueError as exc:
                raise ConfigError(f"T_evo: {exc}") from None
        return self
