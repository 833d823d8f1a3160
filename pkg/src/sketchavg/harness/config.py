"""Experiment configuration: dataclasses plus a JSON round-trip.

A canonical config::

    {
      "problem": {"mode": "left",
                  "data": {"generator": {"n": 1022, "d": 41, "distribution": "gaussian",
                                         "noise_std": 0.1, "planted": true}}},
      "sketches": [{"kind": "gaussian", "m": 100},
                   {"kind": "hybrid", "m": 100, "m_prime": 500, "inner": {"kind": "sjlt", "s": 4}}],
      "q_grid": [1, 10, 100],
      "trials": 25,
      "master_seed": 7,
      "straggler": {"mode": "wait_all"},
      "outputs": "results.csv",
      "record_prefix_errors": false
    }

File-backed data uses ``"data": {"A": "A.dskm", "b": "b.csv"}`` instead of
``generator``. ``delay_model`` (``{"kind": "exponential", "rate": 2.0}`` or
``{"kind": "fixed", "delays": [...]}``) optionally simulates stragglers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import InvalidSpec
from ..sketch import SketchSpec
from ..solver import Deadline, ExponentialDelay, FirstK, FixedDelays, Mode, StragglerPolicy, WaitAll
from .generate import GeneratorSpec


@dataclass(frozen=True)
class DataSpec:
    generator: GeneratorSpec | None = None
    seed: int | None = None
    A: str | None = None
    b: str | None = None

    def __post_init__(self):
        has_files = self.A is not None or self.b is not None
        if (self.generator is None) == (not has_files):
            raise InvalidSpec("data needs either a generator or A/b files, not both")
        if has_files and (self.A is None or self.b is None):
            raise InvalidSpec("file-backed data needs both A and b")

    def to_dict(self) -> dict[str, Any]:
        if self.generator is not None:
            out: dict[str, Any] = {"generator": self.generator.to_dict()}
            if self.seed is not None:
                out["seed"] = self.seed
            return out
        return {"A": self.A, "b": self.b}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> DataSpec:
        unknown = set(data) - {"generator", "seed", "A", "b"}
        if unknown:
            raise InvalidSpec(f"unknown data fields: {sorted(unknown)}")
        gen = data.get("generator")
        return cls(
            generator=GeneratorSpec.from_dict(gen) if gen is not None else None,
            seed=data.get("seed"),
            A=data.get("A"),
            b=data.get("b"),
        )


@dataclass(frozen=True)
class ProblemSpec:
    mode: Mode
    data: DataSpec

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError:
            raise InvalidSpec(f"mode must be 'left' or 'right', got {self.mode!r}") from None


def policy_to_dict(policy: StragglerPolicy) -> dict[str, Any]:
    if isinstance(policy, WaitAll):
        return {"mode": "wait_all"}
    if isinstance(policy, FirstK):
        return {"mode": "first_k", "k": policy.k}
    return {"mode": "deadline", "seconds": policy.seconds, "min_k": policy.min_k}


def policy_from_dict(data: dict[str, Any]) -> StragglerPolicy:
    mode = data.get("mode")
    try:
        if mode == "wait_all":
            return WaitAll()
        if mode == "first_k":
            return FirstK(int(data["k"]))
        if mode == "deadline":
            return Deadline(float(data["seconds"]), int(data.get("min_k", 1)))
    except (KeyError, ValueError) as exc:
        raise InvalidSpec(f"bad straggler policy {data!r}: {exc}") from None
    raise InvalidSpec(f"unknown straggler mode {mode!r}")


def delay_to_dict(model) -> dict[str, Any] | None:
    if model is None:
        return None
    if isinstance(model, ExponentialDelay):
        return {"kind": "exponential", "rate": model.rate}
    return {"kind": "fixed", "delays": list(model.delays)}


def delay_from_dict(data) -> ExponentialDelay | FixedDelays | None:
    if data is None:
        return None
    kind = data.get("kind")
    if kind == "exponential":
        return ExponentialDelay(float(data["rate"]))
    if kind == "fixed":
        return FixedDelays(tuple(float(x) for x in data["delays"]))
    raise InvalidSpec(f"unknown delay model {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec
    sketches: tuple[SketchSpec, ...]
    q_grid: tuple[int, ...]
    trials: int
    master_seed: int
    straggler: StragglerPolicy = field(default_factory=WaitAll)
    outputs: str = "results.csv"
    record_prefix_errors: bool = False
    delay_model: ExponentialDelay | FixedDelays | None = None

    def __post_init__(self):
        object.__setattr__(self, "sketches", tuple(self.sketches))
        object.__setattr__(self, "q_grid", tuple(int(q) for q in self.q_grid))
        if not self.sketches:
            raise InvalidSpec("config needs at least one sketch")
        if not self.q_grid or min(self.q_grid) < 1:
            raise InvalidSpec(f"q_grid must be a nonempty list of positive counts, got {self.q_grid}")
        if self.trials < 1:
            raise InvalidSpec(f"trials must be >= 1, got {self.trials}")

    def to_dict(self) -> dict[str, Any]:
        out = {
            "problem": {"mode": self.problem.mode.value, "data": self.problem.data.to_dict()},
            "sketches": [s.to_dict() for s in self.sketches],
            "q_grid": list(self.q_grid),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "straggler": policy_to_dict(self.straggler),
            "outputs": self.outputs,
            "record_prefix_errors": self.record_prefix_errors,
        }
        if self.delay_model is not None:
            out["delay_model"] = delay_to_dict(self.delay_model)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        known = {
            "problem", "sketches", "q_grid", "trials", "master_seed",
            "straggler", "outputs", "record_prefix_errors", "delay_model",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidSpec(f"unknown config fields: {sorted(unknown)}")
        missing = {"problem", "sketches", "q_grid", "trials", "master_seed"} - set(data)
        if missing:
            raise InvalidSpec(f"missing config fields: {sorted(missing)}")
        problem = data["problem"]
        if not isinstance(problem, dict) or "data" not in problem:
            raise InvalidSpec("problem needs a 'data' block")
        return cls(
            problem=ProblemSpec(problem.get("mode", "left"), DataSpec.from_dict(problem["data"])),
            sketches=tuple(SketchSpec.from_dict(s) for s in data["sketches"]),
            q_grid=tuple(data["q_grid"]),
            trials=int(data["trials"]),
            master_seed=int(data["master_seed"]),
            straggler=policy_from_dict(data.get("straggler", {"mode": "wait_all"})),
            outputs=data.get("outputs", "results.csv"),
            record_prefix_errors=bool(data.get("record_prefix_errors", False)),
            delay_model=delay_from_dict(data.get("delay_model")),
        )


def dumps(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"config is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(data)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())
