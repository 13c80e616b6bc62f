"""JSON run configuration.

Layout (every section and key optional)::

    {
      "seed": 7,
      "simulation": {"n_students": 119, "n_sessions": 7, "policies": null,
                     "absence_prob": 0.1, "stickiness": 0.6, "beta": 0.2,
                     "noise_sd": 0.05, "pre_mean": 1.0, "pre_sd": 0.4,
                     "course": "sim"},
      "fkm": {"n_clusters": 3, "m": 2.0, "epsilon": 1e-6, "max_iter": 100},
      "analysis": {"alpha": 0.05, "m_tests": null, "method": "mean",
                   "min_sessions": 3, "k": 5, "runs": 3, "pool": false,
                   "max_score": 2.0},
      "output": {"dir": "sim_out", "report": "report.json"}
    }

``policies`` is null (default cooperative mix), one policy string for
everyone, or a list with one string per student. Unknown keys raise
:class:`~pdpl.errors.ValidationError` naming the key.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ValidationError
from .impute import METHODS, FkmParams
from .sim import SimConfig


@dataclass(frozen=True)
class AnalysisOptions:
    alpha: float = 0.05
    m_tests: Optional[int] = None
    method: str = "mean"
    min_sessions: int = 3
    k: int = 5
    runs: int = 3
    pool: bool = False
    max_score: float = 2.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"analysis.method must be one of {METHODS}, got {self.method!r}")
        if not 0 < self.alpha < 1:
            raise ValidationError(f"analysis.alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class OutputOptions:
    dir: str = "sim_out"
    report: str = "report.json"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    simulation: SimConfig = field(default_factory=SimConfig)
    fkm: FkmParams = field(default_factory=FkmParams)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    output: OutputOptions = field(default_factory=OutputOptions)


def _build(cls, data, section: str, **fixed):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValidationError(f"config section {section!r} must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)} - set(fixed)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValidationError(f"unknown config key(s) in {section!r}: {', '.join(unknown)}")
    try:
        return cls(**data, **fixed)
    except TypeError as exc:
        raise ValidationError(f"bad value in config section {section!r}: {exc}") from None


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    top = {"seed", "simulation", "fkm", "analysis", "output"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    sim = data.get("simulation")
    if sim is None:
        sim = {}
    if not isinstance(sim, dict):
        raise ValidationError("config section 'simulation' must be an object")
    sim = dict(sim)
    if isinstance(sim.get("policies"), list):
        sim["policies"] = tuple(sim["policies"])
    return RunConfig(
        seed=seed,
        simulation=_build(SimConfig, sim, "simulation", seed=seed),
        fkm=_build(FkmParams, data.get("fkm"), "fkm", seed=seed),
        analysis=_build(AnalysisOptions, data.get("analysis"), "analysis"),
        output=_build(OutputOptions, data.get("output"), "output"),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(data)
