"""Pipeline configuration: JSON file, flag overrides, defaults.

Precedence is flag > file > default. Every command echoes the resolved
configuration next to its outputs so a run can be reproduced exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .hard_prototypes import FringeConfig
from .mixture import EmConfig
from .scoring import SCORE_METHODS
from .synthetic import SynthConfig

_TOP_LEVEL_KEYS = {
    "paths",
    "k",
    "refine_percentile",
    "id_cluster_count",
    "fringe_per_cluster",
    "alpha_low",
    "alpha_high",
    "temperature",
    "method",
    "seed",
    "max_iterations",
    "convergence_tolerance",
    "variance_floor",
    "eval_bins",
    "eval_range",
    "synth",
}

_PATH_KEYS = {"id_labels", "outlier_labels", "id_test", "ood_tests", "no_embeddings"}


@dataclass
class PipelineConfig:
    paths: dict = field(default_factory=dict)
    k: int = 500
    refine_percentile: float = 10.0
    id_cluster_count: int = 5
    fringe_per_cluster: int = 30
    alpha_low: float = 0.0
    alpha_high: float = 0.5
    temperature: float = 0.01
    method: str = "clipn_ole"
    seed: int = 7
    max_iterations: int = 200
    convergence_tolerance: float = 1e-6
    variance_floor: float = 1e-6
    eval_bins: int = 50
    eval_range: tuple[float, float] = (0.0, 1.0)
    synth: SynthConfig | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("k must be a positive integer")
        if not 0.0 < self.refine_percentile <= 100.0:
            raise ValidationError("refine_percentile must lie in (0, 100]")
        if self.method not in SCORE_METHODS:
            raise ValidationError(
                f"method must be one of {SCORE_METHODS}, got {self.method!r}"
            )
        if self.eval_bins < 1:
            raise ValidationError("eval_bins must be >= 1")
        lo, hi = self.eval_range
        if not lo < hi:
            raise ValidationError("eval_range must satisfy lo < hi")
        for key in self.paths:
            if key not in _PATH_KEYS:
                raise ValidationError(f"unknown paths entry {key!r}")
        ood = self.paths.get("ood_tests", {})
        if ood and not isinstance(ood, dict):
            raise ValidationError("paths.ood_tests must map dataset names to files")
        # constructing the sub-configs validates their ranges
        self.em_config()
        self.fringe_config()

    def em_config(self) -> EmConfig:
        return EmConfig(
            max_iterations=self.max_iterations,
            convergence_tolerance=self.convergence_tolerance,
            variance_floor=self.variance_floor,
            seed=self.seed,
        )

    def fringe_config(self) -> FringeConfig:
        return FringeConfig(
            id_cluster_count=self.id_cluster_count,
            fringe_per_cluster=self.fringe_per_cluster,
            alpha_low=self.alpha_low,
            alpha_high=self.alpha_high,
            seed=self.seed,
        )

    def path(self, key: str, required: bool = True) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise ValidationError(f"config is missing required path {key!r}")
            return None
        return Path(value)

    def echo(self) -> dict:
        """The resolved configuration, sufficient to re-run exactly."""
        payload = {
            "paths": dict(self.paths),
            "k": self.k,
            "refine_percentile": self.refine_percentile,
            "id_cluster_count": self.id_cluster_count,
            "fringe_per_cluster": self.fringe_per_cluster,
            "alpha_low": self.alpha_low,
            "alpha_high": self.alpha_high,
            "temperature": self.temperature,
            "method": self.method,
            "seed": self.seed,
            "max_iterations": self.max_iterations,
            "convergence_tolerance": self.convergence_tolerance,
            "variance_floor": self.variance_floor,
            "eval_bins": self.eval_bins,
            "eval_range": list(self.eval_range),
        }
        if self.synth is not None:
            payload["synth"] = dataclasses.asdict(self.synth)
        return payload


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from an optional JSON file plus overrides."""
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file does not exist: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config file must contain a JSON object")
    for key in data:
        if key not in _TOP_LEVEL_KEYS:
            raise ValidationError(f"unknown config key {key!r}")
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _TOP_LEVEL_KEYS:
            raise ValidationError(f"unknown config override {key!r}")
        merged[key] = value

    synth = None
    if merged.get("synth") is not None:
        synth_data = merged.pop("synth")
        if not isinstance(synth_data, dict):
            raise ValidationError("config synth section must be a JSON object")
        # the world inherits the pipeline seed unless it pins its own
        synth_data.setdefault("seed", merged.get("seed", PipelineConfig.seed))
        try:
            synth = SynthConfig(**synth_data)
        except TypeError as exc:
            raise ValidationError(f"bad synth section: {exc}") from exc
    else:
        merged.pop("synth", None)

    if "eval_range" in merged:
        rng = merged["eval_range"]
        if not (isinstance(rng, (list, tuple)) and len(rng) == 2):
            raise ValidationError("eval_range must be a [lo, hi] pair")
        merged["eval_range"] = (float(rng[0]), float(rng[1]))

    try:
        return PipelineConfig(synth=synth, **merged)
    except TypeError as exc:
        raise ValidationError(f"bad config: {exc}") from exc
