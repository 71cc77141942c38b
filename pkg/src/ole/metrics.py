"""Detection metrics and the structured evaluation report.

Scores follow the ID-as-positive convention: an OOD decision thresholds
from below, AUROC is the probability that a random ID score exceeds a
random OOD score (ties count half), and FPR@95 is the fraction of OOD
scores at or above the largest threshold that still classifies at least
95% of ID samples as ID.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError


def _as_scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite scores")
    return arr


def auroc(id_scores, ood_scores) -> float:
    """P(random ID score > random OOD score), ties at half credit.

    Computed exactly via average ranks (equivalent to trapezoidal ROC
    integration and to brute-force pairwise counting).
    """
    ids = _as_scores(id_scores, "id_scores")
    oods = _as_scores(ood_scores, "ood_scores")
    ranks = rankdata(np.concatenate([ids, oods]), method="average")
    n_id, n_ood = ids.size, oods.size
    wins = ranks[:n_id].sum() - n_id * (n_id + 1) / 2.0
    return float(wins / (n_id * n_ood))


def fpr_at_tpr(id_scores, ood_scores, tpr: float = 0.95) -> float:
    """False positive rate on OOD at the threshold keeping TPR >= ``tpr``.

    The threshold is the largest value t such that the fraction of ID
    scores >= t is still >= tpr; samples scoring >= t classify as ID.
    """
    ids = _as_scores(id_scores, "id_scores")
    oods = _as_scores(ood_scores, "ood_scores")
    if not 0.0 < tpr <= 1.0:
        raise ValidationError(f"tpr must lie in (0, 1], got {tpr}")
    n = ids.size
    ordered = np.sort(ids)
    # smallest k with k/n >= tpr, computed with the same float comparison
    k = max(1, min(n, int(np.ceil(tpr * n))))
    while k > 1 and (k - 1) / n >= tpr:
        k -= 1
    while k < n and k / n < tpr:
        k += 1
    threshold = ordered[n - k]
    return float(np.mean(oods >= threshold))


def score_histogram(scores, bins: int, lo: float, hi: float) -> np.ndarray:
    """Uniform-width counts over [lo, hi]; out-of-range values clamp to end bins.

    Bins are left-closed right-open, except the final bin which also
    includes ``hi``. Counts always sum to the number of scores.
    """
    if not lo < hi:
        raise ValidationError(f"invalid histogram range [{lo}, {hi}]")
    if bins < 1:
        raise ValidationError("histogram needs at least one bin")
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        return np.zeros(bins, dtype=np.int64)
    idx = np.floor((arr - lo) / (hi - lo) * bins).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    return np.bincount(idx, minlength=bins)


@dataclass(frozen=True)
class DatasetResult:
    name: str
    fpr95: float
    auroc: float
    id_hist: tuple[int, ...]
    ood_hist: tuple[int, ...]


@dataclass(frozen=True)
class DetectionReport:
    """Per-dataset FPR95/AUROC records plus their arithmetic mean."""

    datasets: tuple[DatasetResult, ...]
    average_fpr95: float
    average_auroc: float
    config_echo: dict

    def to_json_dict(self) -> dict:
        # Fixed field order, 6-decimal values for diffability, raw values alongside.
        return {
            "datasets": [
                {
                    "name": r.name,
                    "fpr95": round(r.fpr95, 6),
                    "auroc": round(r.auroc, 6),
                    "fpr95_raw": r.fpr95,
                    "auroc_raw": r.auroc,
                    "id_hist": list(r.id_hist),
                    "ood_hist": list(r.ood_hist),
                }
                for r in self.datasets
            ],
            "average": {
                "fpr95": round(self.average_fpr95, 6),
                "auroc": round(self.average_auroc, 6),
                "fpr95_raw": self.average_fpr95,
                "auroc_raw": self.average_auroc,
            },
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @staticmethod
    def from_json_dict(payload: dict) -> "DetectionReport":
        datasets = tuple(
            DatasetResult(
                name=entry["name"],
                fpr95=entry["fpr95_raw"],
                auroc=entry["auroc_raw"],
                id_hist=tuple(entry["id_hist"]),
                ood_hist=tuple(entry["ood_hist"]),
            )
            for entry in payload["datasets"]
        )
        return DetectionReport(
            datasets=datasets,
            average_fpr95=payload["average"]["fpr95_raw"],
            average_auroc=payload["average"]["auroc_raw"],
            config_echo=payload.get("config_echo", {}),
        )

    @staticmethod
    def from_json(text: str) -> "DetectionReport":
        return DetectionReport.from_json_dict(json.loads(text))

    @staticmethod
    def load(path) -> "DetectionReport":
        return DetectionReport.from_json(Path(path).read_text(encoding="utf-8"))


def evaluate(
    id_scores,
    named_ood_score_sets: dict,
    bins: int = 50,
    score_range: tuple[float, float] = (0.0, 1.0),
    config_echo: dict | None = None,
) -> DetectionReport:
    """FPR95/AUROC per OOD dataset plus the average row and histograms."""
    ids = _as_scores(id_scores, "id_scores")
    if not named_ood_score_sets:
        raise ValidationError("need at least one OOD score set")
    lo, hi = float(score_range[0]), float(score_range[1])
    id_hist = tuple(int(c) for c in score_histogram(ids, bins, lo, hi))
    results = []
    for name, scores in named_ood_score_sets.items():
        oods = _as_scores(scores, f"ood_scores[{name}]")
        results.append(
            DatasetResult(
                name=str(name),
                fpr95=fpr_at_tpr(ids, oods),
                auroc=auroc(ids, oods),
                id_hist=id_hist,
                ood_hist=tuple(int(c) for c in score_histogram(oods, bins, lo, hi)),
            )
        )
    return DetectionReport(
        datasets=tuple(results),
        average_fpr95=float(np.mean([r.fpr95 for r in results])),
        average_auroc=float(np.mean([r.auroc for r in results])),
        config_echo=dict(config_echo or {}),
    )
