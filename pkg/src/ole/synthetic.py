"""Seeded synthetic embedding worlds on the unit sphere.

The generator builds a fully-labeled desk-scale stand-in for a
zero-shot OOD benchmark with ground truth known by construction:

* ID class directions and outlier concept directions, mutually
  separated by a minimum angle enforced through rejection sampling.
  A subset of concepts is "unseen": OOD test images are drawn from
  them, but no outlier label ever is (mirroring a sanitized label
  set that cannot overlap the real OOD classes).
* Outlier label embeddings around the seen concepts, plus noise
  synonyms sitting right next to randomly chosen ID classes.
* "no"-branch embeddings fabricated as renormalized antipodes of the
  ID class directions, so CLIPN-style scoring runs end to end.
* ID test images around their class directions, a fraction of them
  atypical (much larger angular noise in a random direction, so they
  fall toward the ID boundary without approaching any concept), and
  OOD test images around concepts (easy) or spread along the corridor
  between an ID class and its nearest concept (hard), which is exactly
  the region hard-prototype mixing covers.

All randomness flows through one seeded generator in a fixed order,
so a config is reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import LabeledEmbeddings, save_embeddings
from .errors import NumericError, ValidationError
from .hard_prototypes import cluster_id_classes, select_fringe

WORLD_FILES = {
    "id_labels": "id_labels.oleemb",
    "outlier_labels": "outlier_labels.oleemb",
    "no_embeddings": "no_embeddings.oleemb",
    "id_test": "id_test.oleemb",
    "ood_test": "ood_test.oleemb",
    "concepts": "concepts.oleemb",
    "ground_truth": "ground_truth.csv",
}

_MAX_REJECTION_ATTEMPTS = 2000


@dataclass(frozen=True)
class SynthConfig:
    dimension: int = 64
    id_class_count: int = 20
    outlier_label_count: int = 400
    noise_synonym_count: int = 40
    id_test_per_class: int = 50
    ood_test_count: int = 500
    hard_ood_fraction: float = 0.3
    concept_spread: float = 0.1
    seed: int = 7
    # world-shape knobs beyond the headline counts
    outlier_concept_count: int = 20
    unseen_concept_count: int = 5
    unseen_ood_fraction: float = 0.25
    atypical_id_fraction: float = 0.2
    atypical_noise_low: float = 2.5
    atypical_noise_high: float = 8.0
    drift_id_fraction: float = 0.05
    drift_mix_low: float = 0.2
    drift_mix_high: float = 0.4
    test_noise_scale: float = 1.5
    hard_mix_low: float = 0.35
    hard_mix_high: float = 0.85
    hard_fringe_clusters: int = 5
    concept_id_max_cos: float = 0.25
    synonym_spread_scale: float = 0.5

    def __post_init__(self):
        counts = {
            "dimension": self.dimension,
            "id_class_count": self.id_class_count,
            "outlier_label_count": self.outlier_label_count,
            "id_test_per_class": self.id_test_per_class,
            "ood_test_count": self.ood_test_count,
            "outlier_concept_count": self.outlier_concept_count,
        }
        for name, value in counts.items():
            if value < 1:
                raise ValidationError(f"{name} must be positive, got {value}")
        if self.noise_synonym_count < 0 or self.noise_synonym_count > self.outlier_label_count:
            raise ValidationError("noise_synonym_count must lie in [0, outlier_label_count]")
        if self.unseen_concept_count < 0:
            raise ValidationError("unseen_concept_count must be non-negative")
        if not 0.0 <= self.hard_ood_fraction <= 1.0:
            raise ValidationError("hard_ood_fraction must lie in [0, 1]")
        if not 0.0 <= self.unseen_ood_fraction <= 1.0:
            raise ValidationError("unseen_ood_fraction must lie in [0, 1]")
        if not 0.0 <= self.atypical_id_fraction <= 1.0:
            raise ValidationError("atypical_id_fraction must lie in [0, 1]")
        if not 0.0 < self.atypical_noise_low < self.atypical_noise_high:
            raise ValidationError("need 0 < atypical_noise_low < atypical_noise_high")
        if not 0.0 <= self.drift_id_fraction <= 1.0:
            raise ValidationError("drift_id_fraction must lie in [0, 1]")
        if not 0.0 < self.drift_mix_low < self.drift_mix_high < 1.0:
            raise ValidationError("need 0 < drift_mix_low < drift_mix_high < 1")
        if not self.concept_spread > 0:
            raise ValidationError("concept_spread must be positive")
        if not 0.0 < self.hard_mix_low < self.hard_mix_high <= 1.0:
            raise ValidationError("need 0 < hard_mix_low < hard_mix_high <= 1")
        if not 1 <= self.hard_fringe_clusters <= self.id_class_count:
            raise ValidationError("hard_fringe_clusters must lie in [1, id_class_count]")
        if not 0.0 < self.concept_id_max_cos <= 1.0:
            raise ValidationError("concept_id_max_cos must lie in (0, 1]")
        if not self.synonym_spread_scale > 0:
            raise ValidationError("synonym_spread_scale must be positive")


@dataclass(frozen=True)
class SynthWorld:
    """A generated world plus per-test-row ground truth."""

    config: SynthConfig
    id_class_embeddings: LabeledEmbeddings
    outlier_label_embeddings: LabeledEmbeddings
    no_embeddings: LabeledEmbeddings
    id_test_images: LabeledEmbeddings
    ood_test_images: LabeledEmbeddings
    concept_directions: LabeledEmbeddings  # seen concepts first, then unseen
    ground_truth_split: tuple[str, ...]  # "id" / "ood", id_test rows then ood_test rows
    ground_truth_concept: tuple[int, ...]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_embeddings(self.id_class_embeddings, directory / WORLD_FILES["id_labels"])
        save_embeddings(self.outlier_label_embeddings, directory / WORLD_FILES["outlier_labels"])
        save_embeddings(self.no_embeddings, directory / WORLD_FILES["no_embeddings"])
        save_embeddings(self.id_test_images, directory / WORLD_FILES["id_test"])
        save_embeddings(self.ood_test_images, directory / WORLD_FILES["ood_test"])
        save_embeddings(self.concept_directions, directory / WORLD_FILES["concepts"])
        with (directory / WORLD_FILES["ground_truth"]).open(
            "w", newline="", encoding="utf-8"
        ) as handle:
            writer = csv.writer(handle)
            writer.writerow(["index", "split", "concept"])
            for i, (split, concept) in enumerate(
                zip(self.ground_truth_split, self.ground_truth_concept)
            ):
                writer.writerow([i, split, concept])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _perturb(rng: np.random.Generator, direction: np.ndarray, angular_scale: float) -> np.ndarray:
    # per-dimension noise of angular_scale/sqrt(d) makes the typical
    # angular deviation approximately angular_scale radians
    d = direction.shape[0]
    noise = rng.normal(0.0, angular_scale / np.sqrt(d), size=d)
    return _unit(direction + noise)


def _separated_directions(
    rng: np.random.Generator,
    count: int,
    d: int,
    min_angle: float,
    avoid: np.ndarray | None = None,
    avoid_max_cos: float = 1.0,
) -> np.ndarray:
    """Uniform sphere directions with pairwise angle >= ``min_angle``.

    Candidates whose cosine to any row of ``avoid`` reaches
    ``avoid_max_cos`` are rejected as well.
    """
    max_cos = np.cos(min_angle)
    chosen: list[np.ndarray] = []
    attempts = 0
    while len(chosen) < count:
        attempts += 1
        if attempts > _MAX_REJECTION_ATTEMPTS * count:
            raise NumericError(
                f"could not place {count} directions with {min_angle:.3f} rad separation "
                f"in dimension {d}"
            )
        candidate = _unit(rng.normal(size=d))
        if avoid is not None and avoid.size and float(np.abs(avoid @ candidate).max()) >= avoid_max_cos:
            continue
        if all(float(candidate @ c) < max_cos for c in chosen):
            chosen.append(candidate)
    return np.vstack(chosen)


def generate_world(config: SynthConfig) -> SynthWorld:
    """Build the full world deterministically from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    d = config.dimension
    m = config.id_class_count
    n_seen = config.outlier_concept_count
    n_unseen = config.unseen_concept_count
    spread = config.concept_spread
    test_noise = spread * config.test_noise_scale

    id_dirs = _separated_directions(rng, m, d, 2.0 * spread)
    # concepts keep a minimum angle among themselves and from every ID class,
    # and are additionally capped in alignment to ID classes so that no
    # outlier concept sits close to the ID label space
    all_concepts = _separated_directions(
        rng,
        n_seen + n_unseen,
        d,
        2.0 * spread,
        avoid=id_dirs,
        avoid_max_cos=min(config.concept_id_max_cos, np.cos(2.0 * spread)),
    )
    seen = all_concepts[:n_seen]
    unseen = all_concepts[n_seen:]

    # concept nearest to each ID class, used for drifted ID and hard OOD
    nearest_seen = np.argmax(id_dirs @ seen.T, axis=1)

    id_class_labels = tuple(f"class_{j:02d}" for j in range(m))
    id_class = LabeledEmbeddings(id_dirs, id_class_labels, normalized=True)

    no_rows = np.vstack([_perturb(rng, -id_dirs[j], spread) for j in range(m)])
    no_emb = LabeledEmbeddings(no_rows, id_class_labels, normalized=True)

    n_clean = config.outlier_label_count - config.noise_synonym_count
    label_rows = np.empty((config.outlier_label_count, d))
    label_names: list[str] = []
    for i in range(n_clean):
        concept = i % n_seen
        label_rows[i] = _perturb(rng, seen[concept], spread)
        label_names.append(f"out:{concept}:{i}")
    for i in range(config.noise_synonym_count):
        cls = int(rng.integers(m))
        label_rows[n_clean + i] = _perturb(rng, id_dirs[cls], spread * config.synonym_spread_scale)
        label_names.append(f"syn:{cls}:{i}")
    outlier_labels = LabeledEmbeddings(label_rows, tuple(label_names), normalized=True)

    # ID test images come in three grades per class: tight around the class
    # direction; atypical (large random-direction noise, boundary-grade but
    # pointing at no concept in particular); and drifted (shaded toward the
    # class's nearest concept while still ID)
    n_atypical = int(round(config.atypical_id_fraction * config.id_test_per_class))
    n_drift = int(round(config.drift_id_fraction * config.id_test_per_class))
    id_rows, id_names, id_concepts = [], [], []
    for j in range(m):
        concept_dir = seen[nearest_seen[j]]
        for s in range(config.id_test_per_class):
            if s < n_atypical:
                scale = spread * rng.uniform(config.atypical_noise_low, config.atypical_noise_high)
                base = id_dirs[j]
            elif s < n_atypical + n_drift:
                gamma = rng.uniform(config.drift_mix_low, config.drift_mix_high)
                base = _unit((1.0 - gamma) * id_dirs[j] + gamma * concept_dir)
                scale = test_noise
            else:
                base = id_dirs[j]
                scale = test_noise
            id_rows.append(_perturb(rng, base, scale))
            id_names.append(id_class_labels[j])
            id_concepts.append(j)
    id_test = LabeledEmbeddings(np.vstack(id_rows), tuple(id_names), normalized=True)

    # OOD test images: easy around a concept (seen or unseen), hard spread
    # along the corridor between an ID class and its nearest seen concept
    n_hard = int(round(config.hard_ood_fraction * config.ood_test_count))
    n_easy = config.ood_test_count - n_hard
    n_easy_unseen = int(round(config.unseen_ood_fraction * n_easy)) if n_unseen else 0
    ood_rows, ood_names, ood_concepts = [], [], []
    for i in range(n_easy):
        if i < n_easy_unseen:
            concept = n_seen + int(rng.integers(n_unseen))
        else:
            concept = int(rng.integers(n_seen))
        ood_rows.append(_perturb(rng, all_concepts[concept], test_noise))
        ood_names.append(f"ood:easy:{i}")
        ood_concepts.append(concept)
    # hard OOD attaches to the fringe of the ID label distribution: the
    # least-typical class per cluster, mirroring how fringe classes are
    # selected for hard-prototype generation downstream
    fringe_assign = cluster_id_classes(id_class, config.hard_fringe_clusters, config.seed)
    fringe_classes = select_fringe(id_class, fringe_assign, 1)
    for i in range(n_hard):
        cls = int(fringe_classes[int(rng.integers(len(fringe_classes)))])
        beta = rng.uniform(config.hard_mix_low, config.hard_mix_high)
        concept = int(nearest_seen[cls])
        base = _unit(beta * id_dirs[cls] + (1.0 - beta) * seen[concept])
        ood_rows.append(_perturb(rng, base, test_noise))
        ood_names.append(f"ood:hard:{i}")
        ood_concepts.append(concept)
    ood_test = LabeledEmbeddings(np.vstack(ood_rows), tuple(ood_names), normalized=True)

    concept_labels = tuple(
        [f"seen:{i}" for i in range(n_seen)] + [f"unseen:{i}" for i in range(n_unseen)]
    )
    concepts = LabeledEmbeddings(all_concepts, concept_labels, normalized=True)

    split = ("id",) * id_test.n + ("ood",) * ood_test.n
    concept_gt = tuple(id_concepts) + tuple(ood_concepts)

    return SynthWorld(
        config=config,
        id_class_embeddings=id_class,
        outlier_label_embeddings=outlier_labels,
        no_embeddings=no_emb,
        id_test_images=id_test,
        ood_test_images=ood_test,
        concept_directions=concepts,
        ground_truth_split=split,
        ground_truth_concept=concept_gt,
    )
