"""Hard outlier prototype generation via embedding mixup.

Fringe ID class embeddings (lowest mean similarity to all ID classes,
selected per cluster) are mixed toward their nearest outlier prototype
with a random coefficient below one half, populating the otherwise
empty region between the ID boundary and the outlier prototypes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import LabeledEmbeddings
from .errors import NumericError, ValidationError
from .kmeans import run_kmeans
from .prototypes import HardProvenance, PrototypeSet, TAG_HARD
from .validation import check_same_dim

MAX_MIX_ATTEMPTS = 8


@dataclass(frozen=True)
class FringeConfig:
    id_cluster_count: int = 5
    fringe_per_cluster: int = 30
    alpha_low: float = 0.0
    alpha_high: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.id_cluster_count < 1:
            raise ValidationError("id_cluster_count must be >= 1")
        if self.fringe_per_cluster < 1:
            raise ValidationError("fringe_per_cluster must be >= 1")
        if not (0.0 <= self.alpha_low < self.alpha_high <= 1.0):
            raise ValidationError(
                f"need 0 <= alpha_low < alpha_high <= 1, got "
                f"({self.alpha_low}, {self.alpha_high})"
            )
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")


def cluster_id_classes(id_embeddings: LabeledEmbeddings, n_clusters: int, seed: int) -> np.ndarray:
    """k-means assignment of each ID class embedding to one of ``n_clusters``."""
    if not id_embeddings.normalized:
        raise ValidationError("ID embeddings must be unit-normalized")
    if n_clusters > id_embeddings.n:
        raise ValidationError(
            f"cluster count {n_clusters} exceeds class count {id_embeddings.n}"
        )
    _, assignments = run_kmeans(id_embeddings.matrix, n_clusters, seed)
    return assignments


def select_fringe(
    id_embeddings: LabeledEmbeddings, assignments: np.ndarray, per_cluster: int
) -> np.ndarray:
    """Pick the least-typical class embeddings, quota applied per cluster.

    Fringeness is the mean inner product to ALL ID class embeddings
    (global, self included); within each cluster the lowest-mean members
    are taken, up to ``per_cluster``. Indices come back in (cluster,
    rank) order.
    """
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape != (id_embeddings.n,):
        raise ValidationError("assignments must have one entry per ID embedding")
    if per_cluster < 1:
        raise ValidationError("per-cluster fringe count must be >= 1")
    if not id_embeddings.normalized:
        raise ValidationError("ID embeddings must be unit-normalized")
    mean_sim = (id_embeddings.matrix @ id_embeddings.matrix.T).mean(axis=1)
    picked: list[int] = []
    for cluster in range(int(assignments.max()) + 1):
        members = np.flatnonzero(assignments == cluster)
        ranked = members[np.argsort(mean_sim[members], kind="stable")]
        picked.extend(int(i) for i in ranked[: min(per_cluster, members.size)])
    return np.asarray(picked, dtype=np.int64)


def mix_embedding(prototype: np.ndarray, fringe: np.ndarray, alpha: float) -> np.ndarray:
    """Renormalized convex combination (1-alpha)*prototype + alpha*fringe.

    alpha == 0 returns the prototype itself, bit-exactly (renormalizing
    an already-unit vector would perturb its last bits).
    """
    if alpha == 0.0:
        return np.array(prototype, dtype=np.float64, copy=True)
    raw = (1.0 - alpha) * prototype + alpha * fringe
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise NumericError("mixture of antipodal parents has zero norm")
    return raw / norm


def generate_hard_prototypes(
    fringe: LabeledEmbeddings, prototypes: PrototypeSet, config: FringeConfig
) -> PrototypeSet:
    """Mix each fringe embedding into its nearest prototype.

    The mixing coefficient is drawn uniformly from the open interval
    (alpha_low, alpha_high); exact endpoints and zero-norm mixtures are
    rejected and redrawn, at most MAX_MIX_ATTEMPTS times per row.
    Output order follows the fringe rows, one hard prototype each.
    """
    if prototypes.size == 0:
        raise ValidationError("cannot mix against an empty prototype set")
    if not fringe.normalized:
        raise ValidationError("fringe embeddings must be unit-normalized")
    check_same_dim(fringe.d, prototypes.d, "fringe embeddings and prototypes")

    rng = np.random.default_rng(config.seed)
    nearest = np.argmax(fringe.matrix @ prototypes.vectors.T, axis=1)  # ties: smaller index

    vectors = np.empty((fringe.n, fringe.d))
    provenance = []
    for i in range(fringe.n):
        parent = prototypes.vectors[nearest[i]]
        for _ in range(MAX_MIX_ATTEMPTS):
            alpha = float(rng.uniform(config.alpha_low, config.alpha_high))
            if alpha <= config.alpha_low or alpha >= config.alpha_high:
                continue
            raw = (1.0 - alpha) * parent + alpha * fringe.matrix[i]
            norm = float(np.linalg.norm(raw))
            if norm == 0.0:
                continue
            vectors[i] = raw / norm
            provenance.append(
                HardProvenance(fringe_index=i, prototype_index=int(nearest[i]), alpha=alpha)
            )
            break
        else:
            raise NumericError(f"no usable mixing coefficient for fringe row {i}")

    return PrototypeSet(
        vectors=vectors, tags=(TAG_HARD,) * fringe.n, provenance=tuple(provenance)
    )
