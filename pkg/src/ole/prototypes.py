"""Outlier prototype sets and ID-alignment refinement.

Each prototype's alignment to the ID class embeddings is its maximum
inner product over them (with unit vectors, maximum cosine similarity
equals minimum angular distance). Refinement keeps the prototypes
least aligned with the ID classes: exactly ``max(1, floor(p*G/100))``
of them, ranked by alignment score with ties broken toward the smaller
original index. The interpolated percentile threshold is reported
alongside for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import LabeledEmbeddings, load_embeddings, save_embeddings
from .errors import FormatError, ValidationError
from .validation import check_same_dim, check_unit_rows

TAG_LEARNED = "learned"
TAG_HARD = "hard"


@dataclass(frozen=True)
class LearnedProvenance:
    """Prototype extracted from a mixture component."""

    component: int
    weight: float = float("nan")


@dataclass(frozen=True)
class HardProvenance:
    """Prototype generated by mixing a fringe ID embedding into a prototype."""

    fringe_index: int
    prototype_index: int
    alpha: float


@dataclass(frozen=True, eq=False)
class PrototypeSet:
    """Unit-normalized outlier prototype vectors with tags and provenance."""

    vectors: np.ndarray  # (G, d)
    tags: tuple[str, ...]
    provenance: tuple[LearnedProvenance | HardProvenance, ...]

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, order="C", copy=True)
        if vectors.ndim != 2:
            raise ValidationError(f"prototype vectors must be 2-D, got shape {vectors.shape}")
        check_unit_rows(vectors, "prototype vectors")
        tags = tuple(self.tags)
        provenance = tuple(self.provenance)
        if len(tags) != vectors.shape[0] or len(provenance) != vectors.shape[0]:
            raise ValidationError("tags and provenance must have one entry per prototype")
        for tag in tags:
            if tag not in (TAG_LEARNED, TAG_HARD):
                raise ValidationError(f"unknown prototype tag {tag!r}")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "provenance", provenance)

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @staticmethod
    def empty(d: int) -> "PrototypeSet":
        return PrototypeSet(np.empty((0, d)), (), ())

    def select(self, indices: np.ndarray) -> "PrototypeSet":
        idx = np.asarray(indices, dtype=np.int64)
        return PrototypeSet(
            self.vectors[idx],
            tuple(self.tags[i] for i in idx),
            tuple(self.provenance[i] for i in idx),
        )

    def concat(self, other: "PrototypeSet") -> "PrototypeSet":
        check_same_dim(self.d, other.d, "prototype sets")
        return PrototypeSet(
            np.vstack([self.vectors, other.vectors]),
            self.tags + other.tags,
            self.provenance + other.provenance,
        )


def id_alignment_scores(prototypes: PrototypeSet, id_embeddings: LabeledEmbeddings) -> np.ndarray:
    """Max inner product of each prototype over all ID class embeddings."""
    if id_embeddings.n == 0:
        raise ValidationError("ID embedding set is empty")
    if not id_embeddings.normalized:
        raise ValidationError("ID embeddings must be unit-normalized")
    check_same_dim(prototypes.d, id_embeddings.d, "prototypes and ID embeddings")
    if prototypes.size == 0:
        return np.empty(0)
    return (prototypes.vectors @ id_embeddings.matrix.T).max(axis=1)


def percentile_threshold(scores, p: float) -> float:
    """Linear-interpolation percentile of ``scores`` (sort ascending, rank p/100*(n-1))."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("cannot take a percentile of an empty sequence")
    if not 0.0 <= p <= 100.0:
        raise ValidationError(f"percentile must lie in [0, 100], got {p}")
    return float(np.percentile(scores, p))


def retained_count(total: int, p: float) -> int:
    """Exact number of prototypes kept at percentile ``p``: max(1, floor(p*G/100))."""
    return max(1, int(np.floor(p * total / 100.0)))


def refine_prototypes(
    prototypes: PrototypeSet, id_embeddings: LabeledEmbeddings, p: float = 10.0
) -> tuple[PrototypeSet, float]:
    """Keep the prototypes furthest from the ID classes.

    Retains exactly ``max(1, floor(p*G/100))`` prototypes with the
    smallest alignment scores (ties toward the smaller index), preserving
    their original relative order. Returns the refined set and the
    interpolated percentile threshold for diagnostics.
    """
    if prototypes.size == 0:
        raise ValidationError("cannot refine an empty prototype set")
    if not 0.0 < p <= 100.0:
        raise ValidationError(f"refine percentile must lie in (0, 100], got {p}")
    scores = id_alignment_scores(prototypes, id_embeddings)
    keep = retained_count(prototypes.size, p)
    order = np.argsort(scores, kind="stable")
    kept = np.sort(order[:keep])
    return prototypes.select(kept), percentile_threshold(scores, p)


# --------------------------------------------------------------------------
# persistence: prototype sets ride the OLE-EMB v1 format with encoded labels


def _encode_label(tag: str, prov: LearnedProvenance | HardProvenance) -> str:
    if tag == TAG_LEARNED:
        return f"learned:{prov.component}"
    return f"hard:{prov.fringe_index}:{prov.prototype_index}:{prov.alpha:.6f}"


def _decode_label(label: str) -> tuple[str, LearnedProvenance | HardProvenance]:
    parts = label.split(":")
    try:
        if parts[0] == TAG_LEARNED and len(parts) == 2:
            return TAG_LEARNED, LearnedProvenance(component=int(parts[1]))
        if parts[0] == TAG_HARD and len(parts) == 4:
            return TAG_HARD, HardProvenance(
                fringe_index=int(parts[1]),
                prototype_index=int(parts[2]),
                alpha=float(parts[3]),
            )
    except ValueError as exc:
        raise FormatError(f"bad prototype label {label!r}: {exc}") from exc
    raise FormatError(f"bad prototype label {label!r}")


def save_prototypes(prototypes: PrototypeSet, path) -> None:
    labels = tuple(
        _encode_label(tag, prov) for tag, prov in zip(prototypes.tags, prototypes.provenance)
    )
    data = LabeledEmbeddings(prototypes.vectors, labels, normalized=True)
    save_embeddings(data, Path(path), format="binary")


def load_prototypes(path) -> PrototypeSet:
    data = load_embeddings(Path(path), format="binary")
    if data.n and len(data.labels) != data.n:
        raise FormatError("prototype file is missing its provenance labels")
    decoded = [_decode_label(label) for label in data.labels]
    return PrototypeSet(
        vectors=data.matrix,
        tags=tuple(tag for tag, _ in decoded),
        provenance=tuple(prov for _, prov in decoded),
    )
