"""Per-image ID-ness scores.

Every method returns a score where HIGHER means more in-distribution:

    mcm        max temperature-softmax probability over ID classes
    mcm_ole    same, with outlier prototypes in the softmax denominator
    maxlogit   max raw cosine similarity over ID classes
    energy     tau * log-sum-exp of similarities over tau
    clipn      sum_j (1 - p_no_j) * p_yes_j
    clipn_ole  same, with the outlier-normalized p_yes

The outlier-normalized probabilities divide each class term by the
usual softmax denominator PLUS the summed exponentials of the image's
similarities to the outlier prototypes, so images near outlier
prototypes lose probability mass that ID-like images keep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .embeddings import LabeledEmbeddings
from .errors import ValidationError
from .prototypes import PrototypeSet
from .validation import as_float_matrix, check_positive, check_same_dim, check_unit_rows

SCORE_METHODS = ("mcm", "maxlogit", "energy", "clipn", "mcm_ole", "clipn_ole")
NO_BRANCH_METHODS = ("clipn", "clipn_ole")


def _rows(x, name: str) -> np.ndarray:
    if isinstance(x, LabeledEmbeddings):
        return x.matrix
    if isinstance(x, PrototypeSet):
        return x.vectors
    return as_float_matrix(x, name)


@dataclass(frozen=True, eq=False)
class ScoringContext:
    """Frozen inputs to inference.

    ``no_embeddings`` holds one "no"-branch text embedding per ID class;
    ``no_probabilities`` holds a precomputed per-image matrix of p_no
    values aligned row-for-row with the batch being scored. At most one
    of the two may be supplied.
    """

    id_embeddings: np.ndarray  # (M, d) unit rows
    prototypes: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))  # (G, d)
    temperature: float = 0.01
    no_embeddings: np.ndarray | None = None  # (M, d) unit rows
    no_probabilities: np.ndarray | None = None  # (n_images, M) in [0, 1]

    def __post_init__(self):
        ids = _rows(self.id_embeddings, "id_embeddings")
        if ids.shape[0] == 0:
            raise ValidationError("scoring needs at least one ID class embedding")
        check_unit_rows(ids, "id_embeddings")
        protos = _rows(self.prototypes, "prototypes")
        if protos.size == 0:
            protos = np.empty((0, ids.shape[1]))
        else:
            check_same_dim(ids.shape[1], protos.shape[1], "ID embeddings and prototypes")
            check_unit_rows(protos, "prototypes")
        check_positive(self.temperature, "temperature")
        if self.no_embeddings is not None and self.no_probabilities is not None:
            raise ValidationError("supply no_embeddings or no_probabilities, not both")
        no_emb = None
        if self.no_embeddings is not None:
            no_emb = _rows(self.no_embeddings, "no_embeddings")
            if no_emb.shape != ids.shape:
                raise ValidationError(
                    f"no_embeddings shape {no_emb.shape} must match ID shape {ids.shape}"
                )
            check_unit_rows(no_emb, "no_embeddings")
        no_prob = None
        if self.no_probabilities is not None:
            no_prob = as_float_matrix(self.no_probabilities, "no_probabilities")
            if no_prob.shape[1] != ids.shape[0]:
                raise ValidationError(
                    f"no_probabilities must have {ids.shape[0]} columns, got {no_prob.shape[1]}"
                )
            if np.any(no_prob < 0) or np.any(no_prob > 1):
                raise ValidationError("no_probabilities must lie in [0, 1]")
        # defensive copies: the context is immutable and shareable
        ids = ids.copy()
        protos = protos.copy()
        no_emb = None if no_emb is None else no_emb.copy()
        no_prob = None if no_prob is None else no_prob.copy()
        for arr in (ids, protos, no_emb, no_prob):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "id_embeddings", ids)
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "no_embeddings", no_emb)
        object.__setattr__(self, "no_probabilities", no_prob)

    @property
    def n_classes(self) -> int:
        return self.id_embeddings.shape[0]

    @property
    def n_prototypes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def has_no_branch(self) -> bool:
        return self.no_embeddings is not None or self.no_probabilities is not None


def _as_batch(x, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = as_float_matrix(arr, "x")
    check_same_dim(batch.shape[1], d, "images and context")
    return batch, single


def _squeeze(values: np.ndarray, single: bool):
    return values[0] if single else values


def _softmax_with_extra(class_logits: np.ndarray, extra_logits: np.ndarray) -> np.ndarray:
    """Row softmax of ``class_logits`` whose denominator also absorbs
    ``extra_logits``; the stabilizing max runs over both blocks, so an
    empty extra block reduces to the plain softmax bit-for-bit."""
    if extra_logits.shape[1]:
        m = np.maximum(class_logits.max(axis=1), extra_logits.max(axis=1))
    else:
        m = class_logits.max(axis=1)
    num = np.exp(class_logits - m[:, None])
    den = num.sum(axis=1)
    if extra_logits.shape[1]:
        den = den + np.exp(extra_logits - m[:, None]).sum(axis=1)
    return num / den[:, None]


def yes_probabilities(x, ctx: ScoringContext) -> np.ndarray:
    """Temperature softmax over ID class similarities."""
    batch, single = _as_batch(x, ctx.id_embeddings.shape[1])
    logits = (batch @ ctx.id_embeddings.T) / ctx.temperature
    probs = _softmax_with_extra(logits, np.empty((batch.shape[0], 0)))
    return _squeeze(probs, single)


def yes_probabilities_ole(x, ctx: ScoringContext) -> np.ndarray:
    """Class probabilities with prototype similarities added to the denominator."""
    batch, single = _as_batch(x, ctx.id_embeddings.shape[1])
    logits = (batch @ ctx.id_embeddings.T) / ctx.temperature
    extra = (batch @ ctx.prototypes.T) / ctx.temperature
    probs = _softmax_with_extra(logits, extra)
    return _squeeze(probs, single)


def no_probabilities(x, ctx: ScoringContext) -> np.ndarray:
    """Per-class probability that the image does NOT show the class.

    Precomputed values pass through unchanged; otherwise each class pairs
    its "no" embedding against its ID embedding in a two-way softmax.
    """
    if not ctx.has_no_branch:
        raise ValidationError("scoring context has no 'no' branch")
    batch, single = _as_batch(x, ctx.id_embeddings.shape[1])
    if ctx.no_probabilities is not None:
        stored = ctx.no_probabilities
        if stored.shape[0] != batch.shape[0]:
            raise ValidationError(
                f"stored no_probabilities cover {stored.shape[0]} images, got {batch.shape[0]}"
            )
        return _squeeze(stored.copy(), single)
    yes_logits = (batch @ ctx.id_embeddings.T) / ctx.temperature
    no_logits = (batch @ ctx.no_embeddings.T) / ctx.temperature
    return _squeeze(expit(no_logits - yes_logits), single)


def id_score(x, ctx: ScoringContext, method: str = "clipn_ole"):
    """ID-ness score for one image or a batch (higher = more in-distribution)."""
    if method not in SCORE_METHODS:
        raise ValidationError(f"unknown method {method!r}, expected one of {SCORE_METHODS}")
    if method in NO_BRANCH_METHODS and not ctx.has_no_branch:
        raise ValidationError(f"method {method!r} requires a 'no' branch in the context")
    batch, single = _as_batch(x, ctx.id_embeddings.shape[1])

    if method == "maxlogit":
        return _squeeze((batch @ ctx.id_embeddings.T).max(axis=1), single)
    if method == "energy":
        logits = (batch @ ctx.id_embeddings.T) / ctx.temperature
        return _squeeze(ctx.temperature * logsumexp(logits, axis=1), single)
    if method == "mcm":
        return _squeeze(yes_probabilities(batch, ctx).max(axis=1), single)
    if method == "mcm_ole":
        return _squeeze(yes_probabilities_ole(batch, ctx).max(axis=1), single)

    p_no = no_probabilities(batch, ctx)
    if method == "clipn":
        p_yes = yes_probabilities(batch, ctx)
    else:  # clipn_ole
        p_yes = yes_probabilities_ole(batch, ctx)
    return _squeeze(((1.0 - p_no) * p_yes).sum(axis=1), single)


def score_batch(images: LabeledEmbeddings, ctx: ScoringContext, method: str) -> np.ndarray:
    """Score every row of ``images``; output index i pairs with input row i."""
    if not images.normalized:
        raise ValidationError("images must be unit-normalized before scoring")
    return np.atleast_1d(id_score(images.matrix, ctx, method))
