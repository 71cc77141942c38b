"""Scikit-learn style estimator wrapping the full prototype pipeline.

``fit`` consumes the outlier label embeddings (X) together with the ID
class prompt embeddings, learns and refines the outlier prototypes, and
optionally augments them with hard prototypes. ``decision_function``
returns ID-ness scores for image embeddings (higher = more
in-distribution). Row inputs are renormalized onto the unit sphere
automatically.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .embeddings import LabeledEmbeddings, normalize_rows
from .errors import ValidationError
from .hard_prototypes import FringeConfig, cluster_id_classes, generate_hard_prototypes, select_fringe
from .mixture import EmConfig, extract_prototypes, fit_gmm
from .prototypes import refine_prototypes
from .scoring import SCORE_METHODS, ScoringContext, score_batch


def _as_unit_embeddings(x, name: str) -> LabeledEmbeddings:
    if isinstance(x, LabeledEmbeddings):
        return x if x.normalized else normalize_rows(x)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array of embeddings")
    return normalize_rows(LabeledEmbeddings(arr))


class OleDetector(BaseEstimator):
    """Zero-shot OOD detector driven by outlier label exposure.

    Parameters mirror the pipeline configuration: ``n_prototypes`` mixture
    components are fitted to the outlier label embeddings, the
    ``refine_percentile`` furthest-from-ID share of their means is kept,
    and one hard prototype per fringe ID class is generated by mixing the
    class embedding into its nearest prototype.
    """

    def __init__(
        self,
        n_prototypes=500,
        refine_percentile=10.0,
        use_refinement=True,
        use_hard_prototypes=True,
        id_cluster_count=5,
        fringe_per_cluster=30,
        alpha_low=0.0,
        alpha_high=0.5,
        temperature=0.01,
        method="clipn_ole",
        max_iterations=200,
        convergence_tolerance=1e-6,
        variance_floor=1e-6,
        threshold=None,
        random_state=0,
    ):
        self.n_prototypes = n_prototypes
        self.refine_percentile = refine_percentile
        self.use_refinement = use_refinement
        self.use_hard_prototypes = use_hard_prototypes
        self.id_cluster_count = id_cluster_count
        self.fringe_per_cluster = fringe_per_cluster
        self.alpha_low = alpha_low
        self.alpha_high = alpha_high
        self.temperature = temperature
        self.method = method
        self.max_iterations = max_iterations
        self.convergence_tolerance = convergence_tolerance
        self.variance_floor = variance_floor
        self.threshold = threshold
        self.random_state = random_state

    def fit(self, X, y=None, *, id_embeddings=None, no_embeddings=None):
        """Learn outlier prototypes from outlier label embeddings ``X``.

        ``id_embeddings`` (one row per ID class) is required;
        ``no_embeddings`` (one "no"-branch row per class) enables the
        clipn methods.
        """
        if self.method not in SCORE_METHODS:
            raise ValidationError(f"method must be one of {SCORE_METHODS}")
        if id_embeddings is None:
            raise ValidationError("fit requires id_embeddings (one row per ID class)")
        outliers = _as_unit_embeddings(X, "X")
        ids = _as_unit_embeddings(id_embeddings, "id_embeddings")

        em = EmConfig(
            max_iterations=self.max_iterations,
            convergence_tolerance=self.convergence_tolerance,
            variance_floor=self.variance_floor,
            seed=self.random_state,
        )
        self.mixture_ = fit_gmm(outliers, self.n_prototypes, em)
        self.raw_prototypes_ = extract_prototypes(self.mixture_)

        prototypes = self.raw_prototypes_
        self.refine_threshold_ = None
        if self.use_refinement:
            prototypes, self.refine_threshold_ = refine_prototypes(
                prototypes, ids, self.refine_percentile
            )

        self.fringe_indices_ = None
        if self.use_hard_prototypes:
            fringe_cfg = FringeConfig(
                id_cluster_count=self.id_cluster_count,
                fringe_per_cluster=self.fringe_per_cluster,
                alpha_low=self.alpha_low,
                alpha_high=self.alpha_high,
                seed=self.random_state,
            )
            assignments = cluster_id_classes(ids, fringe_cfg.id_cluster_count, self.random_state)
            fringe_idx = select_fringe(ids, assignments, fringe_cfg.fringe_per_cluster)
            fringe = LabeledEmbeddings(
                ids.matrix[fringe_idx],
                tuple(ids.labels[i] for i in fringe_idx) if ids.labels else (),
                normalized=True,
            )
            prototypes = prototypes.concat(generate_hard_prototypes(fringe, prototypes, fringe_cfg))
            self.fringe_indices_ = fringe_idx

        self.prototypes_ = prototypes
        no_matrix = None
        if no_embeddings is not None:
            no_matrix = _as_unit_embeddings(no_embeddings, "no_embeddings").matrix
        self.context_ = ScoringContext(
            id_embeddings=ids.matrix,
            prototypes=prototypes.vectors,
            temperature=self.temperature,
            no_embeddings=no_matrix,
        )
        self.n_features_in_ = ids.d
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "context_"):
            raise ValidationError("this OleDetector instance is not fitted yet")

    def decision_function(self, X) -> np.ndarray:
        """ID-ness score per row of ``X`` (higher = more in-distribution)."""
        self._check_fitted()
        images = _as_unit_embeddings(X, "X")
        return score_batch(images, self.context_, self.method)

    def score_samples(self, X) -> np.ndarray:
        return self.decision_function(X)

    def predict(self, X) -> np.ndarray:
        """+1 for ID, -1 for OOD, at the configured score threshold."""
        if self.threshold is None:
            raise ValidationError("set threshold= to use predict()")
        scores = self.decision_function(X)
        return np.where(scores >= self.threshold, 1, -1)
