"""Outlier label exposure for zero-shot OOD detection over embeddings."""

from .detector import OleDetector
from .embeddings import (
    LabeledEmbeddings,
    load_embeddings,
    normalize_rows,
    save_embeddings,
    similarity_matrix,
)
from .errors import (
    DimensionMismatchError,
    FormatError,
    LabelCountError,
    NonFiniteValueError,
    NumericError,
    OleError,
    TruncatedFileError,
    ValidationError,
    ZeroRowError,
)
from .hard_prototypes import (
    FringeConfig,
    cluster_id_classes,
    generate_hard_prototypes,
    mix_embedding,
    select_fringe,
)
from .metrics import DetectionReport, auroc, evaluate, fpr_at_tpr, score_histogram
from .mixture import (
    EmConfig,
    GmmModel,
    extract_prototypes,
    fit_gmm,
    kmeans_init,
    load_gmm,
    log_likelihood,
    save_gmm,
)
from .prototypes import (
    HardProvenance,
    LearnedProvenance,
    PrototypeSet,
    id_alignment_scores,
    load_prototypes,
    percentile_threshold,
    refine_prototypes,
    save_prototypes,
)
from .scoring import (
    SCORE_METHODS,
    ScoringContext,
    id_score,
    no_probabilities,
    score_batch,
    yes_probabilities,
    yes_probabilities_ole,
)
from .synthetic import SynthConfig, SynthWorld, generate_world

__version__ = "0.1.0"

__all__ = [
    "DetectionReport",
    "DimensionMismatchError",
    "EmConfig",
    "FormatError",
    "FringeConfig",
    "GmmModel",
    "HardProvenance",
    "LabelCountError",
    "LabeledEmbeddings",
    "LearnedProvenance",
    "NonFiniteValueError",
    "NumericError",
    "OleDetector",
    "OleError",
    "PrototypeSet",
    "SCORE_METHODS",
    "ScoringContext",
    "SynthConfig",
    "SynthWorld",
    "TruncatedFileError",
    "ValidationError",
    "ZeroRowError",
    "auroc",
    "cluster_id_classes",
    "evaluate",
    "extract_prototypes",
    "fit_gmm",
    "fpr_at_tpr",
    "generate_hard_prototypes",
    "generate_world",
    "id_alignment_scores",
    "id_score",
    "kmeans_init",
    "load_embeddings",
    "load_gmm",
    "load_prototypes",
    "log_likelihood",
    "mix_embedding",
    "no_probabilities",
    "normalize_rows",
    "percentile_threshold",
    "refine_prototypes",
    "save_embeddings",
    "save_gmm",
    "save_prototypes",
    "score_batch",
    "score_histogram",
    "similarity_matrix",
    "yes_probabilities",
    "yes_probabilities_ole",
]
