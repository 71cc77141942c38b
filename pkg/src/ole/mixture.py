"""Diagonal-covariance Gaussian mixtures fitted with EM.

The mixture is fitted over outlier prompt embeddings; its component
means, renormalized to the unit sphere, become the raw outlier
prototypes. Initialization is k-means++ plus Lloyd, then uniform
weights and within-cluster variances, which makes the whole fit
deterministic given a seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .embeddings import LabeledEmbeddings
from .errors import (
    FormatError,
    NumericError,
    TruncatedFileError,
    ValidationError,
    ZeroRowError,
)
from .kmeans import run_kmeans
from .prototypes import LearnedProvenance, PrototypeSet, TAG_LEARNED
from .validation import check_positive, check_same_dim

GMM_MAGIC = b"OLEG"
GMM_VERSION = 1


@dataclass(frozen=True)
class EmConfig:
    """Controls for the EM loop the source method leaves open."""

    max_iterations: int = 200
    convergence_tolerance: float = 1e-6
    variance_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be a positive integer")
        check_positive(self.convergence_tolerance, "convergence_tolerance")
        check_positive(self.variance_floor, "variance_floor")
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")


@dataclass(frozen=True, eq=False)
class GmmModel:
    """A fitted K-component diagonal Gaussian mixture."""

    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K, d), floored positive
    weights: np.ndarray  # (K,), sums to 1
    loglik_trace: np.ndarray  # per-iteration total log-likelihood

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64, copy=True)
        variances = np.array(self.variances, dtype=np.float64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        trace = np.array(self.loglik_trace, dtype=np.float64, copy=True)
        if means.ndim != 2 or variances.shape != means.shape:
            raise ValidationError("means and variances must share a (K, d) shape")
        if weights.shape != (means.shape[0],):
            raise ValidationError("weights must have one entry per component")
        if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValidationError("weights must be non-negative and sum to 1")
        if np.any(variances <= 0):
            raise ValidationError("variances must be strictly positive")
        for arr in (means, variances, weights, trace):
            arr.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "loglik_trace", trace)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


def kmeans_init(data: LabeledEmbeddings, n_components: int, seed: int) -> np.ndarray:
    """k-means++ seeded, Lloyd-iterated initial means (Euclidean)."""
    _check_fit_inputs(data, n_components, minimum_rows=1)
    centers, _ = run_kmeans(data.matrix, n_components, seed)
    return centers


def _check_fit_inputs(data: LabeledEmbeddings, k: int, minimum_rows: int) -> None:
    if k < 1:
        raise ValidationError(f"component count must be >= 1, got {k}")
    if k > data.n:
        raise ValidationError(f"component count {k} exceeds row count {data.n}")
    if data.n < minimum_rows:
        raise ValidationError(f"need at least {minimum_rows} rows, got {data.n}")
    if not data.normalized:
        raise ValidationError("fit inputs must be unit-normalized")


def _log_density(matrix: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Per-row, per-component log N(x | mu_k, diag(sigma_k^2)); shape (n, K)."""
    d = matrix.shape[1]
    inv = 1.0 / variances  # (K, d)
    const = -0.5 * (d * np.log(2.0 * np.pi) + np.sum(np.log(variances), axis=1))  # (K,)
    quad = (
        (matrix**2) @ inv.T
        - 2.0 * (matrix @ (means * inv).T)
        + np.sum(means**2 * inv, axis=1)[None, :]
    )
    return const[None, :] - 0.5 * quad


def fit_gmm(data: LabeledEmbeddings, n_components: int, config: EmConfig | None = None) -> GmmModel:
    """Fit a diagonal-covariance mixture with EM.

    Starts from k-means++/Lloyd means, uniform weights, and per-cluster
    population variances; stops when the total log-likelihood changes by
    less than ``convergence_tolerance`` or after ``max_iterations``.
    """
    config = config or EmConfig()
    _check_fit_inputs(data, n_components, minimum_rows=2)
    x = data.matrix
    n, _ = x.shape
    k = n_components

    centers, assign = run_kmeans(x, k, config.seed)
    means = centers.copy()
    variances = np.empty_like(means)
    for c in range(k):
        members = x[assign == c]
        if members.shape[0] == 0:
            variances[c] = config.variance_floor
        else:
            variances[c] = members.var(axis=0)
    variances = np.maximum(variances, config.variance_floor)
    weights = np.full(k, 1.0 / k)

    trace: list[float] = []
    previous = None
    for _ in range(config.max_iterations):
        with np.errstate(divide="ignore"):
            joint = _log_density(x, means, variances) + np.log(weights)[None, :]
        row_ll = logsumexp(joint, axis=1)
        total = float(row_ll.sum())
        if not np.isfinite(total):
            raise NumericError("log-likelihood is not finite; data is degenerate")
        trace.append(total)
        if previous is not None and abs(total - previous) < config.convergence_tolerance:
            break
        previous = total

        resp = np.exp(joint - row_ll[:, None])  # (n, K)
        nk = resp.sum(axis=0)
        weights = nk / n
        occupied = nk > 0
        safe_nk = np.where(occupied, nk, 1.0)
        new_means = (resp.T @ x) / safe_nk[:, None]
        second = (resp.T @ (x**2)) / safe_nk[:, None]
        new_vars = np.maximum(second - new_means**2, config.variance_floor)
        # components with zero responsibility keep their previous parameters
        means = np.where(occupied[:, None], new_means, means)
        variances = np.where(occupied[:, None], new_vars, variances)

    return GmmModel(means=means, variances=variances, weights=weights, loglik_trace=trace)


def log_likelihood(model: GmmModel, data: LabeledEmbeddings) -> float:
    """Total log-likelihood of ``data`` under ``model`` (log-sum-exp stabilized)."""
    check_same_dim(model.d, data.d, "model and data")
    with np.errstate(divide="ignore"):
        joint = _log_density(data.matrix, model.means, model.variances) + np.log(model.weights)[None, :]
    return float(logsumexp(joint, axis=1).sum())


def extract_prototypes(model: GmmModel) -> PrototypeSet:
    """Renormalize component means onto the unit sphere as learned prototypes."""
    norms = np.linalg.norm(model.means, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroRowError("component mean has zero norm", row=int(zero[0]))
    vectors = model.means / norms[:, None]
    provenance = tuple(
        LearnedProvenance(component=k, weight=float(model.weights[k]))
        for k in range(model.n_components)
    )
    return PrototypeSet(
        vectors=vectors,
        tags=(TAG_LEARNED,) * model.n_components,
        provenance=provenance,
    )


# --------------------------------------------------------------------------
# OLE-GMM v1 serialization


def save_gmm(model: GmmModel, path) -> None:
    path = Path(path)
    k, d = model.means.shape
    parts = [struct.pack("<4sHII", GMM_MAGIC, GMM_VERSION, k, d)]
    parts.append(model.weights.astype("<f8").tobytes())
    parts.append(model.means.astype("<f8").tobytes())
    parts.append(model.variances.astype("<f8").tobytes())
    parts.append(struct.pack("<I", model.loglik_trace.shape[0]))
    parts.append(model.loglik_trace.astype("<f8").tobytes())
    path.write_bytes(b"".join(parts))


def load_gmm(path) -> GmmModel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"model file does not exist: {path}")
    buf = path.read_bytes()

    def take(count: int, offset: int) -> bytes:
        if offset + count > len(buf):
            raise TruncatedFileError(f"file truncated: needed {count} bytes", offset=len(buf))
        return buf[offset : offset + count]

    if take(4, 0) != GMM_MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {GMM_MAGIC!r}", offset=0)
    (version,) = struct.unpack("<H", take(2, 4))
    if version != GMM_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    k, d = struct.unpack("<II", take(8, 6))
    off = 14
    weights = np.frombuffer(take(8 * k, off), dtype="<f8").copy()
    off += 8 * k
    means = np.frombuffer(take(8 * k * d, off), dtype="<f8").reshape(k, d).copy()
    off += 8 * k * d
    variances = np.frombuffer(take(8 * k * d, off), dtype="<f8").reshape(k, d).copy()
    off += 8 * k * d
    (trace_len,) = struct.unpack("<I", take(4, off))
    off += 4
    trace = np.frombuffer(take(8 * trace_len, off), dtype="<f8").copy()
    off += 8 * trace_len
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes", offset=off)
    return GmmModel(means=means, variances=variances, weights=weights, loglik_trace=trace)
