"""The end-to-end streaming adaptation loop.

Each arriving mini-batch is (optionally) pre-aligned with the transform fed
back from the previous step, reduced to a subspace, absorbed into the
running mean, aligned to the source through the flow-integral transform,
classified, and (optionally) used to adapt the classifier with its own
pseudo-labels. One pipeline instance owns its state exclusively; all state
values are immutable, so distinct streams can run in parallel freely.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from .classifiers import (
    KINDS,
    LINEAR_MARGIN,
    NEAREST_CLASS_MEAN,
    Classifier,
    classify,
    train_source_classifier,
    update_classifier,
)
from .errors import ConfigError, CutLocusError, DimensionMismatch, RankDeficient
from .grassmann import Subspace, geodesic_distance, orthonormalize
from .means import (
    MeanState,
    icms_update,
    incremental_average_transform,
    init_mean,
    karcher_mean,
)
from .prediction import compensate, predict_next
from .transforms import TransformMatrix, apply_transform, cumulative_transform, gfk_transform

logger = logging.getLogger(__name__)

MEAN_ICMS = "icms"
MEAN_TRANSFORM_AVERAGE = "transform-average"
MEAN_KARCHER = "karcher"
MEAN_NONE = "none"
MEAN_METHODS = (MEAN_ICMS, MEAN_TRANSFORM_AVERAGE, MEAN_KARCHER, MEAN_NONE)


@dataclass(frozen=True, eq=False)
class StreamBatch:
    """One mini-batch of target rows, with labels kept only for scoring."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        object.__setattr__(self, "features", features)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (features.shape[0],):
                raise ValueError("labels must have one entry per feature row")
            object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of one streaming run.

    ``use_prediction`` and ``use_cumulative`` are mutually exclusive (one
    compensates a noisy subspace, the other assumes a smoothly evolving
    one). ``mean_method`` selects the running-mean machinery; the baseline
    methods ("transform-average", "karcher", "none") ignore the feedback /
    prediction / cumulative stages.
    """

    subspace_dim: int
    batch_size: int = 2
    use_feedback: bool = False
    use_prediction: bool = False
    use_cumulative: bool = False
    adaptive_classifier: bool = False
    blend: float = 0.5
    classifier_kind: str = NEAREST_CLASS_MEAN
    update_rate: float = 0.1
    seed: int = 0
    mean_method: str = MEAN_ICMS
    confidence_threshold: float | None = None
    karcher_tol: float = 3e-2
    karcher_max_iter: int = 15

    def __post_init__(self):
        if self.subspace_dim < 1:
            raise ConfigError("subspace_dim must be positive")
        if self.use_prediction and self.use_cumulative:
            raise ConfigError(
                "use_prediction and use_cumulative are mutually exclusive"
            )
        if not 0.0 <= self.blend <= 1.0:
            raise ConfigError("blend must be in [0, 1]")
        if not 0.0 <= self.update_rate <= 1.0:
            raise ConfigError("update_rate must be in [0, 1]")
        if self.classifier_kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.classifier_kind!r}")
        if self.mean_method not in MEAN_METHODS:
            raise ConfigError(f"unknown mean method {self.mean_method!r}")
        if self.mean_method != MEAN_ICMS and (
            self.use_feedback or self.use_prediction or self.use_cumulative
        ):
            raise ConfigError(
                "feedback / prediction / cumulative stages apply only to the "
                "icms mean method"
            )


@dataclass(frozen=True, eq=False)
class BatchRecord:
    """One history row: accuracy plus the convergence diagnostics."""

    index: int
    accuracy: float | None
    dist_source_mean: float
    dist_mean_step: float
    elapsed_ms: float


@dataclass(frozen=True, eq=False)
class PipelineState:
    """Everything carried from one mini-batch to the next."""

    source_subspace: Subspace
    mean_state: MeanState | None
    feedback_transform: TransformMatrix
    classifier: Classifier
    batch_index: int
    history: tuple[BatchRecord, ...]
    avg_transform: TransformMatrix | None = None
    seen_subspaces: tuple[Subspace, ...] = ()


def pca_subspace(x: np.ndarray, k: int) -> Subspace:
    """Top-k principal directions of the mean-centered rows.

    Raises:
        RankDeficient: if the centered scatter has numerical rank < k
            (including the case of too few rows, k > N - 1).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {x.shape}")
    n = x.shape[0]
    if k > n - 1:
        raise RankDeficient(
            f"{n} rows give a centered scatter of rank at most {n - 1} < k={k}"
        )
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0 or s[k - 1] <= 1e-10 * s[0]:
        raise RankDeficient(f"centered data has numerical rank < k={k}")
    return orthonormalize(vt[:k].T)


def average_accuracy(per_batch: list[float] | tuple[float, ...] | np.ndarray) -> float:
    """Arithmetic mean of the per-mini-batch accuracies."""
    values = np.asarray(per_batch, dtype=float)
    if values.size == 0:
        raise ValueError("average_accuracy needs at least one per-batch value")
    return float(np.mean(values))


def recursive_feedback(batch: StreamBatch, transform: TransformMatrix) -> StreamBatch:
    """Pre-align the next batch's features with the fed-back transform."""
    return StreamBatch(
        features=apply_transform(batch.features, transform), labels=batch.labels
    )


def init_pipeline(
    x_s: np.ndarray, y_s: np.ndarray, cfg: PipelineConfig
) -> PipelineState:
    """Embed the source once, train the classifier, start with an identity feedback."""
    x_s = np.asarray(x_s, dtype=float)
    d = x_s.shape[1]
    if 2 * cfg.subspace_dim > d:
        raise ConfigError(
            f"subspace_dim k={cfg.subspace_dim} must satisfy k <= d/2 for d={d}"
        )
    source_subspace = pca_subspace(x_s, cfg.subspace_dim)
    classifier = train_source_classifier(x_s, y_s, kind=cfg.classifier_kind)
    return PipelineState(
        source_subspace=source_subspace,
        mean_state=None,
        feedback_transform=TransformMatrix.identity(d),
        classifier=classifier,
        batch_index=0,
        history=(),
    )


def _confident_rows(
    classifier: Classifier, x: np.ndarray, threshold: float
) -> np.ndarray:
    """Mask of rows whose two best centroid distances are separated enough."""
    diffs = x[:, None, :] - classifier.centroids[None, :, :]
    dists = np.sqrt(np.einsum("nij,nij->ni", diffs, diffs))
    ordered = np.sort(dists, axis=1)
    margin = (ordered[:, 1] - ordered[:, 0]) / (ordered[:, 1] + 1e-12)
    return margin >= threshold


def _aligned_view(classifier: Classifier, align_map: np.ndarray | None) -> Classifier:
    """The classifier carried through the same map the batch went through.

    Source and target must be transformed consistently for the alignment
    scale to be immaterial to nearest-class-mean decisions, so the stored
    (raw-space) centroids are viewed through the batch's full alignment
    map at decision time. Linear-margin weights already live on the raw
    side of the map (score w . (x A) = (A w) . x), so they pass unchanged.
    """
    if align_map is None or classifier.kind == LINEAR_MARGIN:
        return classifier
    return replace(classifier, centroids=classifier.centroids @ align_map)


def _batch_accuracy(y_hat: np.ndarray, labels: np.ndarray | None) -> float | None:
    if labels is None:
        return None
    return float(np.mean(y_hat == labels))


def process_batch(
    state: PipelineState, batch: StreamBatch, cfg: PipelineConfig
) -> tuple[np.ndarray | None, float | None, PipelineState]:
    """Run one mini-batch through the loop and return the advanced state.

    A cut-locus failure anywhere in the geometry aborts just this batch:
    the event is logged, and (None, None, unchanged state) is returned so
    that one degenerate batch cannot kill a long stream. Other errors
    propagate.
    """
    if batch.features.shape[1] != state.source_subspace.ambient_dim:
        raise DimensionMismatch(
            f"batch dim {batch.features.shape[1]} does not match source dim "
            f"{state.source_subspace.ambient_dim}"
        )
    started = time.perf_counter()
    n = state.batch_index + 1
    try:
        if cfg.mean_method == MEAN_NONE:
            y_hat = classify(state.classifier, batch.features)
            return _finalize(
                state, batch, cfg, y_hat, state.mean_state,
                state.feedback_transform, None, (), 0.0, 0.0, started,
            )

        aligned = (
            apply_transform(batch.features, state.feedback_transform)
            if cfg.use_feedback
            else batch.features
        )
        observed = pca_subspace(aligned, cfg.subspace_dim)

        if cfg.mean_method == MEAN_ICMS:
            if cfg.use_prediction and state.mean_state is not None \
                    and state.mean_state.prev_mean is not None:
                predicted = predict_next(
                    state.mean_state.prev_mean, state.mean_state.mean
                )
                compensated = compensate(predicted, observed, cfg.blend)
            else:
                compensated = observed
            mean_state = (
                init_mean(compensated)
                if state.mean_state is None
                else icms_update(state.mean_state, compensated)
            )
            seen = ()
            avg_transform = None
            if cfg.use_cumulative and mean_state.prev_mean is not None:
                transform = cumulative_transform(
                    state.source_subspace, mean_state.prev_mean, mean_state.mean
                )
            else:
                transform = gfk_transform(state.source_subspace, mean_state.mean)
        elif cfg.mean_method == MEAN_KARCHER:
            seen = state.seen_subspaces + (observed,)
            result = karcher_mean(
                seen, tol=cfg.karcher_tol, max_iter=cfg.karcher_max_iter
            )
            prev = state.mean_state.mean if state.mean_state else None
            mean_state = MeanState(mean=result.subspace, prev_mean=prev, count=n)
            avg_transform = None
            transform = gfk_transform(state.source_subspace, mean_state.mean)
        else:  # transform-average: the mean lives on the matrices, not the manifold
            seen = ()
            prev = state.mean_state.mean if state.mean_state else None
            mean_state = MeanState(mean=observed, prev_mean=prev, count=n)
            batch_transform = gfk_transform(state.source_subspace, observed)
            avg_transform = incremental_average_transform(
                state.avg_transform, batch_transform, n
            )
            transform = avg_transform

        x_aligned = apply_transform(aligned, transform)
        align_map = (
            state.feedback_transform.g @ transform.g
            if cfg.use_feedback
            else transform.g
        )
        view = _aligned_view(state.classifier, align_map)
        y_hat = classify(view, x_aligned)
        dist_source = geodesic_distance(state.source_subspace, mean_state.mean)
        dist_step = (
            geodesic_distance(mean_state.prev_mean, mean_state.mean)
            if mean_state.prev_mean is not None
            else 0.0
        )
        return _finalize(
            state, batch, cfg, y_hat, mean_state, transform,
            avg_transform, seen, dist_source, dist_step, started,
            view=view, x_aligned=x_aligned,
        )
    except CutLocusError as err:
        logger.warning("batch %d skipped at the cut locus: %s", n, err)
        return None, None, state


def _finalize(
    state: PipelineState,
    batch: StreamBatch,
    cfg: PipelineConfig,
    y_hat: np.ndarray,
    mean_state: MeanState | None,
    feedback: TransformMatrix,
    avg_transform: TransformMatrix | None,
    seen: tuple[Subspace, ...],
    dist_source: float,
    dist_step: float,
    started: float,
    view: Classifier | None = None,
    x_aligned: np.ndarray | None = None,
) -> tuple[np.ndarray, float | None, PipelineState]:
    classifier = state.classifier
    if cfg.adaptive_classifier and cfg.update_rate > 0.0:
        # Pseudo-labels come from the aligned space; the raw-anchored
        # centroids are blended with raw batch rows so the stored model and
        # its per-batch aligned view stay in consistent coordinates.
        if cfg.confidence_threshold is not None and view is not None:
            mask = _confident_rows(view, x_aligned, cfg.confidence_threshold)
        else:
            mask = np.ones(batch.size, dtype=bool)
        if mask.any():
            classifier = update_classifier(
                classifier, batch.features[mask], y_hat[mask], cfg.update_rate
            )
    accuracy = _batch_accuracy(y_hat, batch.labels)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    record = BatchRecord(
        index=state.batch_index + 1,
        accuracy=accuracy,
        dist_source_mean=dist_source,
        dist_mean_step=dist_step,
        elapsed_ms=elapsed_ms,
    )
    new_state = replace(
        state,
        mean_state=mean_state,
        feedback_transform=feedback,
        classifier=classifier,
        batch_index=state.batch_index + 1,
        history=state.history + (record,),
        avg_transform=avg_transform,
        seen_subspaces=seen,
    )
    return y_hat, accuracy, new_state
