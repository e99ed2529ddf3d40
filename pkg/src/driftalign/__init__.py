"""Streaming subspace-based domain adaptation on the Grassmann manifold.

The package covers the geometry (subspaces, geodesics, principal angles),
an incremental mean-subspace update with an iterative Karcher reference,
flow-integral alignment matrices (plain and cumulative), next-subspace
prediction with compensation, the end-to-end mini-batch adaptation loop,
and an experiment CLI over CSV or synthetic drifting streams.
"""

from .classifiers import (
    Classifier,
    classify,
    train_source_classifier,
    update_classifier,
)
from .errors import (
    AngleClampWarning,
    AngleOutOfRange,
    BadNodeCount,
    BadParameter,
    BlendOutOfRange,
    ConfigError,
    CsvParseError,
    CutLocusError,
    DimensionMismatch,
    DriftAlignError,
    EmptyClassError,
    LabelOutOfRange,
    LengthMismatch,
    NoConvergence,
    NotTangentError,
    RankDeficient,
)
from .experiments import (
    ExperimentReport,
    MeanComparisonRow,
    SweepCell,
    VARIANTS,
    compare_means,
    config_for_variant,
    rerun_from_report,
    run_experiment,
    sweep,
)
from .grassmann import (
    GeodesicFlow,
    PrincipalDecomposition,
    Subspace,
    exp_map,
    geodesic,
    geodesic_distance,
    geodesic_point,
    log_map,
    orthogonal_completion,
    orthonormalize,
    principal_angles,
    principal_decomposition,
)
from .means import (
    KarcherResult,
    MeanState,
    icms_update,
    incremental_average_transform,
    init_mean,
    karcher_mean,
    karcher_residual,
    perturbed_subspace,
    random_subspace,
)
from .pipeline import (
    BatchRecord,
    PipelineConfig,
    PipelineState,
    StreamBatch,
    average_accuracy,
    init_pipeline,
    pca_subspace,
    process_batch,
    recursive_feedback,
)
from .prediction import VelocityMatrix, compensate, predict_next, velocity_matrix
from .streams import (
    DatasetSpec,
    DriftParams,
    GroundTruth,
    Stream,
    generate_drift_stream,
    load_csv_stream,
    stream_from_params,
    write_csv_stream,
)
from .transforms import (
    TransformMatrix,
    apply_transform,
    cumulative_transform,
    delta_blocks,
    gfk_transform,
    lambda_blocks,
    quadrature_transform,
)

__version__ = "0.1.0"
