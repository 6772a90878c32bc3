"""Landmark-based min-sum clustering under a one-versus-all query budget."""

__version__ = "0.1.0"

from .errors import (
    BudgetExhaustedError,
    DataError,
    GenerationError,
    InvariantViolation,
    LandmarkMinsumError,
    ParameterError,
    SweepFailure,
)
from .evaluation import (
    ObjectiveValue,
    StabilityVerdict,
    StructureReport,
    VerifyOutcome,
    balanced_k_median,
    brute_force_optimum,
    classify_points,
    clustering_distance,
    embed_kmeans_baseline,
    min_sum,
    verify_stability,
    verify_structure,
)
from .generate import (
    Instance,
    InstanceSpec,
    generate,
    generate_adversarial,
    ideal_threshold,
    load_bundle,
    plant_landmarks,
    save_bundle,
)
from .landmark import (
    AlgorithmParams,
    Clustering,
    LandmarkTable,
    StabilityParams,
    assign_remainder,
    build_landmark_table,
    cluster_min_sum,
    conceptual_cluster_min_sum,
    landmark_count_for,
    sample_landmarks,
    threshold_from_opt,
)
from .metric import (
    INFINITE_DISTANCE,
    DistanceSource,
    MatrixDistanceSource,
    MetricMatrix,
    MetricReport,
    PointCloudDistanceSource,
    QueryLedger,
    check_metric,
    ingest_similarity,
    read_labels_csv,
    read_pair_file,
    write_labels_csv,
)
from .sweep import (
    SweepResult,
    ThresholdCandidates,
    enumerate_thresholds,
    stop_bound_from,
    sweep,
)

__all__ = [
    "__version__",
    # errors
    "LandmarkMinsumError", "ParameterError", "DataError",
    "BudgetExhaustedError", "GenerationError", "InvariantViolation",
    "SweepFailure",
    # metric core
    "QueryLedger", "DistanceSource", "MatrixDistanceSource",
    "PointCloudDistanceSource", "MetricMatrix", "MetricReport",
    "check_metric", "ingest_similarity", "read_pair_file",
    "read_labels_csv", "write_labels_csv", "INFINITE_DISTANCE",
    # landmark algorithm
    "StabilityParams", "AlgorithmParams", "LandmarkTable", "Clustering",
    "sample_landmarks", "landmark_count_for", "build_landmark_table",
    "cluster_min_sum", "assign_remainder", "conceptual_cluster_min_sum",
    "threshold_from_opt",
    # threshold sweep
    "ThresholdCandidates", "SweepResult", "enumerate_thresholds",
    "sweep", "stop_bound_from",
    # evaluation
    "ObjectiveValue", "min_sum", "balanced_k_median", "clustering_distance",
    "brute_force_optimum", "classify_points", "verify_structure",
    "verify_stability", "embed_kmeans_baseline", "StructureReport",
    "VerifyOutcome", "StabilityVerdict",
    # instance generation
    "InstanceSpec", "Instance", "generate", "generate_adversarial",
    "plant_landmarks", "ideal_threshold", "save_bundle", "load_bundle",
]
