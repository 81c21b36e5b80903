"""Stream-based writer-independent handwritten signature verification.

The toolkit operates on feature vectors (precomputed embeddings or the
bundled synthetic generator), turns claim/reference pairs into
dissimilarity vectors, trains an adaptive hinge-loss linear classifier
next to a static RBF-SVM baseline, and evaluates both prequentially on a
chunked signature stream with windowed equal-error-rate reports.
"""

from .dissimilarity import (
    ClaimKind,
    DevSet,
    DissimilaritySample,
    ExploitSet,
    Label,
    dichotomy_transform,
    dt,
    gen_dev_set,
    gen_exploit_set,
)
from .errors import ConfigError, DataError, FormatError, NumericalError, SigstreamError
from .evaluation import (
    MetricsWindow,
    WindowAggregate,
    aggregate_runs,
    eer_global,
    far_frr,
    fuse_max,
    windowed_metrics,
)
from .featurestore import (
    Dataset,
    SignatureKind,
    SignatureRecord,
    SplitConfig,
    SynthConfig,
    generate_synthetic,
    import_csv,
    load_dataset,
    save_dataset,
    split_users,
)
from .linear_sgd import LinearSgdModel
from .rbf_svm import KernelModel, fit_smo, rbf, smo_solve
from .stream_engine import (
    StreamChunk,
    StreamEvalConfig,
    VerificationEvent,
    batch_score,
    build_stream,
    mixed_stream,
    prequential_run,
    verify_claim,
)

__version__ = "0.1.0"

__all__ = [
    "ClaimKind",
    "ConfigError",
    "DataError",
    "Dataset",
    "DevSet",
    "DissimilaritySample",
    "ExploitSet",
    "FormatError",
    "KernelModel",
    "Label",
    "LinearSgdModel",
    "MetricsWindow",
    "NumericalError",
    "SigstreamError",
    "SignatureKind",
    "SignatureRecord",
    "SplitConfig",
    "StreamChunk",
    "StreamEvalConfig",
    "SynthConfig",
    "VerificationEvent",
    "WindowAggregate",
    "aggregate_runs",
    "batch_score",
    "build_stream",
    "dichotomy_transform",
    "dt",
    "eer_global",
    "far_frr",
    "fit_smo",
    "fuse_max",
    "gen_dev_set",
    "gen_exploit_set",
    "generate_synthetic",
    "import_csv",
    "load_dataset",
    "mixed_stream",
    "prequential_run",
    "rbf",
    "save_dataset",
    "smo_solve",
    "split_users",
    "verify_claim",
    "windowed_metrics",
]
