"""Environmental sound classification with sparse salient region pooling.

The package covers the full experimental path: WAV decoding, log-mel
feature extraction, PCA with variance-threshold component selection,
global pooling operators with exact gradients (temporal mean, windowed-
mean max, top-K mean), a small convolutional classifier trained with
SGD + momentum and mixup, stratified cross-validation, sweeps, and
report emission.

Heavy kernels run through a compiled extension when it is installed;
otherwise a NumPy implementation with identical semantics takes over
(``ssrpnet.BACKEND`` names the active one, the ``SSRPNET_BACKEND``
environment variable forces a choice).
"""

from .backend import BACKEND, available_backends
from .errors import (
    AudioDecodeError,
    ContractViolation,
    DegenerateVarianceError,
    DivergenceError,
    InsufficientAudioError,
    InsufficientSamplesError,
    SchemaError,
    ShapeError,
    UnsupportedAudioError,
    ValidationError,
)
from .features import (
    AudioClip,
    FeatureConfig,
    LogMelSpectrogram,
    MelFilterbank,
    extract,
    fix_duration,
    hz_to_mel,
    load_lmsp,
    load_wav,
    log_mel,
    mel_filterbank,
    mel_to_hz,
    save_lmsp,
    shape_to_input,
)
from .pca import (
    PcaModel,
    Standardizer,
    covariance,
    emit_variance_curve,
    fit_pca,
    fit_standardizer,
    load_pca,
    project,
    reconstruct,
    reshape_for_cnn,
    save_pca,
    select_k_by_variance,
    symmetric_eigendecomposition,
)
from .pooling import (
    PooledOutput,
    PoolingSpec,
    avg_pool_2x2,
    avg_pool_2x2_backward,
    gap_backward,
    gap_forward,
    pool_backward,
    pool_forward,
    ssrp_b_backward,
    ssrp_b_forward,
    ssrp_t_backward,
    ssrp_t_forward,
)
from .network import (
    NetworkConfig,
    NetworkParams,
    backward,
    count_params,
    cross_entropy,
    forward,
    init_params,
    load_checkpoint,
    map_shapes,
    mixup_batch,
    one_hot,
    predict_logits,
    save_checkpoint,
    sgd_momentum_step,
    softmax,
    zero_velocity,
)
from .experiment import (
    DatasetManifest,
    FoldResult,
    ManifestEntry,
    RunConfig,
    RunResult,
    emit_accuracy_curves,
    leakage_check,
    load_features,
    load_manifest,
    report_comparison,
    run_pipeline,
    split_fold,
    sweep,
    train_fold,
)
from .synth import SyntheticSpec, make_corpus, render_clip

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "AudioDecodeError", "BACKEND", "ContractViolation",
    "DatasetManifest", "DegenerateVarianceError", "DivergenceError",
    "FeatureConfig", "FoldResult", "InsufficientAudioError",
    "InsufficientSamplesError", "LogMelSpectrogram", "ManifestEntry",
    "MelFilterbank", "NetworkConfig", "NetworkParams", "PcaModel",
    "PooledOutput", "PoolingSpec", "RunConfig", "RunResult", "SchemaError",
    "ShapeError", "Standardizer", "SyntheticSpec", "UnsupportedAudioError",
    "ValidationError", "available_backends", "avg_pool_2x2",
    "avg_pool_2x2_backward", "backward", "count_params", "covariance",
    "cross_entropy", "emit_accuracy_curves", "emit_variance_curve",
    "extract", "fit_pca", "fit_standardizer", "fix_duration", "forward",
    "gap_backward", "gap_forward", "hz_to_mel", "init_params",
    "leakage_check", "load_checkpoint", "load_features", "load_lmsp",
    "load_manifest",
    "load_pca", "load_wav", "log_mel", "make_corpus", "map_shapes",
    "mel_filterbank", "mel_to_hz", "mixup_batch", "one_hot",
    "pool_backward", "pool_forward", "predict_logits", "project",
    "reconstruct", "render_clip", "report_comparison", "reshape_for_cnn",
    "run_pipeline", "save_checkpoint", "save_lmsp", "save_pca",
    "select_k_by_variance", "sgd_momentum_step", "shape_to_input",
    "softmax", "split_fold", "ssrp_b_backward", "ssrp_b_forward",
    "ssrp_t_backward", "ssrp_t_forward", "sweep",
    "symmetric_eigendecomposition", "train_fold",
]
