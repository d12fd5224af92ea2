"""Streaming human-activity recognition from per-activity Gaussian mixtures.

A frame classifier that sums per-frame mixture log-likelihoods over a rolling
context window and takes the arg-max across activities, with directional
feature augmentation, a border-tolerant evaluation protocol, a blockwise
Viterbi baseline, and a per-frame latency benchmark.
"""

from .bench import BenchStats, run_bench
from .data import (
    ALL_LABELS,
    N_ACTIVITIES,
    NOMINAL_SAMPLE_RATE_HZ,
    ActivityLabel,
    ChannelSpec,
    Dataset,
    LabeledSequence,
    channel,
    frames_by_label,
    full_sensor_channels,
    load_dataset,
    parse_recording,
    split_loso,
    write_dataset,
    write_recording,
)
from .errors import DataError, NumericError
from .evaluation import (
    ClassMetrics,
    EvalReport,
    aggregate_reports,
    apply_border_tolerance,
    confusion,
    metrics,
    run_cv,
)
from .features import (
    DirectionalConfig,
    FeatureConfig,
    StreamingDirectional,
    augment_directional,
    directional_sources_by_name,
    select_channels,
    thigh_accel_indices,
    thigh_shin_accel_indices,
)
from .gmm import (
    DEFAULT_COMPONENT_COUNTS,
    ActivityModelSet,
    EmConfig,
    GmmModel,
    fit_activity_models,
    fit_em,
    fit_em_trace,
    kmeans_init,
    load_model_set,
    log_pdf,
    log_pdf_batch,
    save_model_set,
)
from .hmm import (
    HmmConfig,
    TransitionMatrix,
    default_transition_matrix,
    load_transition_matrix,
    predict_stream_hmm,
    viterbi_block,
)
from .predictor import (
    Prediction,
    PredictorConfig,
    PredictorSession,
    naive_window_scores,
    new_session,
    posterior,
    predict_sequence_naive,
)
from .synth import SynthSpec, default_generators, default_spec, generate, load_spec

__version__ = "0.1.0"
