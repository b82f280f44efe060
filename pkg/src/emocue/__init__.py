"""Two-stage speaker identification driven by emotion cues.

Stage a picks the utterance's emotional coloring by blending acoustic
and suprasegmental model scores; stage b picks the speaker using the
acoustic models trained for that coloring. A one-stage baseline that
pools every emotion into a single model per speaker is included for
comparison.
"""

from .config import RunConfig, make_config, parse_config_file
from .corpus import (
    DEFAULT_EMOTIONS,
    NormalizationParams,
    SplitProtocol,
    SyntheticCorpus,
    UtteranceRecord,
    load_manifest,
    normalize_features,
    split_records,
    synthesize_corpus,
    write_manifest,
)
from .errors import (
    DegenerateDimensionError,
    DimensionMismatchError,
    DuplicateUtteranceError,
    EmoCueError,
    EmptyBankError,
    EmptyResultsError,
    EmptySequenceError,
    EmptyTrainingSetError,
    IllegalPathError,
    LengthMismatchError,
    ManifestError,
    NoLegalPathError,
    NumericalUnderflowError,
    SequenceTooShortError,
    TooShortError,
    UnknownEmotionError,
    UnknownLabelError,
    UnsupportedFormatError,
)
from .evaluation import (
    ConfusionMatrix,
    PerformanceTable,
    SweepResult,
    TTestResult,
    alpha_sweep,
    average_diagonal,
    confusion_matrix,
    performance_table,
    pooled_t,
    pooled_t_from_stats,
)
from .frontend import (
    AudioClip,
    FeatureSequence,
    ProsodicTrack,
    UtteranceFeatures,
    analyze_clip,
    frame_signal,
    load_audio,
    mfcc,
    prosodic_track,
    read_feature_cache,
    write_feature_cache,
)
from .hmm import (
    AcousticModel,
    GaussianMixture,
    TrainingReport,
    baum_welch,
    forward_backward,
    forward_log_likelihood,
    init_model,
    load_model,
    save_model,
    viterbi,
)
from .recognizer import (
    EmotionModels,
    IdentificationResult,
    ModelBank,
    ResultRow,
    identify_emotion,
    identify_speaker_given_emotion,
    load_bank,
    one_stage_identify,
    save_bank,
    score_test_set,
    train_model_bank,
    two_stage_identify,
)
from .supra import (
    FusionConfig,
    SupraMapping,
    SupraObservationSequence,
    SuprasegmentalModel,
    fused_score,
    score_components,
    segment_summaries,
    supra_observations,
    train_suprasegmental,
)

__version__ = "0.1.0"

__all__ = [
    "AcousticModel",
    "AudioClip",
    "ConfusionMatrix",
    "DEFAULT_EMOTIONS",
    "DegenerateDimensionError",
    "DimensionMismatchError",
    "DuplicateUtteranceError",
    "EmoCueError",
    "EmotionModels",
    "EmptyBankError",
    "EmptyResultsError",
    "EmptySequenceError",
    "EmptyTrainingSetError",
    "FeatureSequence",
    "FusionConfig",
    "GaussianMixture",
    "IdentificationResult",
    "IllegalPathError",
    "LengthMismatchError",
    "ManifestError",
    "ModelBank",
    "NoLegalPathError",
    "NormalizationParams",
    "NumericalUnderflowError",
    "PerformanceTable",
    "ProsodicTrack",
    "ResultRow",
    "RunConfig",
    "SequenceTooShortError",
    "SplitProtocol",
    "SupraMapping",
    "SupraObservationSequence",
    "SuprasegmentalModel",
    "SweepResult",
    "SyntheticCorpus",
    "TooShortError",
    "TrainingReport",
    "TTestResult",
    "UnknownEmotionError",
    "UnknownLabelError",
    "UnsupportedFormatError",
    "UtteranceFeatures",
    "UtteranceRecord",
    "alpha_sweep",
    "analyze_clip",
    "average_diagonal",
    "baum_welch",
    "confusion_matrix",
    "forward_backward",
    "forward_log_likelihood",
    "frame_signal",
    "fused_score",
    "identify_emotion",
    "identify_speaker_given_emotion",
    "init_model",
    "load_audio",
    "load_bank",
    "load_manifest",
    "load_model",
    "make_config",
    "mfcc",
    "normalize_features",
    "one_stage_identify",
    "parse_config_file",
    "performance_table",
    "pooled_t",
    "pooled_t_from_stats",
    "prosodic_track",
    "read_feature_cache",
    "save_bank",
    "save_model",
    "score_components",
    "score_test_set",
    "segment_summaries",
    "split_records",
    "supra_observations",
    "synthesize_corpus",
    "train_model_bank",
    "train_suprasegmental",
    "two_stage_identify",
    "viterbi",
    "write_feature_cache",
    "write_manifest",
]
