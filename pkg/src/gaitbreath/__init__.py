"""Deep-breath identification from depth video of a walking person.

The pipeline: six ROI-minus-stable-point depth channels, per-channel
cleanup, graph-based spatial-temporal denoising with a learned metric,
periodicity-based channel selection, 15 handcrafted features, and a linear
SVM. Each stage exists both as plain functions and as an sklearn-style
estimator, so the pieces compose with the wider ecosystem.
"""

from .bench import (
    AblationReport,
    FeatureTable,
    ProtocolResult,
    make_splits,
    prepare_features,
    run_ablation,
    run_protocol,
    sample_signal,
)
from .config import PipelineConfig
from .data_io import (
    CHANNEL_NAMES,
    JOINT_NAMES,
    DepthFrameSequence,
    DepthSample,
    JointTrack,
    RawChannels,
    read_channels,
    read_depth_sample,
    read_manifest,
    write_channels,
    write_depth_sample,
    write_manifest,
)
from .errors import (
    DataQualityError,
    EmptySignalError,
    FeatureError,
    FormatError,
    GaitBreathError,
    NumericalError,
    ParameterError,
    SelectionError,
    TrainingError,
    UnusableChannelError,
)
from .features import FEATURE_NAMES, BreathFeatureExtractor, extract_features
from .graph_denoise import (
    BreathGraph,
    GraphDenoiser,
    GsaResult,
    build_graph,
    denoise,
    metric_gradient,
    project_psd,
    solve_map,
)
from .preprocess import (
    BREATH_BAND,
    ChannelPreprocessor,
    CleanChannels,
    bandpass,
    detrend_least_squares,
    preprocess_all,
    repair_outliers,
)
from .roi import RoiSet, build_rois, extract_raw_channels
from .selection import (
    InformativeChannelSelector,
    PowerSpectrum,
    SelectionResult,
    periodicity_index,
    select_informative,
    welch_psd,
)
from .svm import (
    LinearHingeSVC,
    Metrics,
    TrainedModel,
    evaluate,
    load_model,
    predict,
    save_model,
    train_svm,
)
from .synth import SampleTruth, SynthConfig, generate_dataset, write_dataset

__version__ = "0.1.0"
