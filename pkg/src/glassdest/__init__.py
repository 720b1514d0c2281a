"""Glass-box multi-modal traffic destination prediction.

Boosted additive models (one per axis, per destination mode and per agent
class) with exact term-level explanations, mode scoring by combined Gaussian
log-likelihoods and top-K probabilistic destination output.
"""

from .binning import (
    BinnedDataset,
    BinningSchema,
    SchemaMismatchError,
    apply_bins,
    bin_dataset,
    build_bins,
)
from .ebm import (
    EbmHyperparams,
    EbmModel,
    PairShape,
    ShapeFunction,
    detect_interactions,
    fit_ebm,
    fit_main_effects,
    fit_pairs,
    load_model,
    predict,
    predict_binned,
    save_model,
)
from .evaluation import EvalReport, derive_bounds, filter_outliers, min_fde, split_dataset
from .explain import (
    DependenceCurve,
    ImportanceReport,
    LocalExplanation,
    global_importance,
    local_explain,
    partial_dependence,
)
from .features import (
    CanonicalFrame,
    DrivableGrid,
    FeatureError,
    FeatureVector,
    TrajectoryRecord,
    build_features,
    canonicalize,
    feature_names,
    heading_from_history,
    observation_frame,
    poc_features,
    road_mode_centers,
)
from .modes import (
    Mode,
    ModePartition,
    PRESETS,
    assign_mode,
    assign_modes,
    build_preset_partition,
    grid_partition,
    kmeans_partition,
    merge_small_modes,
)
from .predictor import (
    MultiModalPredictor,
    Prediction,
    ScoringWeights,
    load_predictor,
    predict_top_k,
    save_predictor,
    score_modes,
    train_multimodal,
)
from .synth import SynthSpec, generate_synthetic

__version__ = "0.1.0"
