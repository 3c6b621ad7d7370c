"""Iris presentation-attack detection from two-illuminant capture pairs.

Combines a photometric-stereo shape score (variance of the recovered normal
field), multi-scale binarized filter-bank texture features with a linear
ensemble, and a cascaded fusion rule, plus an ISO-30107-3 style evaluation
harness and a synthetic Lambertian rendering oracle for desk-scale
verification.
"""

from .bsif import (
    CodeImage,
    FeatureVector,
    FilterBank,
    bsif_code,
    bsif_histogram,
    default_filter_banks,
    extract_features,
    load_filter_bank,
    save_filter_bank,
    slice_bank,
)
from .classifier import (
    Ensemble2D,
    EnsembleMember,
    LinearModel,
    LossKind,
    classify_2d,
    load_ensemble,
    load_linear_model,
    pair_score_2d,
    predict_score,
    save_ensemble,
    save_linear_model,
    train_ensemble,
    train_linear,
)
from .core import (
    CapturePair,
    DatasetManifest,
    Decision,
    DecisionSource,
    Label,
    LensPattern,
    LightingGeometry,
    ManifestEntry,
    Mask,
    NirImage,
    PadClass,
    kfold_subject_splits,
    load_manifest,
    read_pgm_image,
    read_pgm_mask,
    save_manifest,
    split_by_pattern,
    split_subject_disjoint,
    write_pgm_image,
    write_pgm_mask,
)
from .errors import DataError, IrisPadError, NumericsError
from .evaluation import (
    EvalReport,
    ExperimentConfig,
    ExperimentResult,
    aggregate_reports,
    compute_report,
    export_scatter,
    load_capture_pair,
    run_experiment,
    train_models,
    write_report_json,
)
from .fusion import (
    UNSCORABLE_3D_FLAG,
    FusionConfig,
    PipelineResult,
    fuse_decide,
    run_pipeline,
    write_audit_csv,
)
from .photometric import (
    MIN_VALID_FRACTION,
    NormalMap,
    ThresholdModel3D,
    classify_3d,
    default_lights,
    estimate_normals,
    fit_threshold,
    is_scorable,
    load_threshold_model,
    mean_normal,
    normal_variance_score,
    read_normal_map,
    save_threshold_model,
    write_normal_map,
)
from .segmentation import AnnulusSpec, annulus_mask, centered_box_mask, intersect_masks
from .synthetic import (
    SEPARATION_AMPLITUDE_FLOOR,
    CorpusConfig,
    Scene,
    SceneKind,
    SceneParams,
    make_corpus,
    make_scene,
    render,
)

__version__ = "0.1.0"
