"""Wi-Fi CSI feature extraction with high-dimensional factor models.

Capture logs are parsed into amplitude and calibrated-phase matrices; the
number of temporal factors in each recording is chosen by removing principal
components until the residual eigenvalue spectrum matches the
Marchenko-Pastur law, and the surviving factors become classifier features.
"""

from .classify import (
    ClassifierSpec,
    EvalReport,
    FeatureSet,
    LinearModel,
    evaluate,
    knn_predict,
    linear_train,
    split,
)
from .factor import (
    FactorFit,
    FactorSelection,
    SyntheticSpec,
    extract_features,
    generate_synthetic,
    remove_factors,
    select_factor_count,
)
from .ingest import (
    CsiFrame,
    DataMatrix,
    DatasetManifest,
    assemble_matrix,
    load_dataset,
    parse_log,
    read_log,
    read_manifest,
    scale_csi,
    serialize_frame,
)
from .mp import MpLaw, SpectrumFit, fit_spectrum, mp_cdf, mp_pdf
from .phase import PAPER_IDEAL, STANDARD_NG2, CalibrationCoefficients, SubcarrierIndexSet, calibrate, calibrate_matrix, unwrap
from .pipeline import ChannelSample, Comparison, FeatureConfig, compare_pipelines, run_arm

__version__ = "0.1.0"
