"""Channel-estimation workbench for ambient backscatter links.

Simulates correlated Rayleigh channels observed through unit pilots, and estimates
them three ways: least squares, closed-form linear MMSE, and a trainable
residual-denoising CNN built on a small numpy tensor engine.
"""

from .analysis import (
    LinearMap,
    MapDistance,
    extract_effective_map,
    map_distance,
    mmse_weight_target,
)
from .channel import (
    LINK_COMPOSITE,
    LINK_DIRECT,
    LINKS,
    ChannelRealization,
    CorrelationSpec,
    ObservationTensor,
    SystemConfig,
    build_correlation_matrix,
    composite_correlation,
    derive_noise_and_alpha,
    generate_pilot_frame,
    link_correlation,
    sample_gaussian_vector,
    sample_realization,
    simulate_batch,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import Dataset, generate_dataset, load_dataset, save_dataset
from .errors import (
    AmbcestError,
    ArtifactError,
    ConfigError,
    FormatError,
    MetricError,
    NumericError,
    ParameterError,
    ShapeError,
    StateError,
)
from .estimators import (
    MmseContext,
    NmseEstimate,
    brute_force_conditional_mean,
    column_correlation,
    ls_estimate,
    matrix_mmse_map,
    matrix_mmse_weights,
    mmse_estimate_matrix,
    mmse_estimate_vector,
    mmse_gain,
    nmse,
)
from .gradcheck import GradCheckReport, grad_check, grad_check_input
from .layers import BatchNorm2D, Conv2D, Dense, ReLU, mse_loss
from .model import DenoiserHyper, DenoisingBlock, ResidualDenoiser, build_model
from .optim import Adam, SGDMomentum, make_optimizer
from .sweep import (
    ExperimentPlan,
    NmseReport,
    ReportRow,
    complexity_report,
    run_sweep,
)
from .training import TrainHistory, TrainOptions, evaluate, train

__all__ = [
    "Adam",
    "AmbcestError",
    "ArtifactError",
    "BatchNorm2D",
    "ChannelRealization",
    "ConfigError",
    "Conv2D",
    "CorrelationSpec",
    "Dataset",
    "Dense",
    "DenoiserHyper",
    "DenoisingBlock",
    "ExperimentPlan",
    "FormatError",
    "GradCheckReport",
    "LINKS",
    "LINK_COMPOSITE",
    "LINK_DIRECT",
    "LinearMap",
    "MapDistance",
    "MetricError",
    "MmseContext",
    "NmseEstimate",
    "NmseReport",
    "NumericError",
    "ObservationTensor",
    "ParameterError",
    "ReLU",
    "ReportRow",
    "ResidualDenoiser",
    "SGDMomentum",
    "ShapeError",
    "StateError",
    "SystemConfig",
    "TrainHistory",
    "TrainOptions",
    "brute_force_conditional_mean",
    "build_correlation_matrix",
    "build_model",
    "column_correlation",
    "complexity_report",
    "composite_correlation",
    "derive_noise_and_alpha",
    "evaluate",
    "extract_effective_map",
    "generate_dataset",
    "generate_pilot_frame",
    "grad_check",
    "grad_check_input",
    "link_correlation",
    "load_checkpoint",
    "load_dataset",
    "ls_estimate",
    "make_optimizer",
    "map_distance",
    "matrix_mmse_map",
    "matrix_mmse_weights",
    "mmse_estimate_matrix",
    "mmse_estimate_vector",
    "mmse_gain",
    "mmse_weight_target",
    "mse_loss",
    "nmse",
    "run_sweep",
    "sample_gaussian_vector",
    "sample_realization",
    "save_checkpoint",
    "save_dataset",
    "simulate_batch",
    "train",
]
