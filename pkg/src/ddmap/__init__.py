"""Wave-shape oscillatory model and dynamic diffusion maps (DDmap).

Cycles of a nonstationary periodic signal are excised around landmarks and
embedded with an alpha-normalized diffusion map; the embedding is then read
as a proxy for the slowly varying dynamics that drive the cycle morphology.
"""

__version__ = "0.1.0"

from .timeseries import DDMapWarning, LandmarkSequence, PipelineError, TimeSeries
from .synthesis import (
    DynamicsProcess,
    PhenomenologicalSpec,
    SyntheticDataset,
    WaveShapeTemplate,
    cycle_approximation_error,
    make_template,
    manifold_point,
    slow_variation_check,
    synth_generalized,
    synth_phenomenological,
    synth_waveshape_model,
)
from .preprocessing import (
    butterworth_lowpass_bidirectional,
    detrend_median,
    fourier_upsample,
    median_filter,
    remove_baseline_two_step,
)
from .cycles import CycleMatrix, detect_landmarks, excise_cycles, normalize_cycles, reject_bad_pulses
from .diffusion import DiffusionEmbedding, KernelConfig, diffusion_distance, diffusion_map
from .dynamics import (
    ClusterResult,
    DynamicsTrace,
    PipelineConfig,
    compress_svd,
    ddmap,
    derive_edr,
    interpolate_trace,
    run_pipeline,
    sign_cluster,
    sliding_normalize,
)
from .scenarios import SCENARIOS, make_scenario

__all__ = [
    "ClusterResult",
    "CycleMatrix",
    "DDMapWarning",
    "DiffusionEmbedding",
    "DynamicsProcess",
    "DynamicsTrace",
    "KernelConfig",
    "LandmarkSequence",
    "PhenomenologicalSpec",
    "PipelineConfig",
    "PipelineError",
    "SCENARIOS",
    "SyntheticDataset",
    "TimeSeries",
    "WaveShapeTemplate",
    "butterworth_lowpass_bidirectional",
    "compress_svd",
    "cycle_approximation_error",
    "ddmap",
    "derive_edr",
    "detect_landmarks",
    "detrend_median",
    "diffusion_distance",
    "diffusion_map",
    "excise_cycles",
    "fourier_upsample",
    "interpolate_trace",
    "make_scenario",
    "make_template",
    "manifold_point",
    "median_filter",
    "normalize_cycles",
    "reject_bad_pulses",
    "remove_baseline_two_step",
    "run_pipeline",
    "sign_cluster",
    "sliding_normalize",
    "slow_variation_check",
    "synth_generalized",
    "synth_phenomenological",
    "synth_waveshape_model",
]
