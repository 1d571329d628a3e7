"""Echo-state-network dynamic filters.

A fixed random reservoir is driven by a distorted signal and a linear readout,
the only trained part, learns to reproduce the clean signal, i.e. the inverse
of the unknown distortion.
"""

__version__ = "0.1.0"

from .distortion import (
    Distortion1DSpec,
    Distortion2DSpec,
    NoiseSource,
    distort_1d,
    distort_2d,
    gaussian_draws,
)
from .experiments import (
    Experiment1DSpec,
    Experiment2DSpec,
    run_experiment_1d,
    run_experiment_2d,
)
from .metrics import RecoveryReport, nrmse, psnr, symbol_recovery_rate
from .readout import (
    TrainedModel,
    TrainingSet,
    harvest_states,
    predict,
    ridge_solve,
    train,
)
from .reservoir import (
    ReservoirConfig,
    ReservoirState,
    WeightSet,
    build_reservoir,
    estimate_spectral_radius,
    run,
    scale_to_spectral_radius,
    step,
)
from .signals import (
    GlyphSet,
    SignalSeries,
    builtin_glyphs,
    gen_bitstream,
    gen_glyph_video,
)
