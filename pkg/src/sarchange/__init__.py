"""Change detection, classification and visualization for multitemporal SAR stacks."""

__version__ = "0.1.0"

from .classify import ClassificationResult, classify_stack, classify_series
from .errors import (
    ConvergenceError,
    DomainError,
    EstimationError,
    EvaluationError,
    FormatError,
    InputError,
    ParameterError,
    SarChangeError,
)
from .glr import (
    change_probability,
    change_sign,
    cumulative_monitor,
    pair_detect,
    s_glr,
    s_glr_general,
    threshold_from_probability,
    weighted_sglr_distance,
    weighted_sglr_mean,
)
from .io import load_stack, read_manifest, read_raster, save_stack, write_manifest, write_raster
from .magnitude import normalize_magnitude, rainbow_colorize, signed_magnitude
from .reactiv import compose_reactiv
from .roc import RocCurve, roc_curve
from .speckle import (
    ChangeProfile,
    estimate_enl_logcumulant,
    simulate_speckle,
    simulate_stack,
    temporal_multilook,
)
from .spectral import spectral_labels
from .stack import ChangeClass, ImageStack
