"""Online convolutional dictionary learning in constant memory.

Learns a bank of small unit-norm convolutional filters from a stream of
grayscale images.  Each image is sparse-coded against the current dictionary,
its frequency-domain statistics are folded into a fixed-size accumulator under
a forgetting factor, and the dictionary is refit by projected accelerated
gradient descent -- so memory use is independent of how many images have been
seen.
"""

__version__ = "0.1.0"

from .cbpdn import (
    CbpdnConfig,
    SolveStats,
    cbpdn_objective,
    cbpdn_solve,
    soft_threshold,
    solve_freq_diagonal_system,
)
from .errors import (
    CorruptFileError,
    FormatError,
    InvalidInputError,
    InvalidStateError,
    NumericalFailureError,
    OcdlError,
    UnsupportedVersionError,
)
from .io import (
    load_dictionary,
    load_image,
    read_manifest,
    save_dictionary,
    write_log,
    write_manifest,
)
from .learner import (
    Accumulator,
    Dictionary,
    FistaConfig,
    FistaStats,
    accumulate,
    accumulator_nbytes,
    estimate_step_size,
    fista_d_update,
    forgetting_factor,
    proj_cpn,
    surrogate_gradient,
    surrogate_value,
)
from .pipeline import (
    RegionSampling,
    TrainConfig,
    TrainLogRecord,
    TrainState,
    evaluate_dictionary,
    online_train,
    preprocess,
    sample_regions,
    train_step,
)
from .transforms import dict_apply, fft2, ifft2

__all__ = [
    "Accumulator",
    "CbpdnConfig",
    "CorruptFileError",
    "Dictionary",
    "FistaConfig",
    "FistaStats",
    "FormatError",
    "InvalidInputError",
    "InvalidStateError",
    "NumericalFailureError",
    "OcdlError",
    "RegionSampling",
    "SolveStats",
    "TrainConfig",
    "TrainLogRecord",
    "TrainState",
    "UnsupportedVersionError",
    "accumulate",
    "accumulator_nbytes",
    "cbpdn_objective",
    "cbpdn_solve",
    "dict_apply",
    "estimate_step_size",
    "evaluate_dictionary",
    "fft2",
    "fista_d_update",
    "forgetting_factor",
    "ifft2",
    "load_dictionary",
    "load_image",
    "online_train",
    "preprocess",
    "proj_cpn",
    "read_manifest",
    "sample_regions",
    "save_dictionary",
    "soft_threshold",
    "solve_freq_diagonal_system",
    "surrogate_gradient",
    "surrogate_value",
    "train_step",
    "write_log",
    "write_manifest",
]
