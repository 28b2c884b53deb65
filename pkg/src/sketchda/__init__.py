"""One-pass discriminant analysis on a frequent-directions sketch."""

from .discriminant import (
    DiscriminantModel,
    OnlineDiscriminant,
    default_ridge,
    fit_finalize,
    reduce_scatters,
    solve_discriminant,
)
from .errors import (
    ConfigurationError,
    InputError,
    NumericalError,
    SingularityError,
    SketchDAError,
    StateError,
    StreamFormatError,
)
from .evaluation import EvalReport, compute_cmc, compute_map, evaluate, rank_gallery
from .formats import LabeledSample, load_arrays, read_samples, write_binary, write_csv
from .oracle import BatchScatters, BoundReport, batch_fda, batch_scatters, fisher_score, verify_bounds
from .sketch import FrequentDirections
from .stats import ClassStatistics, ScatterSet, approx_scatters, between_scatter

__version__ = "0.1.0"
