"""modspace: matrix-weighted modulation norms on sampled fields.

The package measures vector-valued functions on a periodic box through
smooth band decompositions, certifies the standard norm equivalences
(window independence, windowed-transform route, cell-averaged route),
and checks embedding and duality inequalities with measured constants.
"""

from .cells import (CellPartition, ReducingOperatorSet, averaged_lp_norm,
                    cell_partition, reducing_operators, strong_doubling_check)
from .config import ExperimentConfig, experiment_params, load_config
from .corpus import CorpusSpec, generate_corpus
from .errors import (ConfigError, ContractViolation, DataError,
                     DegeneracyError, HypothesisError, ModspaceError,
                     NumericalError, ParameterError, ResolutionError,
                     SynthesisError, TruncationError)
from .grid import (GridSpec, VectorField, bilinear_pairing, fourier,
                   inverse_fourier, read_field, weighted_lp_norm,
                   write_field)
from .kernels import get_backend, set_backend
from .norms import (averaged_modulation_norm, build_operator_sets,
                    conjugate_exponent, dual_weight, modulation_norm,
                    stft_modulation_norm)
from .weights import (CubeFamily, MatrixWeight, WeightSpec, doubling_exponent,
                      dyadic_family, make_weight, matrix_ap_characteristic,
                      scalar_ap_characteristic)
from .windows import (WindowFamily, box_operator, build_window_family,
                      canonical_pieces, gaussian_window, lambda_set, stft,
                      validate_window_family)

__version__ = "0.1.0"

__all__ = [
    "CellPartition", "ReducingOperatorSet", "averaged_lp_norm",
    "cell_partition", "reducing_operators", "strong_doubling_check",
    "CorpusSpec", "generate_corpus",
    "ConfigError", "ContractViolation", "DataError", "DegeneracyError",
    "HypothesisError", "ModspaceError", "NumericalError", "ParameterError",
    "ResolutionError", "SynthesisError", "TruncationError",
    "GridSpec", "VectorField", "bilinear_pairing", "fourier",
    "inverse_fourier", "read_field", "weighted_lp_norm", "write_field",
    "get_backend", "set_backend",
    "averaged_modulation_norm", "build_operator_sets", "conjugate_exponent",
    "dual_weight", "modulation_norm", "stft_modulation_norm",
    "CubeFamily", "MatrixWeight", "WeightSpec", "doubling_exponent",
    "dyadic_family", "make_weight", "matrix_ap_characteristic",
    "scalar_ap_characteristic",
    "WindowFamily", "box_operator", "build_window_family",
    "canonical_pieces", "gaussian_window", "lambda_set", "stft",
    "validate_window_family",
    "__version__",
]
