"""Multi-class approximate volume regularization (MAVR) for transductive learning."""

__version__ = "0.1.0"

from .data import P_PRESETS, SplitSpec, generate_3circles, generate_blobs, preset, sample_split
from .graph import Dataset, KernelSpec, build_laplacian, build_similarity, read_csv, write_csv
from .harness import ExperimentSpec, run_experiment, write_results
from .linalg import EigenSystem, KronSpectrum, kron_eigvec_apply, kron_spectrum, sym_eig
from .predict import error_rate, predict_multiclass, predict_multilabel, serendipitous_errors
from .solver import (
    EigenCache,
    LabelMatrix,
    Solution,
    SolverConfig,
    SolverError,
    apply_class_balance,
    lgc,
    objective,
    secular_g,
    solve,
    solve_binary,
    solve_constrained,
    solve_identity_P,
    solve_unconstrained,
    volume_approx,
)

__all__ = [
    "P_PRESETS", "SplitSpec", "generate_3circles", "generate_blobs", "preset", "sample_split",
    "Dataset", "KernelSpec", "build_laplacian", "build_similarity", "read_csv", "write_csv",
    "ExperimentSpec", "run_experiment", "write_results",
    "EigenSystem", "KronSpectrum", "kron_eigvec_apply", "kron_spectrum", "sym_eig",
    "error_rate", "predict_multiclass", "predict_multilabel", "serendipitous_errors",
    "EigenCache", "LabelMatrix", "Solution", "SolverConfig", "SolverError", "apply_class_balance",
    "lgc", "objective", "secular_g", "solve", "solve_binary", "solve_constrained",
    "solve_identity_P", "solve_unconstrained", "volume_approx",
]
