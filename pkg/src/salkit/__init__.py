"""salkit: spectral removal of guarded-attribute information from vector
representations, with a kernelized variant, an iterative null-space baseline,
leakage probes, and fairness metrics."""

import os as _os

# Honor SALKIT_THREADS before numpy is imported anywhere in the package, since
# BLAS pools read their environment once at load time.
_cap = _os.environ.get("SALKIT_THREADS")
if _cap:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _cap)

from .dataset import LabeledDataset, center, encode_guarded, split_indices
from .errors import (
    ContractError,
    DataError,
    LoadError,
    MetricUndefinedError,
    NumericError,
    ParseError,
    SalkitError,
    UnknownTokenError,
)
from .kernels import (
    GramPair,
    KernelSpec,
    KsalEraser,
    eval_kernel,
    fit_ksal,
    gram_matrix,
    kappa,
    kernel_deviation_ratio,
    kernel_project_removed,
    reduced_cross_kernel,
    reduced_kernel,
    reduced_train_features,
    top_eigenvectors,
    verify_lemma_a,
)
from .linear import (
    CrossCovariance,
    SalEraser,
    compute_cross_covariance,
    fit_sal,
    interpolate_projection,
    project_inplace,
    project_reduce,
    residual_covariance,
    select_k,
)
from .metrics import (
    EvalReport,
    accuracy,
    nearest_neighbors,
    per_class_tpr_gaps,
    similarity_correlation,
    similarity_report,
    tpr_gap,
    tpr_rms,
)
from .io import (
    EmbeddingTable,
    load_eraser,
    read_dataset,
    read_embeddings,
    read_word_pairs,
    save_eraser,
    write_dataset,
    write_embeddings,
)
from .probes import (
    InlpEraser,
    KernelProbe,
    LinearProbe,
    TrainConfig,
    apply_eraser,
    fit_inlp,
    train_kernel_probe,
    train_linear_probe,
)
from .synth import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
