"""K-means with centroids constrained to products of sparse matrices.

The centroid matrix is learned as a short chain of very sparse factors,
so multiplying points against all centroids costs a handful of
multiply-adds per row instead of a full dense pass. The same factored
operator then accelerates nearest-neighbor routing and low-rank kernel
approximation.

Hot sparse kernels run through a compiled extension when it is built;
otherwise a vectorized pure-NumPy fallback is used. ``BACKEND`` names
the one in effect.
"""

from ._kernels import ACTIVE_BACKEND as BACKEND
from ._kernels import available_backends
from .ann import (
    BruteForceIndex,
    ClusterIndex,
    brute_force_1nn,
    build_index,
    classify_1nn,
    query_1nn,
)
from .clustering import (
    ClusteringModel,
    Dataset,
    QkConfig,
    assign_dense,
    assign_fast,
    clustering_objective,
    decomposition_identity_check,
    draw_initial_centroids,
    lloyd_kmeans,
    qkmeans,
    update_centroids,
)
from .datasets import (
    BlobsSpec,
    load_csv,
    load_idx,
    make_blobs,
    save_csv,
    train_test_split,
)
from .errors import (
    BadMagic,
    ConfigError,
    DegenerateLandmarks,
    DimensionMismatch,
    DuplicateEntry,
    EmptyIndex,
    IndexOutOfRange,
    InfeasibleInit,
    LevelTooLarge,
    ShapeChainMismatch,
    SingularWeight,
    TruncatedFile,
    ZeroMatrix,
)
from .nystrom import (
    KernelSpec,
    NystromModel,
    approx_kernel_row,
    default_gamma,
    feature_map,
    fit_nystrom,
    gaussian_kernel,
    kernel_row,
    linear_head_fit,
    linear_head_predict,
    reconstruction_error,
)
from .palm import (
    FixedSingleton,
    PalmConfig,
    PalmState,
    ProjectedSparse,
    factor_shapes,
    factorization_objective,
    hierarchical_palm4msa,
    normalize_frobenius,
    palm4msa,
    project_sparse,
    spectral_norm_power,
)
from .sparse import (
    FastOperator,
    OpCounter,
    SparseFactor,
    factors_equal_exact,
    fast_apply,
    fast_operator,
    load_triplets,
    materialize,
    save_triplets,
    sparse_diagonal,
    sparse_from_dense,
    sparse_from_triplets,
    sparse_identity,
    spmm_dense,
    spmm_sparse,
    spmv,
    transpose,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "__version__",
    # sparse containers and kernels
    "SparseFactor",
    "FastOperator",
    "OpCounter",
    "sparse_from_triplets",
    "sparse_from_dense",
    "sparse_identity",
    "sparse_diagonal",
    "factors_equal_exact",
    "spmv",
    "spmm_dense",
    "spmm_sparse",
    "transpose",
    "fast_operator",
    "fast_apply",
    "materialize",
    "save_triplets",
    "load_triplets",
    # factorization
    "ProjectedSparse",
    "FixedSingleton",
    "PalmConfig",
    "PalmState",
    "factor_shapes",
    "project_sparse",
    "normalize_frobenius",
    "spectral_norm_power",
    "palm4msa",
    "hierarchical_palm4msa",
    "factorization_objective",
    # clustering
    "Dataset",
    "QkConfig",
    "ClusteringModel",
    "draw_initial_centroids",
    "assign_dense",
    "assign_fast",
    "update_centroids",
    "lloyd_kmeans",
    "qkmeans",
    "clustering_objective",
    "decomposition_identity_check",
    # kernel approximation
    "KernelSpec",
    "NystromModel",
    "default_gamma",
    "gaussian_kernel",
    "fit_nystrom",
    "kernel_row",
    "approx_kernel_row",
    "reconstruction_error",
    "feature_map",
    "linear_head_fit",
    "linear_head_predict",
    # nearest neighbors
    "ClusterIndex",
    "BruteForceIndex",
    "build_index",
    "query_1nn",
    "brute_force_1nn",
    "classify_1nn",
    # datasets
    "BlobsSpec",
    "make_blobs",
    "save_csv",
    "load_csv",
    "load_idx",
    "train_test_split",
    # errors
    "DimensionMismatch",
    "IndexOutOfRange",
    "DuplicateEntry",
    "ShapeChainMismatch",
    "LevelTooLarge",
    "ZeroMatrix",
    "InfeasibleInit",
    "SingularWeight",
    "DegenerateLandmarks",
    "EmptyIndex",
    "BadMagic",
    "TruncatedFile",
    "ConfigError",
]
