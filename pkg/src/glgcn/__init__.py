"""Laplacian-regularized graph convolutional networks on numpy.

Transductive semi-supervised node classification: a two-layer (by
default) graph convolution trained with masked cross entropy, optionally
regularized by pairwise Laplacian smoothness penalties on the class
probabilities and/or the last hidden representation. Everything runs on
dense/CSR numpy arrays with hand-derived gradients; a finite-difference
checker guards the backward pass.
"""

from .data_io import (
    CheckpointError,
    Dataset,
    DatasetFormatError,
    DataWarning,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
    synth_fixture,
)
from .graph import (
    UNLABELED,
    LabeledGraph,
    build_similarity_adj,
    build_similarity_knn,
    label_correlation,
    label_propagation,
    laplacian_from_similarity,
    normalize_adjacency,
)
from .loss_grad import (
    VARIANTS,
    Gradients,
    LossBreakdown,
    backward,
    cross_entropy_masked,
    finite_diff_check,
    laplacian_reg,
    laplacian_reg_grad,
    prepare_operators,
    total_loss,
)
from .model import ForwardTrace, ModelParams, gcn_forward, predict
from .numerics import (
    CsrMatrix,
    NonFiniteError,
    csr_from_coo,
    csr_from_dense,
    glorot_init,
    identity_csr,
    matmul_dense,
    relu,
    softmax_rows,
    spmm,
)
from .optim_train import (
    AdamState,
    EpochRecord,
    TrainConfig,
    TrainDivergedError,
    TrainReport,
    adam_step,
    evaluate,
    select_lambda,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CheckpointError",
    "CsrMatrix",
    "Dataset",
    "DatasetFormatError",
    "DataWarning",
    "EpochRecord",
    "ForwardTrace",
    "Gradients",
    "LabeledGraph",
    "LossBreakdown",
    "ModelParams",
    "NonFiniteError",
    "TrainConfig",
    "TrainDivergedError",
    "TrainReport",
    "UNLABELED",
    "VARIANTS",
    "adam_step",
    "backward",
    "build_similarity_adj",
    "build_similarity_knn",
    "cross_entropy_masked",
    "csr_from_coo",
    "csr_from_dense",
    "evaluate",
    "finite_diff_check",
    "gcn_forward",
    "glorot_init",
    "identity_csr",
    "label_correlation",
    "label_propagation",
    "laplacian_from_similarity",
    "laplacian_reg",
    "laplacian_reg_grad",
    "load_checkpoint",
    "load_dataset",
    "matmul_dense",
    "normalize_adjacency",
    "predict",
    "prepare_operators",
    "relu",
    "save_checkpoint",
    "save_dataset",
    "select_lambda",
    "softmax_rows",
    "spmm",
    "synth_fixture",
    "total_loss",
    "train",
]
