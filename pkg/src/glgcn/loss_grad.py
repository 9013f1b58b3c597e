"""Loss terms, the variant-combining objective, the hand-derived backward
pass, and a central finite-difference checker.

The objective is a masked cross-entropy plus up to two Laplacian
smoothness penalties: one on the class probabilities (pushed through the
exact softmax Jacobian) and one on the last hidden representation. The
pairwise penalty for matrix M and symmetric weights S is
sum_ij S_ij ||M_i - M_j||^2, whose gradient is 4 (D - S) M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import UNLABELED, build_similarity_adj, build_similarity_knn, label_correlation, normalize_adjacency
from .model import ForwardTrace, ModelParams, gcn_forward
from .numerics import CsrMatrix, matmul_dense, spmm

__all__ = [
    "VARIANTS",
    "LossBreakdown",
    "Gradients",
    "cross_entropy_masked",
    "laplacian_reg",
    "laplacian_reg_grad",
    "total_loss",
    "backward",
    "prepare_operators",
    "finite_diff_check",
]

VARIANTS = ("gcn", "glgcn-f", "glgcn-l", "glgcn-fl")

PROB_FLOOR = 1e-12  # clamp before ln so underflowed softmax rows stay finite


@dataclass(frozen=True)
class LossBreakdown:
    """One evaluation of the training objective, term by term.

    total is exactly cross_entropy + lambda_label * reg_label
    + lambda_feature * reg_feature; the lambdas recorded here are the
    effective (variant-gated) ones.
    """

    cross_entropy: float
    reg_label: float
    reg_feature: float
    lambda_label: float
    lambda_feature: float
    total: float


@dataclass(frozen=True)
class Gradients:
    """Gradient arrays laid out exactly like ModelParams."""

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None = None

    def arrays(self) -> list[np.ndarray]:
        return list(self.weights) + (list(self.biases) if self.biases is not None else [])


def _effective_lambdas(variant: str, lambda_label: float, lambda_feature: float) -> tuple[float, float]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if lambda_label < 0 or lambda_feature < 0:
        raise ValueError("regularization weights must be non-negative")
    lam_l = lambda_label if variant in ("glgcn-l", "glgcn-fl") else 0.0
    lam_f = lambda_feature if variant in ("glgcn-f", "glgcn-fl") else 0.0
    return lam_l, lam_f


def cross_entropy_masked(z: np.ndarray, labels, mask) -> float:
    """Summed negative log-likelihood of the true class over masked nodes."""
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValueError("cross entropy over an empty node set is undefined")
    if np.any(labels[mask] == UNLABELED):
        raise ValueError("masked nodes must be labeled")
    picked = z[mask, labels[mask]]
    return float(-np.sum(np.log(np.maximum(picked, PROB_FLOOR))))


def laplacian_reg(m: np.ndarray, s: CsrMatrix) -> float:
    """Pairwise smoothness penalty sum_ij S_ij ||M_i - M_j||^2.

    Runs edge-wise over the stored nonzeros of S (both directions of a
    symmetric S are stored, so each unordered pair counts twice).
    """
    m = np.asarray(m, dtype=np.float64)
    if s.dim != m.shape[0]:
        raise ValueError("similarity dimension does not match row count")
    diff = m[s.row_ids()] - m[s.col_indices]
    return float(np.sum(s.values * np.einsum("ij,ij->i", diff, diff)))


def laplacian_reg_grad(m: np.ndarray, s: CsrMatrix) -> np.ndarray:
    """Gradient of laplacian_reg in M: 4 (diag(rowsum S) - S) M for symmetric S."""
    m = np.asarray(m, dtype=np.float64)
    deg = s.rowsums()
    return 4.0 * (deg[:, None] * m - spmm(s, m))


def _feature_rep(trace: ForwardTrace, reg_layer) -> tuple[np.ndarray, int]:
    """Hidden representation the feature penalty reads, and its layer index."""
    if not trace.hiddens:
        raise ValueError("feature regularizer needs at least one hidden layer")
    k = len(trace.hiddens) if reg_layer is None else int(reg_layer)
    if not 1 <= k <= len(trace.hiddens):
        raise ValueError(f"feature_reg_layer must be in [1, {len(trace.hiddens)}]")
    return trace.hiddens[k - 1], k


def total_loss(
    variant: str,
    trace: ForwardTrace,
    dataset,
    s: CsrMatrix,
    c_or_s_for_f: CsrMatrix,
    lambda_label: float,
    lambda_feature: float,
    reg_layer=None,
    reg_on_logits: bool = False,
) -> LossBreakdown:
    """Combine the variant's active terms into one breakdown.

    gcn uses the cross entropy alone; glgcn-l adds the penalty on the
    softmax output weighted by lambda_label; glgcn-f adds the penalty on
    the hidden representation (S- or C-weighted) scaled by
    lambda_feature; glgcn-fl adds both. Inactive or zero-weighted terms
    are skipped entirely so the lambda=0 runs reduce bit-for-bit to gcn.
    """
    lam_l, lam_f = _effective_lambdas(variant, lambda_label, lambda_feature)
    ce = cross_entropy_masked(trace.probs, dataset.graph.labels, dataset.train)
    reg_l = 0.0
    if lam_l != 0.0:
        target = trace.logits if reg_on_logits else trace.probs
        reg_l = laplacian_reg(target, s)
    reg_f = 0.0
    if lam_f != 0.0:
        rep, _ = _feature_rep(trace, reg_layer)
        reg_f = laplacian_reg(rep, c_or_s_for_f)
    total = ce + lam_l * reg_l + lam_f * reg_f
    return LossBreakdown(ce, reg_l, reg_f, lam_l, lam_f, total)


def backward(
    variant: str,
    trace: ForwardTrace,
    params: ModelParams,
    a_hat: CsrMatrix,
    dataset,
    s: CsrMatrix,
    c_or_s_for_f: CsrMatrix,
    lambda_label: float,
    lambda_feature: float,
    reg_layer=None,
    reg_on_logits: bool = False,
) -> Gradients:
    """Analytic gradient of total_loss in every parameter array.

    Expects the trace produced by gcn_forward with these params and a
    symmetric a_hat (normalize_adjacency guarantees symmetry). Cross
    entropy and softmax combine to Z - Y on the masked rows of the final
    pre-activation; the label penalty's gradient in Z passes through the
    softmax Jacobian row by row; relu and dropout are replayed from the
    stored masks.
    """
    lam_l, lam_f = _effective_lambdas(variant, lambda_label, lambda_feature)
    weights = params.weights
    if len(trace.inputs) != len(weights) or any(
        inp.shape[1] != w.shape[0] for inp, w in zip(trace.inputs, weights)
    ):
        raise ValueError("trace does not match params")
    labels = np.asarray(dataset.graph.labels, dtype=np.int64)
    train = np.asarray(dataset.train, dtype=np.int64)
    z = trace.probs

    g_logits = np.zeros_like(z)
    g_logits[train] = z[train]
    g_logits[train, labels[train]] -= 1.0
    if lam_l != 0.0:
        if reg_on_logits:
            g_logits += lam_l * laplacian_reg_grad(trace.logits, s)
        else:
            g = laplacian_reg_grad(z, s)
            g_logits += lam_l * (z * g - np.sum(g * z, axis=1, keepdims=True) * z)

    if lam_f != 0.0:
        _, feature_layer = _feature_rep(trace, reg_layer)
    else:
        feature_layer = 0

    grads: list[np.ndarray] = [np.empty(0)] * len(weights)
    bias_grads = None if params.biases is None else [np.empty(0)] * len(weights)
    g_pre = g_logits
    for k in range(len(weights) - 1, -1, -1):
        if bias_grads is not None:
            bias_grads[k] = g_pre.sum(axis=0)
        back = spmm(a_hat, g_pre)  # A_hat^T g, using symmetry
        grads[k] = matmul_dense(trace.inputs[k].T, back)
        if k == 0:
            break
        g_hidden = matmul_dense(back, weights[k].T)
        mask = trace.dropout_masks[k]
        if mask is not None:
            g_hidden = g_hidden * mask
        if lam_f != 0.0 and k == feature_layer:
            g_hidden = g_hidden + lam_f * laplacian_reg_grad(trace.hiddens[k - 1], c_or_s_for_f)
        g_pre = g_hidden * trace.relu_masks[k - 1]
    return Gradients(grads, bias_grads)


def prepare_operators(dataset, config) -> tuple[CsrMatrix, CsrMatrix, CsrMatrix]:
    """Build (A_hat, S, feature-penalty graph) for a dataset and config."""
    g = dataset.graph
    a_hat = normalize_adjacency(g.adjacency)
    if config.s_construction == "adjacency":
        s = build_similarity_adj(g.adjacency, normalize=config.s_normalize)
    elif config.s_construction == "knn":
        s = build_similarity_knn(g.features, config.knn_k, config.knn_sigma)
    else:
        raise ValueError(f"unknown s_construction {config.s_construction!r}")
    s_feature = s
    if config.variant in ("glgcn-f", "glgcn-fl") and config.feature_reg_graph == "C":
        s_feature = label_correlation(g.labels, dataset.train, config.alpha)
    return a_hat, s, s_feature


def finite_diff_check(variant: str, dataset, params: ModelParams, config, epsilon: float = 1e-5) -> float:
    """Central-difference check of backward against total_loss.

    Perturbs every parameter entry (weights and, when present, biases)
    by +-epsilon with dropout disabled and returns the worst relative
    disagreement |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    a_hat, s, s_feature = prepare_operators(dataset, config)
    reg_layer = getattr(config, "feature_reg_layer", None)
    reg_on_logits = getattr(config, "reg_on_logits", False)
    x = dataset.graph.features

    def loss_at(p: ModelParams) -> float:
        trace = gcn_forward(a_hat, x, p, 0.0, None)
        return total_loss(
            variant, trace, dataset, s, s_feature,
            config.lambda_label, config.lambda_feature,
            reg_layer=reg_layer, reg_on_logits=reg_on_logits,
        ).total

    work = params.copy()
    trace = gcn_forward(a_hat, x, work, 0.0, None)
    analytic = backward(
        variant, trace, work, a_hat, dataset, s, s_feature,
        config.lambda_label, config.lambda_feature,
        reg_layer=reg_layer, reg_on_logits=reg_on_logits,
    )
    worst = 0.0
    for arr, grad in zip(work.arrays(), analytic.arrays()):
        flat = arr.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            up = loss_at(work)
            flat[i] = saved - epsilon
            down = loss_at(work)
            flat[i] = saved
            numeric = (up - down) / (2.0 * epsilon)
            rel = abs(flat_grad[i] - numeric) / max(1e-8, abs(flat_grad[i]) + abs(numeric))
            worst = max(worst, rel)
    return worst
