"""Adam, the full-batch training loop, evaluation, and grid search.

Training runs forward -> objective -> hand-derived backward -> Adam on
the whole graph each epoch, with early stopping on validation loss
(mean cross entropy over the validation split, dropout off). The
reported per-epoch objective matches the configured loss exactly;
weight decay on the first weight matrix enters the gradients only.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .graph import normalize_adjacency
from .loss_grad import (
    VARIANTS,
    Gradients,
    LossBreakdown,
    backward,
    cross_entropy_masked,
    prepare_operators,
    total_loss,
)
from .model import ModelParams, gcn_forward, predict
from .numerics import NonFiniteError

__all__ = [
    "TrainConfig",
    "AdamState",
    "EpochRecord",
    "TrainReport",
    "TrainDivergedError",
    "adam_step",
    "train",
    "evaluate",
    "select_lambda",
]

DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
DEFAULT_ALPHA_GRID = (0.1, 0.5, 1.0)


class TrainDivergedError(RuntimeError):
    """Raised when the training loss turns non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on besides the dataset.

    lambda_feature defaults to lambda_label when left None. The
    regularizer graph S comes from the adjacency (optionally
    degree-normalized) or a feature kNN; the feature-side penalty can
    swap S for the labeled-pair correlation C with weight alpha on
    cross-class pairs. feature_reg_layer selects which hidden layer the
    feature penalty reads (None = last hidden); reg_on_logits moves the
    label penalty from softmax outputs to logits for ablation.
    """

    variant: str = "gcn"
    lambda_label: float = 0.01
    lambda_feature: float | None = None
    alpha: float = 1.0
    feature_reg_graph: str = "S"
    s_construction: str = "adjacency"
    s_normalize: bool = False
    knn_k: int = 10
    knn_sigma: float = 1.0
    hidden_dims: tuple = (16,)
    dropout_rate: float = 0.5
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    use_bias: bool = False
    feature_reg_layer: int | None = None
    reg_on_logits: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.lambda_feature is None:
            object.__setattr__(self, "lambda_feature", self.lambda_label)
        if self.lambda_label < 0 or self.lambda_feature < 0 or self.alpha < 0:
            raise ValueError("lambda_label, lambda_feature, alpha must be non-negative")
        if self.feature_reg_graph not in ("S", "C"):
            raise ValueError("feature_reg_graph must be 'S' or 'C'")
        if self.s_construction not in ("adjacency", "knn"):
            raise ValueError("s_construction must be 'adjacency' or 'knn'")
        if self.knn_k < 1 or self.knn_sigma <= 0:
            raise ValueError("knn_k must be >= 1 and knn_sigma positive")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            raise ValueError("need at least one hidden layer with positive width")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be positive, weight_decay non-negative")
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")
        if self.feature_reg_layer is not None and self.feature_reg_layer < 1:
            raise ValueError("feature_reg_layer is 1-based")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "hidden_dims" in kwargs:
            kwargs["hidden_dims"] = tuple(kwargs["hidden_dims"])
        return cls(**kwargs)


@dataclass
class AdamState:
    """First/second moment estimates plus the shared step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: ModelParams, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays],
                   0, beta1, beta2, eps)


def adam_step(params: ModelParams, grads: Gradients, state: AdamState, lr: float):
    """One in-place Adam update with bias correction; returns (params, state)."""
    arrays = params.arrays()
    grad_arrays = grads.arrays()
    if len(arrays) != len(state.m) or len(arrays) != len(grad_arrays) or any(
        a.shape != g.shape or a.shape != m.shape
        for a, g, m in zip(arrays, grad_arrays, state.m)
    ):
        raise ValueError("params, grads, and optimizer state shapes do not match")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for a, g, m, v in zip(arrays, grad_arrays, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        a -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass(frozen=True)
class EpochRecord:
    """One epoch's objective breakdown and validation metrics."""

    train_loss: LossBreakdown
    val_loss: float
    val_accuracy: float

    def to_dict(self) -> dict:
        return {
            "train_total": self.train_loss.total,
            "cross_entropy": self.train_loss.cross_entropy,
            "reg_label": self.train_loss.reg_label,
            "reg_feature": self.train_loss.reg_feature,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


@dataclass(frozen=True)
class TrainReport:
    """Full record of one run; best_epoch is 1-based.

    trajectory() holds every deterministic number of the run, so two
    runs of the same (dataset, config, seed) compare bit-for-bit on it;
    wall_clock_seconds and the config echo stay outside.
    """

    history: list[EpochRecord]
    best_epoch: int
    epochs_run: int
    test_accuracy: float
    wall_clock_seconds: float
    config: TrainConfig

    @property
    def best_val_accuracy(self) -> float:
        return self.history[self.best_epoch - 1].val_accuracy

    def trajectory(self) -> tuple:
        rows = tuple(
            (r.train_loss.total, r.train_loss.cross_entropy, r.train_loss.reg_label,
             r.train_loss.reg_feature, r.val_loss, r.val_accuracy)
            for r in self.history
        )
        return rows + ((self.best_epoch, self.epochs_run, self.test_accuracy),)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "history": [r.to_dict() for r in self.history],
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "test_accuracy": self.test_accuracy,
            "best_val_accuracy": self.best_val_accuracy,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def _split_indices(dataset, split) -> np.ndarray:
    if isinstance(split, str):
        if split not in ("train", "val", "test"):
            raise ValueError("split must be 'train', 'val', or 'test', or an index array")
        idx = getattr(dataset, split)
    else:
        idx = np.asarray(split, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot evaluate an empty split")
    return idx


def _accuracy(probs: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    return float(np.mean(predict(probs[idx]) == labels[idx]))


def evaluate(params: ModelParams, dataset, split) -> float:
    """Dropout-off accuracy of params on one split (name or index array)."""
    idx = _split_indices(dataset, split)
    a_hat = normalize_adjacency(dataset.graph.adjacency)
    trace = gcn_forward(a_hat, dataset.graph.features, params, 0.0, None)
    return _accuracy(trace.probs, dataset.graph.labels, idx)


def train(dataset, config: TrainConfig) -> tuple[ModelParams, TrainReport]:
    """Full-batch training with early stopping on validation loss.

    Gradients are scaled by 1/|train| (the objective reports the sum;
    the shared learning-rate and weight-decay defaults assume the mean)
    and weight decay is added on the first weight matrix. Stops after
    `patience` epochs without strict validation-loss improvement,
    keeping the earliest best epoch, and returns that epoch's params
    together with the report. One seed drives init and dropout.
    """
    for name in ("train", "val", "test"):
        if np.asarray(getattr(dataset, name)).size == 0:
            raise ValueError(f"{name} split is empty")
    start = time.perf_counter()
    g = dataset.graph
    a_hat, s, s_feature = prepare_operators(dataset, config)
    init_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(2)
    layer_dims = [g.features.shape[1], *config.hidden_dims, g.num_classes]
    params = ModelParams.init(layer_dims, init_seq, use_bias=config.use_bias)
    state = AdamState.init(params)
    rng = np.random.default_rng(dropout_seq)
    n_train = dataset.train.size

    history: list[EpochRecord] = []
    best_val = np.inf
    best_epoch = 0
    best_params = params.copy()
    since_best = 0
    for epoch in range(1, config.max_epochs + 1):
        try:
            trace = gcn_forward(a_hat, g.features, params, config.dropout_rate, rng)
            breakdown = total_loss(
                config.variant, trace, dataset, s, s_feature,
                config.lambda_label, config.lambda_feature,
                reg_layer=config.feature_reg_layer, reg_on_logits=config.reg_on_logits,
            )
        except NonFiniteError as e:
            raise TrainDivergedError(f"diverged at epoch {epoch}: {e}") from None
        if not np.isfinite(breakdown.total):
            raise TrainDivergedError(f"non-finite training loss at epoch {epoch}")
        grads = backward(
            config.variant, trace, params, a_hat, dataset, s, s_feature,
            config.lambda_label, config.lambda_feature,
            reg_layer=config.feature_reg_layer, reg_on_logits=config.reg_on_logits,
        )
        for arr in grads.arrays():
            arr /= n_train
        grads.weights[0] += config.weight_decay * params.weights[0]
        adam_step(params, grads, state, config.learning_rate)

        try:
            eval_trace = gcn_forward(a_hat, g.features, params, 0.0, None)
        except NonFiniteError as e:
            raise TrainDivergedError(f"diverged at epoch {epoch}: {e}") from None
        val_loss = cross_entropy_masked(eval_trace.probs, g.labels, dataset.val) / dataset.val.size
        val_acc = _accuracy(eval_trace.probs, g.labels, dataset.val)
        history.append(EpochRecord(breakdown, float(val_loss), val_acc))

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    final_trace = gcn_forward(a_hat, g.features, best_params, 0.0, None)
    test_acc = _accuracy(final_trace.probs, g.labels, dataset.test)
    report = TrainReport(
        history, best_epoch, len(history), test_acc,
        time.perf_counter() - start, config,
    )
    return best_params, report


def select_lambda(dataset, base_config: TrainConfig, lambda_grid=DEFAULT_LAMBDA_GRID,
                  alpha_grid=None):
    """Validation grid search over coupled lambda (and alpha when C is used).

    Each cell trains once with the base config's seed, lambda applied
    to both penalty weights. Returns (best config, table of per-cell
    results); ties break toward smaller lambda, then smaller alpha.
    """
    lambdas = sorted(float(l) for l in lambda_grid)
    if not lambdas:
        raise ValueError("lambda grid must be nonempty")
    if any(l < 0 for l in lambdas):
        raise ValueError("lambda grid entries must be non-negative")
    uses_c = (
        base_config.variant in ("glgcn-f", "glgcn-fl")
        and base_config.feature_reg_graph == "C"
    )
    if alpha_grid is None:
        alphas = list(DEFAULT_ALPHA_GRID) if uses_c else [base_config.alpha]
    else:
        alphas = sorted(float(a) for a in alpha_grid)
        if not alphas:
            raise ValueError("alpha grid must be nonempty")
    if not uses_c:
        alphas = alphas[:1]

    table = []
    best = None
    for lam in lambdas:
        for alpha in alphas:
            config = replace(base_config, lambda_label=lam, lambda_feature=lam, alpha=alpha)
            _, report = train(dataset, config)
            cell = {"lambda": lam, "alpha": alpha, "val_accuracy": report.best_val_accuracy}
            table.append(cell)
            if best is None or cell["val_accuracy"] > best[0]["val_accuracy"]:
                best = (cell, config)
    return best[1], table
