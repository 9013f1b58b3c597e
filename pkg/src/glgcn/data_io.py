"""On-disk dataset directories, synthetic fixtures, and checkpoints.

A dataset directory holds a json manifest plus six text files:
edges.txt with one "src dst" pair per line (0-indexed, undirected,
duplicates and reciprocals tolerated), features.txt with one line of
"idx:value" sparse pairs per node (empty line = zero row), labels.txt
with "node_id class_id" for the labeled nodes, and train/val/test.txt
with one node id per line. Checkpoints are a small versioned text
header followed by a little-endian float64 payload, one block per
parameter array, row-major.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import UNLABELED, LabeledGraph
from .model import ModelParams
from .numerics import CsrMatrix, csr_from_coo

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "CheckpointError",
    "DataWarning",
    "load_dataset",
    "save_dataset",
    "synth_fixture",
    "save_checkpoint",
    "load_checkpoint",
]

META_KEYS = (
    "name",
    "num_nodes",
    "num_features",
    "num_classes",
    "num_edges_undirected",
    "num_train",
    "num_val",
    "num_test",
    "num_labeled",
)

SPLIT_FILES = ("train.txt", "val.txt", "test.txt")
REQUIRED_FILES = ("meta.json", "edges.txt", "features.txt", "labels.txt") + SPLIT_FILES

CHECKPOINT_MAGIC = "glgcn-checkpoint"
CHECKPOINT_VERSION = 1


class DatasetFormatError(ValueError):
    """Malformed dataset directory; message names the file and line."""

    def __init__(self, message: str, file=None, line=None):
        loc = ""
        if file is not None:
            loc = f"{file}:{line}: " if line is not None else f"{file}: "
        super().__init__(loc + message)


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


class DataWarning(UserWarning):
    """Recoverable oddity in an input file (self-loops, isolated nodes)."""


@dataclass(frozen=True)
class Dataset:
    """A labeled graph plus disjoint train/val/test index sets."""

    name: str
    graph: LabeledGraph
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for attr in ("train", "val", "test"):
            idx = np.asarray(getattr(self, attr), dtype=np.int64)
            object.__setattr__(self, attr, idx)
            if idx.ndim != 1:
                raise ValueError(f"{attr} split must be a flat index list")
            if idx.size and (idx.min() < 0 or idx.max() >= self.graph.n):
                raise ValueError(f"{attr} split index out of range")
            if np.unique(idx).size != idx.size:
                raise ValueError(f"{attr} split contains duplicate node ids")
        for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
            if np.intersect1d(getattr(self, a), getattr(self, b)).size:
                raise ValueError(f"{a} and {b} splits overlap")
        if np.any(self.graph.labels[self.train] == UNLABELED):
            raise ValueError("every train node must be labeled")

    @property
    def label_rate(self) -> float:
        return self.train.size / self.graph.n

    @property
    def num_edges_undirected(self) -> int:
        return self.graph.adjacency.nnz // 2


def _read_lines(path: Path) -> list[str]:
    return path.read_text().splitlines()


def _parse_int(token: str, file, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise DatasetFormatError(f"expected an integer {what}, got {token!r}", file, line) from None


def _load_index_file(path: Path, n: int) -> np.ndarray:
    out = []
    for lineno, raw in enumerate(_read_lines(path), start=1):
        text = raw.strip()
        if not text:
            continue
        idx = _parse_int(text, path.name, lineno, "node id")
        if not 0 <= idx < n:
            raise DatasetFormatError(f"node id {idx} out of range [0, {n})", path.name, lineno)
        out.append(idx)
    return np.asarray(out, dtype=np.int64)


def _load_edges(path: Path, n: int) -> CsrMatrix:
    src, dst = [], []
    self_loops = 0
    for lineno, raw in enumerate(_read_lines(path), start=1):
        text = raw.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise DatasetFormatError(f"expected 'src dst', got {text!r}", path.name, lineno)
        a = _parse_int(parts[0], path.name, lineno, "node id")
        b = _parse_int(parts[1], path.name, lineno, "node id")
        for v in (a, b):
            if not 0 <= v < n:
                raise DatasetFormatError(f"node id {v} out of range [0, {n})", path.name, lineno)
        if a == b:
            self_loops += 1
            continue
        src.append(a)
        dst.append(b)
    if self_loops:
        warnings.warn(
            f"{path.name}: dropped {self_loops} self-loop line(s); normalization re-adds them",
            DataWarning,
            stacklevel=3,
        )
    if not src:
        return csr_from_coo(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    pairs = np.stack([np.asarray(src + dst, np.int64), np.asarray(dst + src, np.int64)], axis=1)
    pairs = np.unique(pairs, axis=0)
    return csr_from_coo(n, pairs[:, 0], pairs[:, 1], np.ones(pairs.shape[0]))


def _load_features(path: Path, n: int, p: int) -> np.ndarray:
    lines = _read_lines(path)
    if len(lines) != n:
        raise DatasetFormatError(f"expected {n} feature rows, found {len(lines)}", path.name)
    x = np.zeros((n, p))
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        row = lineno - 1
        seen = set()
        for token in text.split():
            if ":" not in token:
                raise DatasetFormatError(f"expected 'idx:value', got {token!r}", path.name, lineno)
            idx_str, _, val_str = token.partition(":")
            idx = _parse_int(idx_str, path.name, lineno, "feature index")
            if not 0 <= idx < p:
                raise DatasetFormatError(
                    f"feature index {idx} out of range [0, {p})", path.name, lineno
                )
            if idx in seen:
                raise DatasetFormatError(f"duplicate feature index {idx}", path.name, lineno)
            seen.add(idx)
            try:
                x[row, idx] = float(val_str)
            except ValueError:
                raise DatasetFormatError(
                    f"expected a real value, got {val_str!r}", path.name, lineno
                ) from None
    return x


def _load_labels(path: Path, n: int, d: int) -> np.ndarray:
    labels = np.full(n, UNLABELED, dtype=np.int64)
    for lineno, raw in enumerate(_read_lines(path), start=1):
        text = raw.strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise DatasetFormatError(f"expected 'node_id class_id', got {text!r}", path.name, lineno)
        node = _parse_int(parts[0], path.name, lineno, "node id")
        cls = _parse_int(parts[1], path.name, lineno, "class id")
        if not 0 <= node < n:
            raise DatasetFormatError(f"node id {node} out of range [0, {n})", path.name, lineno)
        if not 0 <= cls < d:
            raise DatasetFormatError(f"class id {cls} out of range [0, {d})", path.name, lineno)
        if labels[node] != UNLABELED:
            raise DatasetFormatError(f"node {node} labeled twice", path.name, lineno)
        labels[node] = cls
    return labels


def load_dataset(path) -> Dataset:
    """Read a dataset directory, validating every manifest count.

    Duplicate and reciprocal edge lines collapse to one entry per
    direction; self-loop lines are dropped with a DataWarning. All
    diagnostics name the offending file (and line where one exists).
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetFormatError(f"dataset directory {str(root)!r} does not exist")
    for name in REQUIRED_FILES:
        if not (root / name).is_file():
            raise DatasetFormatError("missing required file", file=name)

    try:
        meta = json.loads((root / "meta.json").read_text())
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"invalid json: {e}", file="meta.json") from None
    for key in META_KEYS:
        if key not in meta:
            raise DatasetFormatError(f"missing manifest key {key!r}", file="meta.json")
    n = int(meta["num_nodes"])
    p = int(meta["num_features"])
    d = int(meta["num_classes"])
    if n <= 0 or p <= 0 or d <= 0:
        raise DatasetFormatError("num_nodes, num_features, num_classes must be positive", "meta.json")

    adjacency = _load_edges(root / "edges.txt", n)
    undirected = adjacency.nnz // 2
    if undirected != int(meta["num_edges_undirected"]):
        raise DatasetFormatError(
            f"count mismatch: manifest says {meta['num_edges_undirected']} undirected edges, "
            f"edges.txt holds {undirected} after dedup",
            file="meta.json",
        )
    features = _load_features(root / "features.txt", n, p)
    labels = _load_labels(root / "labels.txt", n, d)
    num_labeled = int(np.sum(labels != UNLABELED))
    if num_labeled != int(meta["num_labeled"]):
        raise DatasetFormatError(
            f"count mismatch: manifest says {meta['num_labeled']} labeled nodes, "
            f"labels.txt holds {num_labeled}",
            file="meta.json",
        )

    splits = {}
    for name in SPLIT_FILES:
        key = "num_" + name[:-4]
        idx = _load_index_file(root / name, n)
        if np.unique(idx).size != idx.size:
            raise DatasetFormatError("duplicate node id within split", file=name)
        if idx.size != int(meta[key]):
            raise DatasetFormatError(
                f"count mismatch: manifest says {meta[key]} ids, file holds {idx.size}", file=name
            )
        splits[name[:-4]] = idx
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        common = np.intersect1d(splits[a], splits[b])
        if common.size:
            raise DatasetFormatError(
                f"overlapping splits: node {common[0]} appears in both {a}.txt and {b}.txt",
                file=f"{a}.txt",
            )
    missing = splits["train"][labels[splits["train"]] == UNLABELED]
    if missing.size:
        raise DatasetFormatError(
            f"train node {missing[0]} has no entry in labels.txt", file="train.txt"
        )

    isolated = int(np.sum(adjacency.row_counts() == 0))
    if isolated:
        warnings.warn(
            f"edges.txt: {isolated} isolated node(s) with no incident edges",
            DataWarning,
            stacklevel=2,
        )

    graph = LabeledGraph(n, adjacency, features, labels, d)
    return Dataset(str(meta["name"]), graph, splits["train"], splits["val"], splits["test"])


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset directory that load_dataset reproduces exactly.

    Each undirected edge is written once with the smaller endpoint
    first; floats use repr so the round trip is bit-exact.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    g = dataset.graph

    rows, cols = g.adjacency.row_ids(), g.adjacency.col_indices
    keep = rows < cols
    edge_lines = [f"{r} {c}" for r, c in zip(rows[keep], cols[keep])]
    (root / "edges.txt").write_text("\n".join(edge_lines) + ("\n" if edge_lines else ""))

    feat_lines = []
    for row in np.asarray(g.features):
        nz = np.nonzero(row)[0]
        feat_lines.append(" ".join(f"{j}:{float(row[j])!r}" for j in nz))
    (root / "features.txt").write_text("\n".join(feat_lines) + "\n")

    labeled = np.nonzero(g.labels != UNLABELED)[0]
    label_lines = [f"{i} {g.labels[i]}" for i in labeled]
    (root / "labels.txt").write_text("\n".join(label_lines) + ("\n" if label_lines else ""))

    for name, idx in (("train", dataset.train), ("val", dataset.val), ("test", dataset.test)):
        lines = [str(i) for i in idx]
        (root / f"{name}.txt").write_text("\n".join(lines) + ("\n" if lines else ""))

    meta = {
        "name": dataset.name,
        "num_nodes": g.n,
        "num_features": int(g.features.shape[1]),
        "num_classes": g.num_classes,
        "num_edges_undirected": dataset.num_edges_undirected,
        "num_train": int(dataset.train.size),
        "num_val": int(dataset.val.size),
        "num_test": int(dataset.test.size),
        "num_labeled": int(np.sum(g.labels != UNLABELED)),
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def synth_fixture(
    n_per_class: int = 10,
    classes: int = 2,
    p: int = 8,
    intra_edge_prob: float = 0.7,
    inter_edge_prob: float = 0.05,
    seed: int = 0,
) -> Dataset:
    """Planted-partition graph with class-correlated Gaussian features.

    Nodes are grouped by class; each unordered pair draws an edge with
    the intra- or inter-class probability. Features are unit Gaussians
    with a +3 mean shift at coordinate (class mod p). Every node is
    labeled; per class roughly 30% go to train, 30% to val, the rest
    to test. Deterministic per seed.
    """
    if not (0.0 <= intra_edge_prob <= 1.0 and 0.0 <= inter_edge_prob <= 1.0):
        raise ValueError("edge probabilities must be in [0, 1]")
    if n_per_class < 1 or classes < 2 or p < 1:
        raise ValueError("need at least one node per class, two classes, one feature")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = n_per_class * classes
    labels = np.repeat(np.arange(classes, dtype=np.int64), n_per_class)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], intra_edge_prob, inter_edge_prob)
    keep = rng.random(iu.size) < prob
    src, dst = iu[keep], ju[keep]
    adjacency = csr_from_coo(
        n,
        np.concatenate([src, dst]),
        np.concatenate([dst, src]),
        np.ones(2 * src.size),
    )

    features = rng.normal(0.0, 1.0, size=(n, p))
    features[np.arange(n), labels % p] += 3.0

    train, val, test = [], [], []
    n_train = max(1, int(round(0.3 * n_per_class)))
    n_val = max(1, int(round(0.3 * n_per_class)))
    for c in range(classes):
        members = rng.permutation(np.arange(c * n_per_class, (c + 1) * n_per_class))
        train.extend(members[:n_train])
        val.extend(members[n_train:n_train + n_val])
        test.extend(members[n_train + n_val:])
    graph = LabeledGraph(n, adjacency, features, labels, classes)
    return Dataset(
        f"synth-{classes}x{n_per_class}",
        graph,
        np.sort(np.asarray(train, np.int64)),
        np.sort(np.asarray(val, np.int64)),
        np.sort(np.asarray(test, np.int64)),
    )


def save_checkpoint(params: ModelParams, config, path) -> None:
    """Write params and config: versioned text header, then raw float64.

    The header lists every array's kind and shape; the payload is the
    arrays in header order as little-endian float64, row-major.
    """
    if hasattr(config, "to_dict"):
        config = config.to_dict()
    arrays = [("weight", w) for w in params.weights]
    if params.biases is not None:
        arrays += [("bias", b) for b in params.biases]
    header = [
        f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}",
        "config " + json.dumps(config, sort_keys=True),
        f"arrays {len(arrays)}",
    ]
    header += [f"array {kind} " + " ".join(str(s) for s in a.shape) for kind, a in arrays]
    header.append("end-header")
    blob = ("\n".join(header) + "\n").encode("ascii")
    blob += b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    Path(path).write_bytes(blob)


def load_checkpoint(path, expect_layer_dims=None) -> tuple[ModelParams, dict]:
    """Read a checkpoint back into params plus its config dict.

    Truncated payloads, unknown versions, and (when expect_layer_dims
    is given) disagreeing layer shapes all raise CheckpointError before
    any params object is built.
    """
    blob = Path(path).read_bytes()
    marker = b"end-header\n"
    cut = blob.find(marker)
    if cut < 0:
        raise CheckpointError(f"{path}: malformed checkpoint, header terminator missing")
    try:
        lines = blob[:cut].decode("ascii").splitlines()
    except UnicodeDecodeError:
        raise CheckpointError(f"{path}: malformed checkpoint header") from None
    payload = blob[cut + len(marker):]

    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC + " v"):
        raise CheckpointError(f"{path}: not a checkpoint file")
    version = lines[0][len(CHECKPOINT_MAGIC) + 2:]
    if version != str(CHECKPOINT_VERSION):
        raise CheckpointError(
            f"{path}: version mismatch: file is v{version}, reader expects v{CHECKPOINT_VERSION}"
        )
    if len(lines) < 3 or not lines[1].startswith("config ") or not lines[2].startswith("arrays "):
        raise CheckpointError(f"{path}: malformed checkpoint header")
    config = json.loads(lines[1][len("config "):])
    count = int(lines[2][len("arrays "):])
    specs = []
    for line in lines[3:3 + count]:
        parts = line.split()
        if len(parts) < 3 or parts[0] != "array" or parts[1] not in ("weight", "bias"):
            raise CheckpointError(f"{path}: malformed array descriptor {line!r}")
        specs.append((parts[1], tuple(int(s) for s in parts[2:])))
    if len(specs) != count:
        raise CheckpointError(f"{path}: header lists {len(specs)} arrays, expected {count}")

    need = sum(int(np.prod(shape)) for _, shape in specs) * 8
    if len(payload) != need:
        raise CheckpointError(f"{path}: truncated payload, {len(payload)} bytes where {need} expected")
    arrays, offset = [], 0
    for _, shape in specs:
        size = int(np.prod(shape)) * 8
        arrays.append(np.frombuffer(payload[offset:offset + size], dtype="<f8").reshape(shape).copy())
        offset += size
    weights = [a for (kind, _), a in zip(specs, arrays) if kind == "weight"]
    biases = [a for (kind, _), a in zip(specs, arrays) if kind == "bias"] or None
    params = ModelParams(weights, biases)
    if expect_layer_dims is not None and params.layer_dims != list(expect_layer_dims):
        raise CheckpointError(
            f"{path}: shape mismatch: checkpoint layers {params.layer_dims}, "
            f"expected {list(expect_layer_dims)}"
        )
    return params, config
