"""Convert an upstream Planetoid bundle into a plain-text dataset directory.

The upstream distribution ships, per dataset, seven pickled objects and a
text index:

    ind.<name>.x      sparse train features, the 20-per-class labeled set
    ind.<name>.y      one-hot labels for x
    ind.<name>.allx   features of the training pool (x plus unlabeled docs)
    ind.<name>.ally   one-hot labels for allx
    ind.<name>.tx     sparse test features, one row per test.index entry
    ind.<name>.ty     one-hot labels for tx
    ind.<name>.graph  dict: node id -> neighbor id list (directed entries)
    ind.<name>.test.index  text file, scrambled test node ids

Node ids 0..len(allx)-1 are the training pool in order; test documents
occupy the tail of the id space in the scrambled order given by
test.index. Citeseer's id tail has gaps (isolated test documents that
never made it into tx); those ids are patched in as zero-feature,
unlabeled nodes, the standard fix, and recorded in provenance.json.

Everything is validated before the first byte is written, so a failed
conversion leaves no partial output directory.
"""

from __future__ import annotations

import hashlib
import json
import pickle
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = ["ConvertError", "DATASETS", "convert_planetoid"]

DATASETS = ("citeseer", "cora", "pubmed")

PICKLED_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")

TRAIN_PER_CLASS = 20
VAL_SIZE = 500


class ConvertError(ValueError):
    """Bundle missing, malformed, or internally inconsistent."""


@dataclass(frozen=True)
class Bundle:
    """One dataset's upstream objects plus the input file hashes."""

    name: str
    x: sp.spmatrix
    y: np.ndarray
    tx: sp.spmatrix
    ty: np.ndarray
    allx: sp.spmatrix
    ally: np.ndarray
    graph: dict
    test_index: np.ndarray
    file_hashes: dict


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_pickle(path: Path):
    # latin1 keeps python2-era pickles readable
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def load_bundle(input_dir, dataset_name: str) -> Bundle:
    if dataset_name not in DATASETS:
        raise ConvertError(f"unknown dataset {dataset_name!r}; expected one of {DATASETS}")
    root = Path(input_dir)
    paths = {part: root / f"ind.{dataset_name}.{part}" for part in PICKLED_PARTS}
    paths["test.index"] = root / f"ind.{dataset_name}.test.index"
    missing = [p.name for p in paths.values() if not p.is_file()]
    if missing:
        raise ConvertError(f"bundle incomplete under {root}: missing {', '.join(sorted(missing))}")

    parts = {}
    for part in PICKLED_PARTS:
        try:
            parts[part] = _load_pickle(paths[part])
        except Exception as e:
            raise ConvertError(f"{paths[part].name}: cannot unpickle: {e}") from None

    index_path = paths["test.index"]
    try:
        test_index = np.array(
            [int(line) for line in index_path.read_text().split()], dtype=np.int64
        )
    except ValueError:
        raise ConvertError(f"{index_path.name}: expected one integer per line") from None

    hashes = {p.name: _sha256(p) for p in paths.values()}
    return Bundle(dataset_name, parts["x"], np.asarray(parts["y"]), parts["tx"],
                  np.asarray(parts["ty"]), parts["allx"], np.asarray(parts["ally"]),
                  dict(parts["graph"]), test_index, hashes)


def _validate(b: Bundle) -> int:
    """Cross-check every shape in the bundle; returns the node count."""
    for part in ("x", "tx", "allx"):
        if not sp.issparse(getattr(b, part)):
            raise ConvertError(f"ind.{b.name}.{part}: expected a scipy sparse matrix")
    n = len(b.graph)
    n_pool, p = b.allx.shape
    d = b.y.shape[1] if b.y.ndim == 2 else 0

    if b.x.shape[1] != p or b.tx.shape[1] != p:
        raise ConvertError(f"feature width mismatch: x {b.x.shape}, tx {b.tx.shape}, allx {b.allx.shape}")
    if d < 2 or b.ty.ndim != 2 or b.ty.shape[1] != d or b.ally.shape != (n_pool, d):
        raise ConvertError("label width mismatch between y, ty, ally")
    if b.x.shape[0] != b.y.shape[0]:
        raise ConvertError(f"x has {b.x.shape[0]} rows but y has {b.y.shape[0]}")
    if b.tx.shape[0] != b.ty.shape[0]:
        raise ConvertError(f"tx has {b.tx.shape[0]} rows but ty has {b.ty.shape[0]}")

    n_train = b.y.shape[0]
    if n_train != TRAIN_PER_CLASS * d:
        raise ConvertError(
            f"expected {TRAIN_PER_CLASS} labeled nodes per class "
            f"({TRAIN_PER_CLASS * d} total for {d} classes), found {n_train}"
        )
    if n_pool < n_train + VAL_SIZE:
        raise ConvertError(
            f"training pool holds {n_pool} nodes, too few for "
            f"{n_train} train + {VAL_SIZE} validation"
        )
    if (b.allx[:n_train] != b.x).nnz != 0 or not np.array_equal(b.ally[:n_train], b.y):
        raise ConvertError("allx/ally do not begin with x/y; bundle rows are misaligned")

    t = b.test_index
    if t.size != b.tx.shape[0]:
        raise ConvertError(f"test.index lists {t.size} ids but tx has {b.tx.shape[0]} rows")
    if np.unique(t).size != t.size:
        raise ConvertError("test.index contains duplicate ids")
    if t.size == 0 or t.min() < n_pool or t.max() >= n:
        raise ConvertError(
            f"test ids must lie in [{n_pool}, {n}), found range "
            f"[{t.min() if t.size else '-'}, {t.max() if t.size else '-'}]"
        )
    for node, neighbors in b.graph.items():
        if not 0 <= int(node) < n:
            raise ConvertError(f"graph key {node} outside [0, {n})")
        for nb in neighbors:
            if not 0 <= int(nb) < n:
                raise ConvertError(f"graph neighbor {nb} of node {node} outside [0, {n})")
    return n


def _assemble(b: Bundle, n: int):
    """Dense feature/label matrices in canonical node order, plus metadata."""
    n_pool, p = b.allx.shape
    d = b.y.shape[1]

    features = np.zeros((n, p))
    features[:n_pool] = b.allx.toarray()
    features[b.test_index] = b.tx.toarray()  # row j of tx belongs to node test_index[j]

    onehot = np.zeros((n, d))
    onehot[:n_pool] = b.ally
    onehot[b.test_index] = b.ty

    # ids in the test tail that tx never covered: the isolated-document patch
    tail = np.arange(n_pool, n)
    patched = np.setdiff1d(tail, b.test_index)

    row_hits = onehot.sum(axis=1)
    if not np.all(np.isin(row_hits, (0.0, 1.0))):
        raise ConvertError("label rows must be one-hot or all-zero")
    labels = np.where(row_hits == 1.0, np.argmax(onehot, axis=1), -1).astype(np.int64)
    if np.any(labels[:n_pool] == -1):
        raise ConvertError("training pool contains an unlabeled row in ally")

    # row-normalize features, the standard preprocessing for these benchmarks
    sums = features.sum(axis=1, keepdims=True)
    features = np.divide(features, sums, out=np.zeros_like(features), where=sums != 0)

    edges = set()
    self_loops = 0
    for node, neighbors in b.graph.items():
        a = int(node)
        for nb in neighbors:
            bb = int(nb)
            if a == bb:
                self_loops += 1
                continue
            edges.add((min(a, bb), max(a, bb)))
    return features, labels, sorted(edges), patched, self_loops


def _render_features(features: np.ndarray) -> str:
    lines = []
    for row in features:
        nz = np.nonzero(row)[0]
        lines.append(" ".join(f"{j}:{float(row[j])!r}" for j in nz))
    return "\n".join(lines) + "\n"


def convert_planetoid(input_dir, dataset_name: str, output_dir) -> Path:
    """Read one bundle and write the text dataset directory; returns its path.

    Output files: meta.json, edges.txt, features.txt, labels.txt,
    train.txt, val.txt, test.txt, provenance.json. Deterministic: the
    same bundle always produces byte-identical output.
    """
    bundle = load_bundle(input_dir, dataset_name)
    n = _validate(bundle)
    features, labels, edges, patched, self_loops = _assemble(bundle, n)

    n_train = bundle.y.shape[0]
    train = np.arange(n_train)
    val = np.arange(n_train, n_train + VAL_SIZE)
    test = np.sort(bundle.test_index)

    meta = {
        "name": dataset_name,
        "num_nodes": n,
        "num_features": int(features.shape[1]),
        "num_classes": int(bundle.y.shape[1]),
        "num_edges_undirected": len(edges),
        "num_train": int(train.size),
        "num_val": int(val.size),
        "num_test": int(test.size),
        "num_labeled": int(np.sum(labels >= 0)),
    }
    provenance = {
        "dataset": dataset_name,
        "upstream_files": bundle.file_hashes,
        "patched_isolated_nodes": [int(i) for i in patched],
        "num_patched_isolated_nodes": int(patched.size),
        "self_loop_entries_dropped": self_loops,
        "feature_row_normalization": True,
        "format_version": 1,
    }

    # build every file body before touching the filesystem
    files = {
        "meta.json": json.dumps(meta, indent=2, sort_keys=True) + "\n",
        "edges.txt": "\n".join(f"{a} {b}" for a, b in edges) + ("\n" if edges else ""),
        "features.txt": _render_features(features),
        "labels.txt": "\n".join(f"{i} {labels[i]}" for i in range(n) if labels[i] >= 0) + "\n",
        "train.txt": "\n".join(str(i) for i in train) + "\n",
        "val.txt": "\n".join(str(i) for i in val) + "\n",
        "test.txt": "\n".join(str(i) for i in test) + "\n",
        "provenance.json": json.dumps(provenance, indent=2, sort_keys=True) + "\n",
    }

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, body in files.items():
        (out / name).write_text(body)
    return out
