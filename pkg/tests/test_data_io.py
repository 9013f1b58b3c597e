"""Dataset directory round trips, format diagnostics, and checkpoints."""

import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from glgcn.data_io import (
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
from glgcn.graph import UNLABELED
from glgcn.model import ModelParams
from glgcn.optim_train import TrainConfig

MINIMAL = {
    "meta.json": json.dumps(
        {
            "name": "tiny",
            "num_nodes": 4,
            "num_features": 3,
            "num_classes": 2,
            "num_edges_undirected": 3,
            "num_train": 2,
            "num_val": 1,
            "num_test": 1,
            "num_labeled": 3,
        }
    ),
    "edges.txt": "0 1\n1 2\n2 3\n",
    "features.txt": "0:1.0\n1:2.5\n\n0:-1.0 2:0.5\n",
    "labels.txt": "0 0\n1 1\n3 0\n",
    "train.txt": "0\n1\n",
    "val.txt": "3\n",
    "test.txt": "2\n",
}


def write_dir(tmp_path, overrides=None, drop=None):
    files = dict(MINIMAL)
    if overrides:
        files.update(overrides)
    if drop:
        files.pop(drop)
    for name, text in files.items():
        (tmp_path / name).write_text(text)
    return tmp_path


# ------------------------------------------------------------------- loading


def test_load_minimal_dataset(tmp_path):
    ds = load_dataset(write_dir(tmp_path))
    assert ds.name == "tiny"
    g = ds.graph
    assert g.n == 4 and g.num_classes == 2
    assert ds.num_edges_undirected == 3
    assert g.features[3, 0] == -1.0 and g.features[3, 2] == 0.5
    assert np.all(g.features[2] == 0.0)  # blank feature line
    assert np.array_equal(g.labels, [0, 1, UNLABELED, 0])
    assert np.array_equal(ds.train, [0, 1])
    assert ds.label_rate == 0.5


def test_round_trip_is_exact(tmp_path):
    src = synth_fixture(n_per_class=6, classes=3, p=5, seed=9)
    save_dataset(src, tmp_path / "out")
    back = load_dataset(tmp_path / "out")
    assert back.name == src.name
    assert np.array_equal(back.graph.adjacency.to_dense(), src.graph.adjacency.to_dense())
    assert np.array_equal(back.graph.features, src.graph.features)  # bit-exact floats
    assert np.array_equal(back.graph.labels, src.graph.labels)
    for split in ("train", "val", "test"):
        assert np.array_equal(getattr(back, split), getattr(src, split))


def test_duplicate_and_reciprocal_edges_collapse(tmp_path):
    noisy = "0 1\n1 0\n0 1\n1 2\n2 3\n"
    ds = load_dataset(write_dir(tmp_path, {"edges.txt": noisy}))
    assert ds.num_edges_undirected == 3
    dense = ds.graph.adjacency.to_dense()
    assert dense[0, 1] == 1.0 and dense[1, 0] == 1.0


def test_self_loops_dropped_with_warning(tmp_path):
    with_loop = "0 1\n2 2\n1 2\n2 3\n"
    with pytest.warns(DataWarning, match="self-loop"):
        ds = load_dataset(write_dir(tmp_path, {"edges.txt": with_loop}))
    assert ds.graph.adjacency.to_dense()[2, 2] == 0.0


def test_isolated_node_warning(tmp_path):
    meta = json.loads(MINIMAL["meta.json"])
    meta["num_edges_undirected"] = 2
    files = {"meta.json": json.dumps(meta), "edges.txt": "0 1\n1 2\n"}
    with pytest.warns(DataWarning, match="isolated"):
        load_dataset(write_dir(tmp_path, files))


def test_missing_directory_and_missing_file(tmp_path):
    with pytest.raises(DatasetFormatError, match="does not exist"):
        load_dataset(tmp_path / "nope")
    with pytest.raises(DatasetFormatError, match="labels.txt"):
        load_dataset(write_dir(tmp_path, drop="labels.txt"))


@pytest.mark.parametrize(
    "overrides, fragment",
    [
        ({"meta.json": "{not json"}, "meta.json"),
        ({"meta.json": json.dumps({"name": "x"})}, "missing manifest key"),
        ({"edges.txt": "0\n"}, "edges.txt:1"),
        ({"edges.txt": "0 9\n"}, "out of range"),
        ({"edges.txt": "0 one\n"}, "expected an integer"),
        ({"features.txt": "0:1\n"}, "expected 4 feature rows"),
        ({"features.txt": "0:1\n1:1\nx\n0:1\n"}, "features.txt:3"),
        ({"features.txt": "5:1\n\n\n\n"}, "feature index 5 out of range"),
        ({"features.txt": "0:1 0:2\n\n\n\n"}, "duplicate feature index"),
        ({"features.txt": "0:abc\n\n\n\n"}, "expected a real value"),
        ({"labels.txt": "0 0\n0 1\n1 1\n"}, "labeled twice"),
        ({"labels.txt": "0 5\n1 1\n3 0\n"}, "class id 5 out of range"),
        ({"labels.txt": "0\n"}, "labels.txt:1"),
        ({"train.txt": "0\n0\n"}, "duplicate node id"),
        ({"train.txt": "0\n9\n"}, "out of range"),
        ({"val.txt": "1\n"}, "overlapping splits"),
        ({"train.txt": "0\n2\n", "test.txt": "1\n"}, "no entry in labels.txt"),
    ],
)
def test_malformed_inputs_name_the_file(tmp_path, overrides, fragment):
    with pytest.raises(DatasetFormatError, match=fragment):
        load_dataset(write_dir(tmp_path, overrides))


@pytest.mark.parametrize(
    "key, actual",
    [("num_edges_undirected", 9), ("num_labeled", 9), ("num_train", 9)],
)
def test_manifest_count_mismatches(tmp_path, key, actual):
    meta = json.loads(MINIMAL["meta.json"])
    meta[key] = actual
    with pytest.raises(DatasetFormatError, match="count mismatch"):
        load_dataset(write_dir(tmp_path, {"meta.json": json.dumps(meta)}))


def test_dataset_validation_direct():
    ds = synth_fixture(n_per_class=4, classes=2, p=3, seed=1)
    with pytest.raises(ValueError, match="overlap"):
        Dataset(ds.name, ds.graph, ds.train, ds.train, ds.test)
    with pytest.raises(ValueError, match="duplicate"):
        Dataset(ds.name, ds.graph, np.array([0, 0]), ds.val, ds.test)
    with pytest.raises(ValueError, match="out of range"):
        Dataset(ds.name, ds.graph, np.array([99]), ds.val, ds.test)


# -------------------------------------------------------------- synth_fixture


def test_synth_fixture_deterministic():
    a = synth_fixture(seed=3)
    b = synth_fixture(seed=3)
    assert np.array_equal(a.graph.features, b.graph.features)
    assert np.array_equal(a.graph.adjacency.to_dense(), b.graph.adjacency.to_dense())
    assert np.array_equal(a.train, b.train)


def test_synth_fixture_block_structure():
    ds = synth_fixture(n_per_class=5, classes=2, p=4, intra_edge_prob=1.0, inter_edge_prob=0.0, seed=0)
    dense = ds.graph.adjacency.to_dense()
    same = ds.graph.labels[:, None] == ds.graph.labels[None, :]
    off_diag = ~np.eye(10, dtype=bool)
    assert np.all(dense[same & off_diag] == 1.0)
    assert np.all(dense[~same] == 0.0)


def test_synth_fixture_splits_partition_all_nodes():
    ds = synth_fixture(n_per_class=7, classes=3, p=4, seed=2)
    combined = np.sort(np.concatenate([ds.train, ds.val, ds.test]))
    assert np.array_equal(combined, np.arange(21))
    # 30/30/40 split per class, at least one node each
    assert ds.train.size == 6 and ds.val.size == 6 and ds.test.size == 9
    for c in range(3):
        assert np.sum(ds.graph.labels[ds.train] == c) == 2


def test_synth_fixture_feature_shift_separates_classes():
    ds = synth_fixture(n_per_class=30, classes=2, p=6, seed=4)
    x, y = ds.graph.features, ds.graph.labels
    mean0 = x[y == 0, 0].mean()
    mean1 = x[y == 1, 1].mean()
    assert mean0 > 2.0 and mean1 > 2.0
    assert x[y == 1, 0].mean() < 1.0


def test_synth_fixture_rejects_bad_arguments():
    with pytest.raises(ValueError):
        synth_fixture(classes=1)
    with pytest.raises(ValueError):
        synth_fixture(intra_edge_prob=1.5)


# ----------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip_bitwise(tmp_path):
    params = ModelParams.init([5, 4, 3], seed=7, use_bias=True)
    params.biases[0][:] = np.random.default_rng(1).normal(size=4)
    config = TrainConfig(variant="glgcn-fl", lambda_label=0.02, hidden_dims=(4,), use_bias=True)
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, config, path)

    back, cfg = load_checkpoint(path)
    assert all(np.array_equal(a, b) for a, b in zip(back.weights, params.weights))
    assert all(np.array_equal(a, b) for a, b in zip(back.biases, params.biases))
    assert TrainConfig.from_dict(cfg) == config


def test_checkpoint_without_bias(tmp_path):
    params = ModelParams.init([3, 2, 2], seed=0)
    save_checkpoint(params, {"note": "raw dict config"}, tmp_path / "m.ckpt")
    back, cfg = load_checkpoint(tmp_path / "m.ckpt")
    assert back.biases is None
    assert cfg == {"note": "raw dict config"}


def test_checkpoint_layer_dim_guard(tmp_path):
    params = ModelParams.init([3, 2, 2], seed=0)
    save_checkpoint(params, TrainConfig(hidden_dims=(2,)), tmp_path / "m.ckpt")
    assert load_checkpoint(tmp_path / "m.ckpt", expect_layer_dims=[3, 2, 2])[0] is not None
    with pytest.raises(CheckpointError, match="layer"):
        load_checkpoint(tmp_path / "m.ckpt", expect_layer_dims=[3, 5, 2])


def test_checkpoint_truncated_payload(tmp_path):
    params = ModelParams.init([3, 2, 2], seed=0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, TrainConfig(hidden_dims=(2,)), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(ModelParams.init([2, 2, 2], seed=0), {}, path)
    blob = path.read_bytes().replace(b" v1\n", b" v9\n", 1)
    path.write_bytes(blob)
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk"
    path.write_bytes(b"hello world\nend-header\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(b"\x00\x01\x02\x03")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_loaded_dataset_trains_without_warnings(tmp_path):
    # end to end: save, reload, train one epoch; no stray warnings
    ds = synth_fixture(n_per_class=5, classes=2, p=4, intra_edge_prob=0.9, inter_edge_prob=0.3, seed=6)
    save_dataset(ds, tmp_path / "d")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = load_dataset(tmp_path / "d")
    from glgcn.optim_train import train

    _, report = train(back, TrainConfig(max_epochs=2, patience=2, hidden_dims=(4,)))
    assert report.epochs_run == 2
