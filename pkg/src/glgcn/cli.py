"""Command-line surface: train, eval, gradcheck, bench, lambda-search.

Progress goes to stderr, machine-readable results to stdout (or --out),
so piping stays clean. Exit codes: 0 success, 1 runtime or data
failure, 2 usage error. JSON output carries schema_version and the full
config echo so every reported number is reproducible from the report.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .data_io import (
    CheckpointError,
    DatasetFormatError,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    synth_fixture,
)
from .graph import build_similarity_adj, label_propagation
from .loss_grad import VARIANTS, finite_diff_check
from .model import ModelParams
from .optim_train import (
    DEFAULT_LAMBDA_GRID,
    TrainConfig,
    TrainDivergedError,
    evaluate,
    select_lambda,
    train,
)

__all__ = ["main", "build_parser"]

SCHEMA_VERSION = 1
GRADCHECK_THRESHOLD = 1e-5
BENCH_METHODS = ("lp",) + VARIANTS


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _pos_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _pos_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _rate(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1), got {text}")
    return value


def _dims(text: str) -> tuple:
    try:
        dims = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"widths must be positive integers, got {text!r}")
    return dims


def _seeds_arg(text: str) -> list:
    try:
        if "," in text:
            seeds = [int(t) for t in text.split(",") if t.strip()]
        else:
            seeds = list(range(int(text)))
        if not seeds or any(s < 0 for s in seeds):
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a count or comma-separated seed list, got {text!r}"
        ) from None
    return seeds


def _grid(text: str) -> list:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("grid values must be non-negative")
    return values


def _add_config_flags(p: argparse.ArgumentParser, include_variant: bool = True) -> None:
    g = p.add_argument_group("model and training configuration")
    if include_variant:
        g.add_argument("--variant", choices=VARIANTS, default="gcn",
                       help="model variant (default: %(default)s)")
    g.add_argument("--lambda-label", type=_nonneg_float, default=None, metavar="L",
                   help="weight of the label-side penalty (default: 0.01)")
    g.add_argument("--lambda-feature", type=_nonneg_float, default=None, metavar="L",
                   help="weight of the feature-side penalty (default: follow --lambda-label)")
    g.add_argument("--alpha", type=_nonneg_float, default=1.0,
                   help="cross-class weight in the label correlation graph (default: %(default)s)")
    g.add_argument("--feature-reg-graph", choices=("S", "C"), default="S",
                   help="graph the feature penalty uses (default: %(default)s)")
    g.add_argument("--s-construction", choices=("adjacency", "knn"), default="adjacency",
                   help="how the similarity graph S is built (default: %(default)s)")
    g.add_argument("--s-normalize", action="store_true",
                   help="degree-normalize S rows when built from the adjacency")
    g.add_argument("--knn-k", type=_pos_int, default=10,
                   help="neighbors per node for the kNN graph (default: %(default)s)")
    g.add_argument("--knn-sigma", type=_pos_float, default=1.0,
                   help="Gaussian bandwidth for kNN edge weights (default: %(default)s)")
    g.add_argument("--hidden-dims", type=_dims, default=(16,), metavar="W[,W...]",
                   help="comma-separated hidden widths (default: 16)")
    g.add_argument("--dropout-rate", type=_rate, default=0.5,
                   help="dropout on every layer input (default: %(default)s)")
    g.add_argument("--learning-rate", type=_pos_float, default=0.01,
                   help="Adam learning rate (default: %(default)s)")
    g.add_argument("--weight-decay", type=_nonneg_float, default=5e-4,
                   help="L2 coefficient on the first weight matrix (default: %(default)s)")
    g.add_argument("--max-epochs", type=_pos_int, default=200,
                   help="epoch cap (default: %(default)s)")
    g.add_argument("--patience", type=_pos_int, default=10,
                   help="epochs without val-loss improvement before stopping (default: %(default)s)")
    g.add_argument("--seed", type=_nonneg_int, default=0,
                   help="seed for init and dropout (default: %(default)s)")
    g.add_argument("--use-bias", action="store_true", help="add a bias vector per layer")
    g.add_argument("--feature-reg-layer", type=_pos_int, default=None, metavar="K",
                   help="1-based hidden layer the feature penalty reads (default: last)")
    g.add_argument("--reg-on-logits", action="store_true",
                   help="apply the label penalty to logits instead of softmax outputs")


def _add_io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="write the result here instead of stdout")
    p.add_argument("--format", choices=("text", "json", "markdown"), default="text",
                   help="output format (default: %(default)s)")


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        variant=getattr(args, "variant", "gcn"),
        lambda_label=0.01 if args.lambda_label is None else args.lambda_label,
        lambda_feature=args.lambda_feature,
        alpha=args.alpha,
        feature_reg_graph=args.feature_reg_graph,
        s_construction=args.s_construction,
        s_normalize=args.s_normalize,
        knn_k=args.knn_k,
        knn_sigma=args.knn_sigma,
        hidden_dims=args.hidden_dims,
        dropout_rate=args.dropout_rate,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        use_bias=args.use_bias,
        feature_reg_layer=args.feature_reg_layer,
        reg_on_logits=args.reg_on_logits,
    )


def _emit(text: str, args) -> None:
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        print(text)


def _render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)


def _render_table(headers, rows, fmt: str) -> str:
    cells = [[str(c) for c in row] for row in rows]
    if fmt == "markdown":
        lines = ["| " + " | ".join(headers) + " |",
                 "| " + " | ".join("---" for _ in headers) + " |"]
        lines += ["| " + " | ".join(row) + " |" for row in cells]
        return "\n".join(lines)
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines)


def cmd_train(args) -> int:
    dataset = load_dataset(args.dataset)
    config = _config_from_args(args)
    seeds = args.seeds if args.seeds is not None else [config.seed]

    runs = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        params, report = train(dataset, cfg)
        train_acc = evaluate(params, dataset, "train")
        print(
            f"[train] {dataset.name} variant={cfg.variant} seed={seed}: "
            f"epochs={report.epochs_run} best={report.best_epoch} "
            f"val_acc={report.best_val_accuracy:.4f} test_acc={report.test_accuracy:.4f}",
            file=sys.stderr,
        )
        runs.append((params, report, train_acc))

    accs = [report.test_accuracy for _, report, _ in runs]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "train",
        "dataset": dataset.name,
        "config": config.to_dict(),
        "seeds": list(seeds),
        "runs": [
            {
                "seed": seed,
                "train_accuracy": train_acc,
                "report": report.to_dict(),
            }
            for seed, (_, report, train_acc) in zip(seeds, runs)
        ],
        "mean_test_accuracy": float(np.mean(accs)),
        "std_test_accuracy": float(np.std(accs)),
    }
    if args.save_checkpoint:
        best = max(runs, key=lambda r: r[1].best_val_accuracy)
        save_checkpoint(best[0], best[1].config, args.save_checkpoint)
        print(f"checkpoint saved to {args.save_checkpoint}", file=sys.stderr)

    if args.format == "json":
        _emit(_render_json(payload), args)
    else:
        headers = ["seed", "epochs", "best_epoch", "train_acc", "val_acc", "test_acc"]
        rows = [
            [seed, report.epochs_run, report.best_epoch,
             f"{train_acc:.4f}", f"{report.best_val_accuracy:.4f}", f"{report.test_accuracy:.4f}"]
            for seed, (_, report, train_acc) in zip(seeds, runs)
        ]
        table = _render_table(headers, rows, args.format)
        summary = (
            f"dataset={dataset.name} variant={config.variant} "
            f"mean_test_accuracy={payload['mean_test_accuracy']:.4f} "
            f"std={payload['std_test_accuracy']:.4f}"
        )
        _emit(table + "\n" + summary, args)
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.dataset)
    params, config = load_checkpoint(args.checkpoint)
    accuracy = evaluate(params, dataset, args.split)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "eval",
        "dataset": dataset.name,
        "split": args.split,
        "accuracy": accuracy,
        "checkpoint_config": config,
    }
    if args.format == "json":
        _emit(_render_json(payload), args)
    elif args.format == "markdown":
        _emit(_render_table(["dataset", "split", "accuracy"],
                            [[dataset.name, args.split, f"{accuracy:.4f}"]], "markdown"), args)
    else:
        _emit(f"{dataset.name} {args.split} accuracy: {accuracy:.4f}", args)
    return 0


def cmd_gradcheck(args) -> int:
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        dataset = synth_fixture(3, 2, p=4, intra_edge_prob=0.9, inter_edge_prob=0.2, seed=7)
    variants = [args.variant] if args.variant else list(VARIANTS)
    args.variant = "gcn"
    base = _config_from_args(args)
    layer_dims = [dataset.graph.features.shape[1], *base.hidden_dims, dataset.graph.num_classes]
    params = ModelParams.init(layer_dims, base.seed, use_bias=base.use_bias)

    results = []
    for variant in variants:
        cfg = replace(base, variant=variant)
        err = finite_diff_check(variant, dataset, params, cfg, epsilon=args.epsilon)
        results.append({"variant": variant, "max_rel_error": err})
    ok = all(r["max_rel_error"] < GRADCHECK_THRESHOLD for r in results)

    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "gradcheck",
            "epsilon": args.epsilon,
            "threshold": GRADCHECK_THRESHOLD,
            "results": results,
            "pass": ok,
        }
        _emit(_render_json(payload), args)
    elif args.format == "markdown":
        rows = [[r["variant"], f"{r['max_rel_error']:.3e}"] for r in results]
        _emit(_render_table(["variant", "max_rel_error"], rows, "markdown"), args)
    else:
        lines = [f"{r['variant']}: max_rel_error = {r['max_rel_error']:.3e}" for r in results]
        lines.append("PASS" if ok else f"FAIL (threshold {GRADCHECK_THRESHOLD:g})")
        _emit("\n".join(lines), args)
    return 0 if ok else 1


def _format_cell(mean: float, std: float) -> str:
    return f"{mean:.1f} ± {std:.1f}"


def _bench_dataset(dataset, args, base: TrainConfig, seeds, methods) -> dict:
    g = dataset.graph
    cells = {}
    for method in methods:
        if method == "lp":
            s = build_similarity_adj(g.adjacency, normalize=False)
            preds = label_propagation(s, g.labels, dataset.train)
            acc = float(np.mean(preds[dataset.test] == g.labels[dataset.test]))
            print(f"[bench] {dataset.name} lp: test_acc={acc:.4f}", file=sys.stderr)
            cells["lp"] = {
                "mean": acc * 100.0, "std": 0.0,
                "seed_accuracies": [acc], "config": None,
            }
            continue
        cfg = replace(base, variant=method)
        pinned = args.lambda_label is not None or method == "gcn"
        if not pinned:
            print(f"[bench] {dataset.name} {method}: selecting lambda on validation",
                  file=sys.stderr)
            cfg, _ = select_lambda(dataset, cfg, args.lambda_grid)
        accs = []
        for seed in seeds:
            _, report = train(dataset, replace(cfg, seed=seed))
            accs.append(report.test_accuracy)
            print(f"[bench] {dataset.name} {method} seed={seed}: "
                  f"test_acc={report.test_accuracy:.4f}", file=sys.stderr)
        cells[method] = {
            "mean": float(np.mean(accs)) * 100.0,
            "std": float(np.std(accs)) * 100.0,
            "seed_accuracies": accs,
            "config": replace(cfg, seed=base.seed).to_dict(),
        }
    return cells


def cmd_bench(args) -> int:
    base = _config_from_args(args)
    seeds = args.seeds if args.seeds is not None else list(range(10))
    methods = [m for m in BENCH_METHODS if m in set(args.methods)] if args.methods else list(BENCH_METHODS)

    results = {}
    order = []
    for path in args.dataset:
        try:
            dataset = load_dataset(path)
        except DatasetFormatError as e:
            print(f"warning: skipping {path}: {e}", file=sys.stderr)
            continue
        order.append(dataset.name)
        results[dataset.name] = _bench_dataset(dataset, args, base, seeds, methods)
    if not results:
        print("error: no dataset could be loaded", file=sys.stderr)
        return 1

    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "bench",
            "seeds": list(seeds),
            "methods": methods,
            "datasets": order,
            "results": results,
        }
        _emit(_render_json(payload), args)
    else:
        headers = ["method"] + order
        rows = [
            [method] + [_format_cell(results[d][method]["mean"], results[d][method]["std"])
                        for d in order]
            for method in methods
        ]
        _emit(_render_table(headers, rows, args.format), args)
    return 0


def cmd_lambda_search(args) -> int:
    dataset = load_dataset(args.dataset)
    base = _config_from_args(args)
    chosen, table = select_lambda(dataset, base, args.lambda_grid, args.alpha_grid)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "lambda-search",
        "dataset": dataset.name,
        "chosen": chosen.to_dict(),
        "table": table,
    }
    if args.format == "json":
        _emit(_render_json(payload), args)
    else:
        rows = [[f"{c['lambda']:g}", f"{c['alpha']:g}", f"{c['val_accuracy']:.4f}"] for c in table]
        rendered = _render_table(["lambda", "alpha", "val_accuracy"], rows, args.format)
        chosen_line = (
            f"chosen: lambda={chosen.lambda_label:g} alpha={chosen.alpha:g}"
        )
        _emit(rendered + "\n" + chosen_line, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glgcn",
        description="Train and evaluate Laplacian-regularized graph convolutional networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model (or several seeds) on a dataset")
    p_train.add_argument("--dataset", required=True, help="dataset directory")
    p_train.add_argument("--seeds", type=_seeds_arg, default=None,
                         help="count (10 -> seeds 0..9) or comma-separated list (3,7,11)")
    p_train.add_argument("--save-checkpoint", default=None, metavar="PATH",
                         help="write the best-validation run's params here")
    _add_config_flags(p_train)
    _add_io_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p_eval.add_argument("--dataset", required=True, help="dataset directory")
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint file from train")
    p_eval.add_argument("--split", choices=("train", "val", "test"), default="test",
                        help="split to score (default: %(default)s)")
    _add_io_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_grad = sub.add_parser("gradcheck",
                            help="compare analytic gradients against finite differences")
    p_grad.add_argument("--dataset", default=None,
                        help="dataset directory (default: built-in 6-node fixture)")
    p_grad.add_argument("--epsilon", type=_pos_float, default=1e-5,
                        help="finite-difference step (default: %(default)s)")
    p_grad.add_argument("--variant", choices=VARIANTS, default=None,
                        help="check only this variant (default: all)")
    _add_config_flags(p_grad, include_variant=False)
    _add_io_flags(p_grad)
    p_grad.set_defaults(func=cmd_gradcheck, hidden_dims=(4,),
                        dropout_rate=0.0, feature_reg_graph="C", alpha=0.5,
                        lambda_label=1.0, lambda_feature=1.0)

    p_bench = sub.add_parser("bench", help="reproduce the benchmark table on dataset dirs")
    p_bench.add_argument("--dataset", action="append", required=True,
                         help="dataset directory; repeat for several datasets")
    p_bench.add_argument("--seeds", type=_seeds_arg, default=None,
                         help="count or comma-separated list (default: 10)")
    p_bench.add_argument("--methods", type=lambda t: [m for m in t.split(",") if m],
                         default=None,
                         help="comma-separated subset of lp,gcn,glgcn-f,glgcn-l,glgcn-fl")
    p_bench.add_argument("--lambda-grid", type=_grid, default=list(DEFAULT_LAMBDA_GRID),
                         help="grid for per-cell lambda selection")
    _add_config_flags(p_bench, include_variant=False)
    _add_io_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_search = sub.add_parser("lambda-search",
                              help="grid-search lambda (and alpha) on validation accuracy")
    p_search.add_argument("--dataset", required=True, help="dataset directory")
    p_search.add_argument("--lambda-grid", type=_grid, default=list(DEFAULT_LAMBDA_GRID),
                          help="comma-separated lambda grid")
    p_search.add_argument("--alpha-grid", type=_grid, default=None,
                          help="comma-separated alpha grid (default: built-in when C is used)")
    _add_config_flags(p_search)
    _add_io_flags(p_search)
    p_search.set_defaults(func=cmd_lambda_search)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, CheckpointError, TrainDivergedError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
