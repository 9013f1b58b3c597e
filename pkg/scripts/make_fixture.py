#!/usr/bin/env python3
"""Write a synthetic planted-partition dataset directory for smoke tests.

Example:
    python3 scripts/make_fixture.py data/synth --classes 3 --per-class 40
"""

import argparse

from glgcn.data_io import save_dataset, synth_fixture


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", help="dataset directory to create")
    parser.add_argument("--per-class", type=int, default=20)
    parser.add_argument("--classes", type=int, default=2)
    parser.add_argument("--features", type=int, default=8)
    parser.add_argument("--intra", type=float, default=0.7, help="intra-class edge probability")
    parser.add_argument("--inter", type=float, default=0.05, help="inter-class edge probability")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    dataset = synth_fixture(
        n_per_class=args.per_class,
        classes=args.classes,
        p=args.features,
        intra_edge_prob=args.intra,
        inter_edge_prob=args.inter,
        seed=args.seed,
    )
    save_dataset(dataset, args.out_dir)
    g = dataset.graph
    print(
        f"wrote {args.out_dir}: {g.n} nodes, {dataset.num_edges_undirected} edges, "
        f"{g.num_classes} classes, {g.features.shape[1]} features"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
