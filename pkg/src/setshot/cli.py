"""Command-line surface: synth, pretrain, embed, eval, diag."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import (export_embeddings, export_results, generate_sbm,
                   load_dataset, load_embeddings, save_dataset, SbmSpec)
from .diagnostics import pca_project
from .episodes import ClassSplit
from .pipeline import (EncoderStack, build_embeddings, embedding_retrieval_purity,
                       meta_test, meta_train, shift_report)


def _load_config(path: str | None, **overrides) -> RunConfig:
    base = RunConfig.from_json(path).to_dict() if path else RunConfig().to_dict()
    base.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(base)


def cmd_synth(args) -> int:
    with open(args.spec) as f:
        raw = json.load(f)
    split = ClassSplit(raw.pop("train_classes", []), raw.pop("val_classes", []),
                       raw.pop("test_classes", []))
    spec = SbmSpec(**raw)
    graph = generate_sbm(spec)
    if not (split.train_classes or split.val_classes or split.test_classes):
        split = ClassSplit(test_classes=list(range(spec.blocks)))
    save_dataset(graph, split, args.out)
    print(f"wrote {graph.n} nodes, {graph.m} edges to {args.out}")
    return 0


def cmd_pretrain(args) -> int:
    graph, _ = load_dataset(args.data)
    cfg = _load_config(args.config, seed=args.seed)
    stack, history = meta_train(graph, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stack.save(out / "params.bin")
    cfg.save_json(out / "config.json")
    with open(out / "loss_history.json", "w") as f:
        json.dump([float(x) for x in history], f)
        f.write("\n")
    print(f"pretrained {len(history)} epochs, final loss {history[-1]:.6f}")
    return 0


def cmd_embed(args) -> int:
    graph, _ = load_dataset(args.data)
    ckpt = Path(args.ckpt)
    cfg = RunConfig.from_json(ckpt / "config.json")
    stack = EncoderStack.load(ckpt / "params.bin", cfg)
    Z = build_embeddings(graph, stack, cfg)
    export_embeddings(Z, args.out, as_tsv=args.tsv)
    print(f"wrote embeddings {Z.shape} to {args.out}")
    return 0


def cmd_eval(args) -> int:
    graph, split = load_dataset(args.data)
    if graph.labels is None:
        raise ValueError("evaluation requires labels")
    cfg = _load_config(args.config, seed=args.seed, n_way=args.n, k_shot=args.k,
                       q_query=args.q, episodes=args.episodes,
                       repetitions=args.reps,
                       no_ot=args.no_ot or None, no_set=args.no_set or None,
                       no_instance=args.no_instance or None)
    Z = load_embeddings(args.emb)
    if Z.shape[0] != graph.n:
        raise ValueError(f"embeddings have {Z.shape[0]} rows for {graph.n} nodes")
    metrics = meta_test(Z, graph.labels, split, cfg, section=args.section)
    export_results(metrics, args.out)
    print(f"mean accuracy {metrics['mean_accuracy']:.4f} "
          f"± {metrics['std_accuracy']:.4f} over "
          f"{cfg.repetitions}x{cfg.episodes} episodes -> {args.out}")
    return 0


def cmd_diag(args) -> int:
    graph, split = load_dataset(args.data)
    if graph.labels is None:
        raise ValueError("diagnostics require labels")
    cfg = _load_config(args.config, seed=args.seed)
    Z = load_embeddings(args.emb)
    purity = embedding_retrieval_purity(Z, graph.labels, cfg)
    pairs = shift_report(Z, graph.labels, split, cfg, episodes=args.episodes,
                         section=args.section)
    before = [b for b, _ in pairs]
    after = [a for _, a in pairs]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    projection_path = out.with_name(out.stem + "_projection.tsv")
    np.savetxt(projection_path, pca_project(Z), delimiter="\t", fmt="%.9g")
    payload = {
        "retrieval_purity": purity,
        "shift": {
            "episodes": len(pairs),
            "median_before": float(np.median(before)),
            "median_after": float(np.median(after)),
            "pairs": [[float(b), float(a)] for b, a in pairs],
        },
        "projection_file": projection_path.name,
        "config": cfg.to_dict(),
    }
    with open(out, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"purity {purity:.4f}, median shift {np.median(before):.4f} -> "
          f"{np.median(after):.4f}; wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="setshot",
        description="Few-shot node classification with contrastive set "
                    "features and transport-calibrated support sets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic block-model dataset")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="contrastive pretraining")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="RunConfig JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("embed", help="build final node embeddings")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tsv", action="store_true", help="write TSV instead of binary")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="episodic N-way K-shot evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None, help="ways")
    p.add_argument("--k", type=int, default=None, help="shots")
    p.add_argument("--q", type=int, default=None, help="queries per class")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--section", default="test", choices=("train", "val", "test"))
    p.add_argument("--no-ot", action="store_true", dest="no_ot",
                   help="train the head on raw support instead of transported")
    p.add_argument("--no-set", action="store_true", dest="no_set",
                   help="record the set-ablated variant in the metrics")
    p.add_argument("--no-instance", action="store_true", dest="no_instance",
                   help="record the instance-ablated variant in the metrics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diag", help="retrieval purity, shift report, 2-D projection")
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--section", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diag)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
