"""Command-line pipeline driver.

Defaults for file arguments live under GRAINS_DATA_DIR (current directory
when unset), so the whole pipeline can run as:

    scenegen synth-corpus --seed 1 --count 500
    scenegen build-trees
    scenegen train --epochs 120
    scenegen generate --count 100 --svg
    scenegen eval
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import (build_scene_graph, cooccurrence_from_category_sets,
                       cooccurrence_matrix, cooccurrence_report,
                       cooccurrence_similarity, graph_kernel,
                       relpos_distribution, relpos_distribution_svg)
from .apps import bake_tree, layout_to_scenes, load_layout
from .hierarchy import build_hierarchy, load_trees, save_trees, validate_tree
from .model import CheckpointError, ModelConfig, init_model, load_model
from .relpos import RelationConfig
from .rvnn import GenerationError, TrainConfig, batch_size_for, evaluate, train
from .scene import (WALL, FLOOR, CorpusError, FilterConfig, Scene,
                    SceneObject, Vocabulary, build_vocabulary, load_corpus,
                    save_corpus)
from .synthesis import (export_scene, realize_placements, render_topview,
                        sample_scene)
from .synthetic import TemplateConfig, synthesize_corpus


def data_dir() -> Path:
    return Path(os.environ.get("GRAINS_DATA_DIR", "."))


def _default(name: str) -> str:
    return str(data_dir() / name)


def cmd_synth_corpus(args) -> int:
    corpus = synthesize_corpus(TemplateConfig(), seed=args.seed,
                               count=args.count)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} scenes to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    filt = FilterConfig(min_objects=args.min_objects,
                        max_objects=args.max_objects,
                        min_category_frequency=args.min_category_frequency)
    corpus, report = load_corpus(args.corpus, filt)
    save_corpus(corpus, args.out)
    print(json.dumps(report.as_dict(), indent=1))
    return 0


def cmd_build_trees(args) -> int:
    corpus, _ = load_corpus(args.corpus)
    cfg = RelationConfig()
    trees = [build_hierarchy(s, cfg, wall_root_mode=args.wall_root_mode)
             for s in corpus]
    bad = [i for i, t in enumerate(trees) if not validate_tree(t).ok]
    if bad:
        print(f"error: {len(bad)} trees failed validation "
              f"(first: scene {bad[0]})", file=sys.stderr)
        return 1
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_trees(trees, args.out)
    print(f"wrote {len(trees)} trees to {args.out}")
    return 0


def _vocabulary_from_trees(trees) -> Vocabulary:
    from collections import Counter
    counts = Counter()
    for t in trees:
        counts.update({l.obj.category for l in t.root.leaves()})
    names = [c for c in counts if c not in (WALL, FLOOR)]
    names.sort(key=lambda c: (-counts[c], c))
    return Vocabulary(tuple(names) + (WALL, FLOOR))


def cmd_train(args) -> int:
    trees = load_trees(args.trees)
    vocab = _vocabulary_from_trees(trees)
    config = ModelConfig(vocab_size=len(vocab),
                         position_mode=args.position_mode,
                         labels_enabled=not args.no_labels,
                         wall_root_mode=args.wall_root_mode)
    params = init_model(config, vocab, seed=args.seed)
    hyper = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                        lr=args.lr, seed=args.seed,
                        checkpoint_path=args.out,
                        log_fn=(lambda e, l: print(
                            f"epoch {e + 1}: total {l.total:.4f}"))
                        if args.verbose else None)
    t0 = time.time()
    curve = train(params, trees, hyper)
    metrics = evaluate(params, trees[: min(50, len(trees))])
    print(json.dumps({
        "trees": len(trees), "batch_size": args.batch_size or batch_size_for(len(trees)),
        "epochs": args.epochs, "seconds": round(time.time() - t0, 1),
        "first_epoch_loss": round(curve[0].total, 4),
        "final_loss": round(curve[-1].total, 4),
        "classifier_accuracy": round(metrics["classifier_accuracy"], 4),
        "leaf_category_accuracy": round(metrics["leaf_category_accuracy"], 4),
    }, indent=1))
    return 0


def _wall_count(tree) -> int:
    return sum(1 for l in tree.root.leaves() if l.obj.category == WALL)


def cmd_generate(args) -> int:
    params = load_model(args.model)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    made = failures = invalid = 0
    four_walls = 0
    decode_s = 0.0
    attempts = 0
    while made < args.count and attempts < args.count * 20:
        attempts += 1
        t0 = time.time()
        try:
            tree = sample_scene(params, rng)
        except GenerationError:
            failures += 1
            continue
        decode_s += time.time() - t0
        if not validate_tree(tree, structural_only=True).ok:
            invalid += 1
            continue
        baked = bake_tree(tree)
        scene = realize_placements(baked)
        made += 1
        export_scene(scene, out / f"scene_{made:05d}.json")
        if args.svg:
            (out / f"scene_{made:05d}.svg").write_text(
                render_topview(scene), encoding="utf-8")
        four_walls += int(_wall_count(baked) == 4)
    report = {
        "requested": args.count, "generated": made,
        "decode_failures": failures, "invalid_trees": invalid,
        "four_wall_fraction": round(four_walls / max(made, 1), 4),
        "mean_decode_ms": round(1000 * decode_s / max(attempts - failures, 1), 3),
    }
    (out / "report.json").write_text(json.dumps(report, indent=1),
                                     encoding="utf-8")
    print(json.dumps(report, indent=1))
    return 0 if made == args.count else 1


def _load_generated(gen_dir: Path):
    from .synthesis import import_scene
    return [import_scene(p) for p in sorted(gen_dir.glob("scene_*.json"))]


def cmd_eval(args) -> int:
    training, _ = load_corpus(args.corpus)
    generated = _load_generated(Path(args.generated))
    if not generated:
        print("error: no generated scenes found", file=sys.stderr)
        return 1
    vocab = build_vocabulary(training)
    cm_train = cooccurrence_matrix(training, vocab)
    cm_gen = cooccurrence_from_category_sets(
        [{p.category for p in s.placements} for s in generated], vocab)
    sims = cooccurrence_similarity(cm_train, cm_gen,
                                   len(training), len(generated))
    mean_sim = (sum(sims.values()) / len(sims)) if sims else float("nan")

    # graph-kernel nearest neighbors for a few generated scenes
    graphs = [build_scene_graph(s) for s in training]
    nn_report = []
    for gi, gs in enumerate(generated[: args.nn_queries]):
        try:
            scene = Scene(room=gs.room, objects=tuple(
                SceneObject(id=f"o{i}", category=p.category, obb=p.obb)
                for i, p in enumerate(gs.placements)))
        except ValueError:
            continue
        qg = build_scene_graph(scene)
        sims3 = sorted(((graph_kernel(qg, g), -i) for i, g in enumerate(graphs)),
                       reverse=True)[:3]
        nn_report.append({"generated": gi,
                          "neighbors": [{"index": -i, "similarity": round(s, 4)}
                                        for s, i in sims3]})

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "training_scenes": len(training), "generated_scenes": len(generated),
        "cooccurrence_similarity_mean": None if sims == {} else round(mean_sim, 4),
        "cooccurrence_pairs_retained": len(sims),
        "nearest_neighbors": nn_report,
    }
    out.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    (out.parent / "cooccurrence_training.txt").write_text(
        cooccurrence_report(cm_train), encoding="utf-8")
    cats = [c for c in vocab.names if c not in (WALL, FLOOR)]
    if len(cats) >= 2:
        dist = relpos_distribution(training, cats[0], cats[1])
        (out.parent / f"relpos_{cats[0]}_{cats[1]}.svg").write_text(
            relpos_distribution_svg(dist), encoding="utf-8")
    print(json.dumps(doc, indent=1))
    return 0


def cmd_layout2scene(args) -> int:
    params = load_model(args.model)
    layout = load_layout(args.layout)
    scenes = layout_to_scenes(params, layout, args.n, mode=args.mode,
                              seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(scenes):
        export_scene(s, out / f"layout_scene_{i:03d}.json")
        if args.svg:
            (out / f"layout_scene_{i:03d}.svg").write_text(
                render_topview(s), encoding="utf-8")
    print(f"wrote {len(scenes)} scenes to {out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    serve(args.model, address=args.address, port=args.port,
          catalog_path=args.catalog, store_dir=args.store_dir,
          static_dir=args.static)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scenegen")
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("synth-corpus", help="generate a synthetic corpus")
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--count", type=int, default=500)
    sc.add_argument("--out", default=_default("corpus.json"))
    sc.set_defaults(fn=cmd_synth_corpus)

    ig = sub.add_parser("ingest", help="filter a corpus file")
    ig.add_argument("--corpus", default=_default("corpus.json"))
    ig.add_argument("--out", default=_default("corpus_filtered.json"))
    ig.add_argument("--min-objects", type=int, default=4)
    ig.add_argument("--max-objects", type=int, default=20)
    ig.add_argument("--min-category-frequency", type=float, default=0.01)
    ig.set_defaults(fn=cmd_ingest)

    bt = sub.add_parser("build-trees", help="build scene hierarchies")
    bt.add_argument("--corpus", default=_default("corpus.json"))
    bt.add_argument("--out", default=_default("trees.json"))
    bt.add_argument("--wall-root-mode", default="full",
                    choices=("full", "wall_only", "none"))
    bt.set_defaults(fn=cmd_build_trees)

    tr = sub.add_parser("train", help="train the generative model")
    tr.add_argument("--trees", default=_default("trees.json"))
    tr.add_argument("--out", default=_default("model.bin"))
    tr.add_argument("--epochs", type=int, default=120)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--position-mode", default="relative",
                    choices=("relative", "absolute", "center_translation"))
    tr.add_argument("--no-labels", action="store_true")
    tr.add_argument("--wall-root-mode", default="full",
                    choices=("full", "wall_only", "none"))
    tr.add_argument("--verbose", action="store_true")
    tr.set_defaults(fn=cmd_train)

    ge = sub.add_parser("generate", help="sample scenes from a checkpoint")
    ge.add_argument("--model", default=_default("model.bin"))
    ge.add_argument("--count", type=int, default=10)
    ge.add_argument("--seed", type=int, default=0)
    ge.add_argument("--out-dir", default=_default("generated"))
    ge.add_argument("--svg", action="store_true")
    ge.set_defaults(fn=cmd_generate)

    ev = sub.add_parser("eval", help="compare generated scenes to training")
    ev.add_argument("--corpus", default=_default("corpus.json"))
    ev.add_argument("--generated", default=_default("generated"))
    ev.add_argument("--out", default=_default("eval.json"))
    ev.add_argument("--nn-queries", type=int, default=3)
    ev.set_defaults(fn=cmd_eval)

    ls = sub.add_parser("layout2scene", help="scenes from a 2D box layout")
    ls.add_argument("--model", default=_default("model.bin"))
    ls.add_argument("--layout", required=True)
    ls.add_argument("--n", type=int, default=1)
    ls.add_argument("--mode", default="mean", choices=("mean", "sample"))
    ls.add_argument("--seed", type=int, default=0)
    ls.add_argument("--out-dir", default=_default("layout_scenes"))
    ls.add_argument("--svg", action="store_true")
    ls.set_defaults(fn=cmd_layout2scene)

    sv = sub.add_parser("serve", help="run the HTTP service")
    sv.add_argument("--model", default=_default("model.bin"))
    sv.add_argument("--address", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8808)
    sv.add_argument("--catalog", default=None)
    sv.add_argument("--store-dir", default=None)
    sv.add_argument("--static", default=None)
    sv.set_defaults(fn=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CorpusError, CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
