"""Command-line pipeline driver.

Subcommands: gen, superpoints, center-train, train, discover, eval, stats,
export-ply, benchmark. Every run writes a manifest holding the config
snapshot, master seed, stage timings, and output paths; single-worker runs
are bit-reproducible from it.

Exit codes: 0 success, 2 usage error, 3 data/format error, 4 numeric failure.
Set FOBJ_LOG=debug for verbose progress.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import EngineConfig, RunManifest, load_config
from .sceneio import SceneFormatError, export_ply, load_scene, save_scene

log = logging.getLogger("fobj")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _setup_logging():
    level = os.environ.get("FOBJ_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname).1s %(name)s: %(message)s")


def _scene_paths(directory: str) -> list[str]:
    paths = sorted(p for p in os.listdir(directory) if p.endswith(".fobj"))
    if not paths:
        raise FileNotFoundError(f"no .fobj scenes in {directory}")
    return [os.path.join(directory, p) for p in paths]


def _load_scenes(directory: str):
    return [load_scene(p) for p in _scene_paths(directory)]


def _partition_path(out_dir: str, scene_id: str) -> str:
    return os.path.join(out_dir, f"{scene_id}.partition.npz")


def _save_partition(part, path: str):
    np.savez(path, assignment=part.assignment, centroids=part.centroids,
             adjacency=part.adjacency, K=part.K)


def _load_partition(path: str):
    from .superpoints import SuperpointPartition
    with np.load(path) as z:
        return SuperpointPartition(assignment=z["assignment"],
                                   K=int(z["K"]), centroids=z["centroids"],
                                   adjacency=z["adjacency"])


def _prepare_states(scenes, cfg: EngineConfig, enc_params, partitions_dir,
                    center_ckpt=None, oracle_center=True,
                    oracle_features=False):
    from .centerfield import load_center_regressor
    from .state import (GeoParams, make_oracle_center_provider,
                        make_regressor_center_provider, preprocess_scene)
    from .synth import FeatureSpec, attach_semantic_features

    geo = GeoParams(radius=cfg.geo_radius, alpha=cfg.geo_alpha,
                    min_pts=cfg.geo_min_pts, units=cfg.geo_units)
    if center_ckpt:
        provider_for = make_regressor_center_provider(
            load_center_regressor(center_ckpt))
    states = []
    for scene in scenes:
        if oracle_features or scene.semantic_features is None:
            attach_semantic_features(scene, FeatureSpec(dim=cfg.feature_spec_dim),
                                     seed=scene.n_points)
        part = None
        if partitions_dir:
            p = _partition_path(partitions_dir, scene.scene_id)
            if os.path.exists(p):
                part = _load_partition(p)
        provider = (make_oracle_center_provider(scene) if oracle_center and
                    not center_ckpt else provider_for)
        states.append(preprocess_scene(
            scene, enc_params, provider, knn=cfg.knn,
            color_weight=cfg.color_weight, k_f=cfg.k_f,
            min_size=cfg.min_size, adjacency_dist=cfg.adjacency_dist,
            bank_capacity=cfg.bank_capacity, geo=geo, partition=part))
        log.debug("prepared %s: K=%d", scene.scene_id, states[-1].partition.K)
    return states


def cmd_gen(args, cfg: EngineConfig) -> int:
    from .synth import SceneSpec, gen_scenes, attach_semantic_features, FeatureSpec
    manifest = RunManifest("gen", cfg, args.seed)
    manifest.start("generate")
    spec_kwargs = {}
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as f:
            spec_kwargs = json.load(f)
    spec = SceneSpec(**spec_kwargs)
    os.makedirs(args.out, exist_ok=True)
    scenes = gen_scenes(spec, args.n, args.seed)
    for sc in scenes:
        attach_semantic_features(sc, FeatureSpec(dim=cfg.feature_spec_dim),
                                 seed=sc.n_points)
        path = os.path.join(args.out, f"{sc.scene_id}.fobj")
        save_scene(sc, path)
        manifest.add_output(path)
    manifest.write(os.path.join(args.out, "manifest.json"))
    log.info("wrote %d scenes to %s", len(scenes), args.out)
    return 0


def cmd_superpoints(args, cfg: EngineConfig) -> int:
    from .superpoints import build_partition
    manifest = RunManifest("superpoints", cfg, 0)
    manifest.start("partition")
    os.makedirs(args.out, exist_ok=True)
    for scene in _load_scenes(args.scenes):
        part = build_partition(scene, knn=cfg.knn,
                               color_weight=cfg.color_weight, k_f=cfg.k_f,
                               min_size=cfg.min_size,
                               adjacency_dist=cfg.adjacency_dist)
        path = _partition_path(args.out, scene.scene_id)
        _save_partition(part, path)
        manifest.add_output(path)
        log.info("%s: K=%d", scene.scene_id, part.K)
    manifest.write(os.path.join(args.out, "manifest.json"))
    return 0


def cmd_center_train(args, cfg: EngineConfig) -> int:
    from .centerfield import (init_center_regressor, save_center_regressor,
                              train_center_regressor)
    from .synth import gen_center_training_set
    manifest = RunManifest("center-train", cfg, args.seed)
    manifest.start("synthesize")
    rng = np.random.default_rng(args.seed)
    samples = gen_center_training_set(args.n_samples, rng=rng)
    manifest.stop()
    manifest.start("train")
    params = init_center_regressor(rng)
    params, curve = train_center_regressor(samples, params,
                                           epochs=args.epochs, lr=args.lr)
    save_center_regressor(params, args.out)
    manifest.add_output(args.out)
    curve_path = args.out + ".loss.csv"
    with open(curve_path, "w", encoding="utf-8") as f:
        f.write("epoch,mse\n")
        for i, v in enumerate(curve):
            f.write(f"{i},{v}\n")
    manifest.add_output(curve_path)
    manifest.write(args.out + ".manifest.json")
    log.info("final mse %.6f (initial %.6f)", curve[-1], curve[0])
    return 0


def cmd_train(args, cfg: EngineConfig) -> int:
    from .encoder import init_point_encoder
    from .masks import PseudoMaskBank
    from .policy import init_merge_policy, init_seed_policy, save_policies
    from .ppo import train
    manifest = RunManifest("train", cfg, args.seed)
    manifest.start("prepare")
    scenes = _load_scenes(args.scenes)
    rng = np.random.default_rng([args.seed, 0xF0B])
    in_dim = 6 + (cfg.feature_spec_dim if args.oracle_features
                  else (scenes[0].feat_dim or cfg.feature_spec_dim))
    enc = init_point_encoder(in_dim, rng, hidden_dim=cfg.encoder_hidden,
                             out_dim=cfg.feature_dim)
    states = _prepare_states(scenes, cfg, enc, args.partitions,
                             center_ckpt=args.center_ckpt,
                             oracle_center=args.oracle_center or not args.center_ckpt,
                             oracle_features=args.oracle_features)
    seed_pp = init_seed_policy(cfg.feature_dim, rng,
                               hidden_dim=cfg.policy_hidden)
    merge_pp = init_merge_policy(cfg.feature_dim, rng,
                                 hidden_dim=cfg.policy_hidden)
    manifest.stop()
    manifest.start("train")
    os.makedirs(args.out, exist_ok=True)
    bank = PseudoMaskBank(dedupe_iou=cfg.dedupe_iou)
    seed_pp, merge_pp, metrics, bank = train(
        states, seed_pp, merge_pp, cfg.ppo, epochs=args.epochs,
        master_seed=args.seed, bank=bank)
    manifest.stop()
    manifest.start("write")
    ckpt = os.path.join(args.out, "policies.fobp")
    save_policies(seed_pp, merge_pp, ckpt)
    manifest.add_output(ckpt)
    metrics_path = os.path.join(args.out, "metrics.jsonl")
    with open(metrics_path, "w", encoding="utf-8") as f:
        for m in metrics:
            f.write(json.dumps(m) + "\n")
    manifest.add_output(metrics_path)
    for st in states:
        bank_path = os.path.join(args.out, f"{st.scene_id}.masks.json")
        bank.save(bank_path, st.scene_id)
        manifest.add_output(bank_path)
        cost_path = os.path.join(args.out, f"{st.scene_id}.costs.txt")
        st.bank.save(cost_path)
        manifest.add_output(cost_path)
    manifest.write(os.path.join(args.out, "manifest.json"))
    if metrics:
        log.info("trained %d epochs; final mean reward %.2f",
                 args.epochs, metrics[-1]["mean_episode_reward"])
    return 0


def cmd_discover(args, cfg: EngineConfig) -> int:
    from .discovery import discover_and_dedupe
    from .encoder import init_point_encoder
    from .policy import load_policies
    manifest = RunManifest("discover", cfg, args.seed)
    manifest.start("prepare")
    scenes = _load_scenes(args.scenes)
    seed_pp, merge_pp = load_policies(args.policies)
    rng = np.random.default_rng([args.seed, 0xF0B])
    in_dim = 6 + (cfg.feature_spec_dim if args.oracle_features
                  else (scenes[0].feat_dim or cfg.feature_spec_dim))
    enc = init_point_encoder(in_dim, rng, hidden_dim=cfg.encoder_hidden,
                             out_dim=cfg.feature_dim)
    states = _prepare_states(scenes, cfg, enc, args.partitions,
                             center_ckpt=args.center_ckpt,
                             oracle_center=args.oracle_center or not args.center_ckpt,
                             oracle_features=args.oracle_features)
    manifest.stop()
    manifest.start("rollouts")
    results = []
    for si, st in enumerate(states):
        masks = discover_and_dedupe(st, seed_pp, merge_pp, args.rollouts,
                                    cfg.ppo, np.random.default_rng([args.seed, si]),
                                    dedupe_iou=cfg.dedupe_iou)
        results.extend(masks)
        log.info("%s: %d masks", st.scene_id, len(masks))
    doc = [{"scene_id": m.scene_id, "point_indices": m.point_indices.tolist(),
            "score": m.score, "source": m.source} for m in results]
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    manifest.add_output(args.out)
    manifest.write(args.out + ".manifest.json")
    return 0


def _load_predictions(path: str):
    from .masks import MaskRecord
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    return [MaskRecord(scene_id=d["scene_id"],
                       point_indices=np.array(d["point_indices"]),
                       score=d["score"], source=d.get("source", ""))
            for d in doc]


def cmd_eval(args, cfg: EngineConfig) -> int:
    from .evalap import clean_pseudo_labels, evaluate_ap
    preds = _load_predictions(args.pred)
    scenes = _load_scenes(args.scenes)
    gt = {sc.scene_id: sc.gt_instances for sc in scenes}
    report = evaluate_ap(preds, gt).to_dict()
    if args.clean:
        cleaned = clean_pseudo_labels(preds, gt)
        cleaned_report = (evaluate_ap(cleaned, gt).to_dict() if cleaned
                          else {"ap": 0.0, "ap50": 0.0, "ap25": 0.0})
        report = {"raw": report, "cleaned": cleaned_report}
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
    if args.csv:
        flat = report["raw"] if args.clean else report
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write("ap,ap50,ap25\n")
            f.write(f"{flat['ap']},{flat['ap50']},{flat['ap25']}\n")
    log.info("eval written to %s", args.out)
    return 0


def cmd_stats(args, cfg: EngineConfig) -> int:
    from .evalap import discovery_stats
    from .masks import PseudoMaskBank
    bank = PseudoMaskBank(dedupe_iou=cfg.dedupe_iou)
    for name in sorted(os.listdir(args.banks)):
        if name.endswith(".masks.json"):
            bank.load(os.path.join(args.banks, name))
    scenes = _load_scenes(args.scenes)
    gt = {sc.scene_id: sc.gt_instances for sc in scenes}
    checkpoints = [int(c) for c in args.checkpoints.split(",")]
    stats = discovery_stats(bank.masks(), gt, checkpoints)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("checkpoint,n_objects,accuracy,n_new,accuracy_of_new\n")
        for row in stats.rows():
            f.write(f"{row['checkpoint']},{row['n_objects']},"
                    f"{row['accuracy']:.4f},{row['n_new']},"
                    f"{row['accuracy_of_new']:.4f}\n")
    log.info("stats written to %s", args.out)
    return 0


def cmd_export_ply(args, cfg: EngineConfig) -> int:
    preds = _load_predictions(args.pred)
    os.makedirs(args.out, exist_ok=True)
    for scene in _load_scenes(args.scenes):
        ids = np.full(scene.n_points, -1, dtype=np.int64)
        for mi, m in enumerate(p for p in preds if p.scene_id == scene.scene_id):
            ids[m.point_indices] = mi
        path = os.path.join(args.out, f"{scene.scene_id}.ply")
        export_ply(scene, ids, path)
        log.info("wrote %s", path)
    return 0


def cmd_benchmark(args, cfg: EngineConfig) -> int:
    from . import benchmark as bench
    from .evalap import clean_pseudo_labels, evaluate_ap
    seeds = ([int(s) for s in args.seeds.split(",")] if args.seeds
             else list(bench.MASTER_SEEDS))
    rows = []
    for ms in seeds:
        r = bench.run_benchmark(ms, epochs=args.epochs)
        first, last = bench.reward_trend(r["metrics"])
        cleaned = clean_pseudo_labels(r["predictions"], r["heldout_gt"])
        cleaned_ap = (evaluate_ap(cleaned, r["heldout_gt"]).ap50
                      if cleaned else 0.0)
        rows.append({"master_seed": ms, "trained_ap50": r["trained"].ap50,
                     "baseline_ap50": r["baseline"].ap50,
                     "trained_ap": r["trained"].ap,
                     "cleaned_ap50": cleaned_ap,
                     "reward_first": first, "reward_last": last})
        log.info("seed %d: trained AP@50 %.3f (baseline %.3f)", ms,
                 r["trained"].ap50, r["baseline"].ap50)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fobj",
        description="Label-free 3D object discovery on synthetic point clouds")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", default=None, help="key=value config file")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic scenes")
    p.add_argument("--spec", default=None, help="JSON scene-spec overrides")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("superpoints", help="partition scenes into superpoints")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_superpoints)

    p = sub.add_parser("center-train", help="train the center-field regressor")
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=32)
    p.add_argument("--epochs", type=int, default=150)
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_center_train)

    p = sub.add_parser("train", help="train the discovery agent with PPO")
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitions", default=None,
                   help="directory of precomputed partitions")
    p.add_argument("--center-ckpt", default=None)
    p.add_argument("--oracle-center", action="store_true", default=False,
                   help="use the ground-truth center field (default when no "
                        "checkpoint is given)")
    p.add_argument("--oracle-features", action="store_true", default=False,
                   help="regenerate synthetic semantic features")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("discover", help="inference rollouts with trained policies")
    p.add_argument("--scenes", required=True)
    p.add_argument("--policies", required=True)
    p.add_argument("--rollouts", type=int, default=32)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--partitions", default=None)
    p.add_argument("--center-ckpt", default=None)
    p.add_argument("--oracle-center", action="store_true", default=False)
    p.add_argument("--oracle-features", action="store_true", default=False)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("eval", help="class-agnostic AP report")
    p.add_argument("--pred", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--clean", action="store_true",
                   help="also report AP after ground-truth cleaning")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="discovery-dynamics statistics")
    p.add_argument("--banks", required=True)
    p.add_argument("--scenes", required=True)
    p.add_argument("--checkpoints", required=True, help="e.g. 50,100,150,200")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export-ply", help="colored PLY per scene")
    p.add_argument("--scenes", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_ply)

    p = sub.add_parser("benchmark", help="run the committed benchmark suite")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seeds", default=None, help="comma-separated master seeds")
    p.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError) as e:
        log.error("config error: %s", e)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except (SceneFormatError, FileNotFoundError, json.JSONDecodeError) as e:
        log.error("data error: %s", e)
        return EXIT_DATA
    except FloatingPointError as e:
        log.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except ValueError as e:
        log.error("invalid arguments: %s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
