import json
import os

import numpy as np
import pytest

from fobj.cli import main
from fobj.sceneio import load_scene


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A small end-to-end CLI workspace: scenes, partitions, training run."""
    root = tmp_path_factory.mktemp("cli")
    scenes = str(root / "scenes")
    spec = {"room": [3.5, 3.5, 1.6], "n_objects": [2, 3], "density": 150.0,
            "background_patch": 1.0}
    spec_path = str(root / "spec.json")
    with open(spec_path, "w") as f:
        json.dump(spec, f)
    cfg_path = str(root / "run.cfg")
    with open(cfg_path, "w") as f:
        f.write("k_f = 0.3\nmin_size = 15\nlr = 0.003\n")
    assert main(["gen", "--spec", spec_path, "--out", scenes, "--n", "3",
                 "--seed", "5"]) == 0
    parts = str(root / "parts")
    assert main(["--config", cfg_path, "superpoints", "--scenes", scenes,
                 "--out", parts]) == 0
    return {"root": root, "scenes": scenes, "parts": parts, "cfg": cfg_path}


def test_gen_outputs(workdir):
    names = sorted(os.listdir(workdir["scenes"]))
    fobjs = [n for n in names if n.endswith(".fobj")]
    assert len(fobjs) == 3
    assert "manifest.json" in names
    scene = load_scene(os.path.join(workdir["scenes"], fobjs[0]))
    assert scene.n_points > 100
    assert scene.semantic_features is not None
    doc = json.load(open(os.path.join(workdir["scenes"], "manifest.json")))
    assert doc["master_seed"] == 5 and doc["command"] == "gen"


def test_superpoints_outputs(workdir):
    parts = [n for n in os.listdir(workdir["parts"])
             if n.endswith(".partition.npz")]
    assert len(parts) == 3
    with np.load(os.path.join(workdir["parts"], parts[0])) as z:
        K = int(z["K"])
        assert z["adjacency"].shape == (K, K)


def test_train_discover_eval_stats_ply(workdir):
    root = workdir["root"]
    out = str(root / "train")
    rc = main(["--config", workdir["cfg"], "train", "--scenes",
               workdir["scenes"], "--out", out, "--epochs", "3",
               "--seed", "1", "--partitions", workdir["parts"],
               "--oracle-center"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "policies.fobp"))
    metrics = [json.loads(l) for l in open(os.path.join(out, "metrics.jsonl"))]
    assert len(metrics) == 3

    pred = str(root / "pred.json")
    rc = main(["--config", workdir["cfg"], "discover", "--scenes",
               workdir["scenes"], "--policies",
               os.path.join(out, "policies.fobp"), "--rollouts", "4",
               "--out", pred, "--seed", "2", "--partitions",
               workdir["parts"], "--oracle-center"])
    assert rc == 0
    preds = json.load(open(pred))

    report_path = str(root / "eval.json")
    csv_path = str(root / "eval.csv")
    rc = main(["eval", "--pred", pred, "--scenes", workdir["scenes"],
               "--out", report_path, "--clean", "--csv", csv_path])
    assert rc == 0
    report = json.load(open(report_path))
    assert {"raw", "cleaned"} <= set(report)
    assert 0.0 <= report["raw"]["ap50"] <= 1.0
    assert report["cleaned"]["ap50"] >= 0.0
    header, row = open(csv_path).read().strip().splitlines()
    assert header == "ap,ap50,ap25" and len(row.split(",")) == 3

    stats_path = str(root / "stats.csv")
    rc = main(["stats", "--banks", out, "--scenes", workdir["scenes"],
               "--checkpoints", "1,2,3", "--out", stats_path])
    assert rc == 0
    lines = open(stats_path).read().strip().splitlines()
    assert lines[0].startswith("checkpoint,")
    assert len(lines) == 4

    ply_dir = str(root / "ply")
    rc = main(["export-ply", "--scenes", workdir["scenes"], "--pred", pred,
               "--out", ply_dir])
    assert rc == 0
    assert len([n for n in os.listdir(ply_dir) if n.endswith(".ply")]) == 3


def test_train_zero_epochs_keeps_initialization(workdir, tmp_path):
    from fobj.policy import load_policies, init_seed_policy, init_merge_policy
    out = str(tmp_path / "t0")
    rc = main(["--config", workdir["cfg"], "train", "--scenes",
               workdir["scenes"], "--out", out, "--epochs", "0",
               "--seed", "9", "--partitions", workdir["parts"]])
    assert rc == 0
    seed_pp, merge_pp = load_policies(os.path.join(out, "policies.fobp"))
    rng = np.random.default_rng([9, 0xF0B])
    from fobj.encoder import init_point_encoder
    from fobj.config import load_config
    cfg = load_config(workdir["cfg"])
    init_point_encoder(6 + cfg.feature_spec_dim, rng,
                       hidden_dim=cfg.encoder_hidden, out_dim=cfg.feature_dim)
    ref_seed = init_seed_policy(cfg.feature_dim, rng,
                                hidden_dim=cfg.policy_hidden)
    for a, b in zip(seed_pp.tensors(), ref_seed.tensors()):
        assert np.allclose(a.data, b.data)


def test_bad_scene_dir_exit_code(tmp_path):
    assert main(["superpoints", "--scenes", str(tmp_path),
                 "--out", str(tmp_path / "o")]) == 3


def test_bad_config_exit_code(tmp_path):
    bad = str(tmp_path / "bad.cfg")
    with open(bad, "w") as f:
        f.write("nonsense_key = 1\n")
    assert main(["--config", bad, "gen", "--out", str(tmp_path / "s"),
                 "--n", "1"]) == 2


def test_usage_error_exit_code():
    assert main(["definitely-not-a-command"]) == 2
