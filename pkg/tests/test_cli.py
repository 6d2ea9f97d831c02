import json
import os
import subprocess
import sys

import pytest

from slicecluster.cli import main
from slicecluster.config import PipelineConfig, preset
from slicecluster.voxelcore import load_volume


def run(*argv):
    return main(list(argv) + ["--quiet"])


def small_config(tmp_path, **changes):
    cfg = preset("data2").with_overrides(**changes)
    path = tmp_path / "cfg.json"
    cfg.save(path)
    return str(path)


def read(path):
    return json.loads(path.read_text())


def test_config_round_trip(tmp_path):
    cfg = preset("data1").with_overrides(seed=3)
    cfg.save(tmp_path / "c.json")
    assert PipelineConfig.load(tmp_path / "c.json") == cfg
    with pytest.raises(ValueError):
        preset("nope")


def test_synth_data_one_regime(tmp_path):
    assert run("synth", "--preset", "data1", "--out", str(tmp_path), "--seed", "0") == 0
    assert read(tmp_path / "ground_truth.json")["count"] == 400
    vol = load_volume(tmp_path / "volume.raw")
    assert vol.dims.shape == (128, 128, 128)
    assert vol.n_labels == 400


def test_synth_zero_nuclei(tmp_path):
    cfg = preset("data2")
    cfg = cfg.with_overrides(synth=cfg.synth.__class__(cfg.synth.dims, 0, cfg.synth.semi_axis_range))
    cfg.save(tmp_path / "c.json")
    assert run("synth", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")) == 0
    assert read(tmp_path / "o" / "ground_truth.json") == {"count": 0, "nuclei": []}
    assert not load_volume(tmp_path / "o" / "volume.raw").labels.any()


def test_unwritable_output_fails_before_compute(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("synth", "--out", str(blocker / "sub")) == 1
    assert "[synth]" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text("{not json")
    assert run("synth", "--config", str(tmp_path / "c.json")) == 2
    assert run("synth", "--axes", "w") == 2
    assert "error [config]" in capsys.readouterr().err


def test_detect_zero_noise_matches_gt_export(tmp_path):
    out = str(tmp_path)
    assert run("synth", "--out", out, "--seed", "1") == 0
    assert run("detect", "--out", out, "--seed", "1") == 0
    for a in "xyz":
        det = (tmp_path / f"detections_{a}.jsonl").read_bytes()
        assert det and det == (tmp_path / f"gt_boxes_{a}.jsonl").read_bytes()


def test_detect_full_miss_gives_empty_files(tmp_path):
    cfg = preset("data2")
    cfg = cfg.with_overrides(noise=cfg.noise.__class__(p_miss=1.0), axes="z")
    cfg.save(tmp_path / "c.json")
    c = str(tmp_path / "c.json")
    assert run("synth", "--config", c, "--out", str(tmp_path)) == 0
    assert run("detect", "--config", c, "--out", str(tmp_path)) == 0
    assert (tmp_path / "detections_z.jsonl").read_text() == ""
    assert not (tmp_path / "detections_x.jsonl").exists()


def test_cluster_errors(tmp_path, capsys):
    f = tmp_path / "one.jsonl"
    f.write_text('{"axis":"z","slice":0,"box":[0,0,1,1],"score":1.0}\n')
    assert run("cluster", "--out", str(tmp_path), "--detections", str(f)) == 1
    err = capsys.readouterr().err
    assert "[cluster]" in err and "axis z" in err
    assert run("cluster", "--out", str(tmp_path), "--detections", str(tmp_path / "missing.jsonl")) == 1
    assert "missing.jsonl" in capsys.readouterr().err


def test_fuse_missing_file_names_path(tmp_path, capsys):
    assert run("fuse", "--out", str(tmp_path), "--clusters", str(tmp_path / "nope.json")) == 1
    assert "nope.json" in capsys.readouterr().err


def test_eval_identical_and_empty(tmp_path):
    out = str(tmp_path)
    assert run("synth", "--out", out, "--seed", "2") == 0
    gt = read(tmp_path / "ground_truth.json")
    cents = [n["centroid"] for n in gt["nuclei"]]
    (tmp_path / "same.json").write_text(json.dumps({"k": len(cents), "centroids": cents}))
    (tmp_path / "empty.json").write_text(json.dumps({"k": 0, "centroids": []}))
    assert run("eval", "--out", out, "--fusion", str(tmp_path / "same.json"), "--gt", str(tmp_path / "ground_truth.json")) == 0
    rep = read(tmp_path / "eval.json")
    assert rep["mape"] == 0.0 and rep["map"] == 1.0
    assert run("eval", "--out", out, "--fusion", str(tmp_path / "empty.json"), "--gt", str(tmp_path / "ground_truth.json")) == 0
    rep = read(tmp_path / "eval.json")
    assert all(v == 0.0 for v in rep["per_volume"][0]["recall"].values())


def test_eval_uses_config_thresholds(tmp_path):
    c = small_config(tmp_path, t_dist=(4, 5, 6, 7, 8))
    assert run("synth", "--config", c, "--out", str(tmp_path), "--seed", "2") == 0
    g = str(tmp_path / "ground_truth.json")
    assert run("eval", "--config", c, "--out", str(tmp_path), "--fusion", g.replace("ground_truth", "x"), "--gt", g) == 1
    gt = read(tmp_path / "ground_truth.json")
    (tmp_path / "f.json").write_text(json.dumps({"k": 1, "centroids": [gt["nuclei"][0]["centroid"]]}))
    assert run("eval", "--config", c, "--out", str(tmp_path), "--fusion", str(tmp_path / "f.json"), "--gt", g) == 0
    assert sorted(read(tmp_path / "eval.json")["ap"]) == ["4", "5", "6", "7", "8"]


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("runs")
    for name in ("a", "b"):
        assert main(["pipeline", "--out", str(base / name), "--seed", "5", "--quiet"]) == 0
    return base


ARTIFACTS = [
    "volume.raw", "volume.json", "ground_truth.json",
    "detections_x.jsonl", "detections_y.jsonl", "detections_z.jsonl",
    "cluster_x.json", "cluster_y.json", "cluster_z.json", "fusion.json", "eval.json",
]


def test_pipeline_manifest(pipeline_runs):
    out = pipeline_runs / "a"
    m = read(out / "manifest.json")
    assert m["stages"]["cluster"]["k_range"] == [2, 80]
    assert set(m["stages"]) == {"synth", "detect", "cluster", "fuse", "eval"}
    for entry in m["stages"].values():
        for p in entry["outputs"]:
            assert (out / p).exists()
    assert m["config"]["seed"] == 5
    rep = read(out / "eval.json")
    assert rep["mape"] == 0.0


def test_pipeline_is_deterministic(pipeline_runs):
    a, b = pipeline_runs / "a", pipeline_runs / "b"
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    ma, mb = read(a / "manifest.json"), read(b / "manifest.json")
    ma.pop("timings"), mb.pop("timings")
    assert ma == mb


def test_stage_isolation(pipeline_runs, tmp_path):
    out = str(tmp_path)
    for cmd in ("synth", "detect", "cluster", "fuse", "eval"):
        assert run(cmd, "--out", out, "--seed", "5") == 0
    for name in ARTIFACTS:
        assert (tmp_path / name).read_bytes() == (pipeline_runs / "a" / name).read_bytes(), name


def test_thin_volume_z_only_pass_through(tmp_path):
    assert run("pipeline", "--preset", "thin", "--out", str(tmp_path), "--seed", "0") == 0
    assert load_volume(tmp_path / "volume.raw").dims.shape == (128, 128, 19)
    fusion, cluster = read(tmp_path / "fusion.json"), read(tmp_path / "cluster_z.json")
    assert fusion["centroids"] == cluster["centroids"]
    assert all(s == ["z"] for s in fusion["support"])
    assert not (tmp_path / "cluster_x.json").exists()


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "slicecluster", "synth", "--out", str(tmp_path), "--quiet"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "volume.raw").exists()
