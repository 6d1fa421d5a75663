import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from corrtensor import cli
from corrtensor.correntropy import CorrParams, corr_loss
from corrtensor.data_io import write_idx_images, write_idx_labels, write_pnm
from corrtensor.modelio import load_model

FAST = ["--max-iters", "50"]


def run(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def snapshot(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


COMMANDS = {
    "reconstruct": ["reconstruct", "--npc", "4,6,8", "--outliers", "dummy:6", "--trials", "2", "--save-models"],
    "classify": ["classify", "--k1", "4", "--train-per-class", "15", "--test-per-class", "10", "--trials", "2",
                 "--outliers", "magnitude:fraction=0.1,m=50", "--method", "2dsvd,corr-2dsvd,corr-tensor"],
    "cluster": ["cluster", "--k1", "4", "--synthetic-per-class", "15", "--alpha", "2,6", "--trials", "2",
                "--outliers", "dummy:4"],
    "loss-surface": ["loss-surface", "--grid-steps", "7"],
}


@pytest.mark.parametrize("task", sorted(COMMANDS))
def test_commands_are_deterministic(task, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*COMMANDS[task], "--out", a) == 0
    assert run(*COMMANDS[task], "--out", b) == 0
    sa, sb = snapshot(a), snapshot(b)
    assert sa == sb
    assert "manifest.json" in sa and not any(k.endswith(".partial") for k in sa)
    man = json.loads(sa["manifest.json"])
    assert man["config"]["task"] == task and "version" in man
    assert set(man["files"]) == set(sa) - {"manifest.json"}


def test_reconstruct_output(tmp_path):
    assert run("reconstruct", "--npc", "4,6,8,10", "--out", tmp_path, "--method", "2dsvd") == 0
    header, rows = read_csv(tmp_path / "reconstruct.csv")
    assert header == ["npc", "method", "alpha", "beta", "mean_error", "std"]
    errs = [float(r[4]) for r in rows]
    assert errs == sorted(errs, reverse=True)
    out = tmp_path / "dummy"
    assert run("reconstruct", "--npc", "8,10", "--outliers", "dummy:8", "--out", out) == 0
    _, rows = read_csv(out / "reconstruct.csv")
    by = {(r[1], r[0]): float(r[4]) for r in rows}
    for k in ("8", "10"):
        assert by[("corr-2dsvd", k)] < by[("2dsvd", k)]


def test_saved_models_load(tmp_path):
    assert run(*COMMANDS["reconstruct"], "--out", tmp_path) == 0
    m = load_model(tmp_path / "models" / "corr-2dsvd_a1.6_b0.8_p2_npc6.model")
    assert m.left.shape == (16, 6) and m.params == CorrParams(1.6, 0.8)


def test_classify_separable_synthetic(tmp_path):
    assert run("classify", "--k1", "4", "--train-per-class", "20", "--trials", "3", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "classify.json").read_text())
    names = [r["method"] for r in rep["results"]]
    assert names == ["2dsvd", "corr-2dsvd"]
    for r in rep["results"]:
        assert r["mean_accuracy"] == 1.0 and r["std_accuracy"] == 0.0
        assert len(r["trials"]) == 3
        t = r["trials"][0]
        assert set(t["per_class_accuracy"]) == {"0", "1"}
        assert np.asarray(t["confusion_matrix"]).sum() == rep["n_test"]
    assert rep["results"][1]["params"] == {"alpha": 4.0, "beta": 0.8, "p": 2.0}


def test_classify_idx_inputs(tmp_path, rng):
    x = np.concatenate([np.clip(0.2 + 0.05 * rng.normal(size=(20, 6, 6)), 0, 1),
                        np.clip(0.8 + 0.05 * rng.normal(size=(20, 6, 6)), 0, 1)])
    write_idx_images(tmp_path / "img.idx", x)
    write_idx_labels(tmp_path / "lab.idx", np.repeat([3, 7], 20))
    out = tmp_path / "o"
    assert run("classify", "--data", tmp_path / "img.idx", "--labels", tmp_path / "lab.idx", "--k1", "3",
               "--train-per-class", "10", "--test-per-class", "5", "--normalize", "unit", "--out", out) == 0
    rep = json.loads((out / "classify.json").read_text())
    assert rep["classes"] == [3, 7] and rep["n_test"] == 10


def test_cluster_outputs(tmp_path):
    assert run(*COMMANDS["cluster"], "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "cluster.json").read_text())
    assert rep["clusters"] == 3
    n = 45
    for name in ("2dsvd", "corr-2dsvd_a2_b0.8_p2", "corr-2dsvd_a6_b0.8_p2"):
        header, rows = read_csv(tmp_path / f"decision_graph_{name}.csv")
        assert header == ["index", "rho", "delta", "selected"] and len(rows) == n
        assert sum(int(r[3]) for r in rows) == 3
        _, sim = read_csv(tmp_path / f"similarity_{name}.csv")
        s = np.asarray(sim, dtype=float)
        assert s.shape == (n, n)
        np.testing.assert_array_equal(np.diag(s), 1.0)
    header, rows = read_csv(tmp_path / "alpha_sweep_corr-2dsvd_b0.8.csv")
    assert header == ["alpha", "ac", "nmi"] and [r[0] for r in rows] == ["2.0", "6.0"]
    assert all(r["ac_mean"] == 1.0 and r["nmi_mean"] == 1.0 for r in rep["results"])


def test_loss_surface_values(tmp_path):
    assert run("loss-surface", "--grid-steps", "7", "--out", tmp_path) == 0
    for a in (1, 2, 5):
        header, rows = read_csv(tmp_path / f"loss_surface_a{a}_b0.8.csv")
        assert header == ["a1", "a2", "loss"] and len(rows) == 49
        table = {(float(r[0]), float(r[1])): float(r[2]) for r in rows}
        assert table[(0.0, 0.0)] == 0.0
        for (a1, a2), v in table.items():
            assert table[(-a1, -a2)] == v
    p = CorrParams(2, 0.8)
    _, rows = read_csv(tmp_path / "loss_surface_a2_b0.8.csv")
    for r in rows:
        a1, a2, v = map(float, r)
        assert v == pytest.approx(corr_loss([np.hypot(a1, a2)], p), rel=1e-13, abs=1e-300)
        assert v == pytest.approx(p.gamma * (1 - np.exp(-p.lam * (a1 * a1 + a2 * a2))), rel=1e-12, abs=1e-300)


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": [1.0, 3.0], "beta": 0.5, "grid-steps": 5}))
    out = tmp_path / "o"
    assert run("loss-surface", "--config", cfg, "--beta", "0.9", "--out", out) == 0
    man = json.loads((out / "manifest.json").read_text())["config"]
    assert man["alpha"] == [1.0, 3.0] and man["beta"] == [0.9] and man["grid_steps"] == 5
    assert (out / "loss_surface_a3_b0.9.csv").exists()


def test_exit_codes(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("reconstruct", "--method", "pca", "--out", out) == 1
    assert run("reconstruct", "--alpha", "-1", "--out", out) == 1
    assert run("reconstruct", "--npc", "40", "--out", out) == 1
    assert run("reconstruct", "--bogus", "--out", out) == 1
    assert run("classify", "--outliers", "swap:1", "--out", out) == 1
    assert run("classify", "--train-per-class", "500", "--out", out) == 1
    bad = tmp_path / "c.json"
    bad.write_text('{"nonsense": 1}')
    assert run("loss-surface", "--config", bad, "--out", out) == 1
    assert run("reconstruct", "--data", tmp_path / "missing.idx", "--out", out) == 2
    (tmp_path / "junk.idx").write_bytes(b"\x00\x00\x08\x03\x00")
    assert run("reconstruct", "--data", tmp_path / "junk.idx", "--out", out) == 2
    assert run("loss-surface", "--config", tmp_path / "nope.json", "--out", out) == 2
    capsys.readouterr()


def test_numerical_failure_leaves_no_final_outputs(tmp_path, capsys):
    faces = tmp_path / "faces"
    faces.mkdir()
    for i in range(6):
        write_pnm(faces / f"s{i % 2}_{i}.pgm", np.full((5, 5), 0.5))
    out = tmp_path / "o"
    code = run("cluster", "--data", faces, "--labels", "prefix", "--k1", "2", "--method", "2dsvd", "--out", out)
    assert code == 3
    assert not (out / "manifest.json").exists() and not (out / "cluster.json").exists()
    assert "numerical failure" in capsys.readouterr().err


def test_color_data_needs_tensor_method(tmp_path, capsys):
    out = tmp_path / "o"
    args = ["reconstruct", "--synthetic-shape", "8x8x3", "--synthetic-ranks", "2x2x1", "--npc", "2,4",
            "--outliers", "dummy:2", "--synthetic-per-class", "10", "--out", out]
    assert run(*args) == 1
    assert run(*args, "--method", "corr-tensor", "--k3", "1") == 0
    _, rows = read_csv(out / "reconstruct.csv")
    assert [r[1] for r in rows] == ["corr-tensor", "corr-tensor"]
    capsys.readouterr()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "corrtensor", "loss-surface", "--grid-steps", "3", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "loss_surface_a5_b0.8.csv").exists()
    res = subprocess.run([sys.executable, "-m", "corrtensor", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "corrtensor" in res.stdout
