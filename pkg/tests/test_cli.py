import json
import subprocess
import sys

import numpy as np
import pytest

from voxelopt.cli import main
from voxelopt.io import read_feat, read_nifti, write_nifti


def run(*argv):
    return main([str(a) for a in argv])


def report(path):
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def pair(tmp_path_factory):
    d = tmp_path_factory.mktemp("pair")
    assert run("synth", "--out-fixed", d / "f.nii.gz", "--out-moving", d / "m.nii.gz",
               "--out-truth", d / "t.nii.gz", "--out-fixed-labels", d / "fl.nii.gz",
               "--out-moving-labels", d / "ml.nii.gz", "--kind", "smooth", "--magnitude", 3,
               "--size", 24, "--seed", 4) == 0
    return d


def test_synth_report_echoes_seed(pair):
    rep = report(pair / "f.report.json")
    assert rep["command"] == "synth" and rep["seed"] == 4 and rep["kind"] == "smooth"
    assert read_nifti(pair / "t.nii.gz").is_vector
    assert read_nifti(pair / "fl.nii.gz").is_integer


def test_self_registration(pair, tmp_path):
    out = tmp_path / "u.nii.gz"
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "f.nii.gz",
               "--out-field", out, "--levels", 3) == 0
    rep = report(tmp_path / "u.report.json")
    assert rep["metrics"]["max_abs_displacement"] < 0.1
    assert rep["config"]["levels"] == 3 and rep["config"]["alpha"] == 1.5
    assert "solve_ms" in rep["timings"] and rep["outputs"]["field"] == str(out)
    assert read_nifti(out).data.shape == (24, 24, 24, 3)


def test_no_adaptive_changes_field(pair, tmp_path):
    base = ["register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz", "--levels", 3]
    assert run(*base, "--out-field", tmp_path / "a.nii") == 0
    assert run(*base, "--out-field", tmp_path / "b.nii", "--no-adaptive") == 0
    assert run(*base, "--out-field", tmp_path / "c.nii", "--no-prefilter", "--k", 2, "--iters", 3) == 0
    a, b, c = (read_nifti(tmp_path / n).data for n in ("a.nii", "b.nii", "c.nii"))
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    rep = report(tmp_path / "c.report.json")
    assert rep["config"]["k"] == 2 and len(rep["config"]["thetas"]) == 3
    assert rep["config"]["prefilter"] is False


def test_missing_fixed_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        run("register", "--moving", "m.nii", "--out-field", tmp_path / "u.nii")
    assert info.value.code != 0
    assert "--fixed" in capsys.readouterr().err


def test_missing_file_exits_nonzero_without_report(tmp_path, capsys):
    assert run("register", "--fixed", tmp_path / "nope.nii", "--moving", tmp_path / "nope.nii",
               "--out-field", tmp_path / "u.nii") == 1
    assert "nope.nii" in capsys.readouterr().err
    assert not (tmp_path / "u.report.json").exists()


def test_bad_config_key_is_named(pair, tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"levels": 0}')
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--out-field", tmp_path / "u.nii", "--config", tmp_path / "c.json") == 1
    assert "levels" in capsys.readouterr().err


def test_metrics_identity(pair, tmp_path):
    write_nifti(np.zeros((24, 24, 24, 3), np.float32), tmp_path / "zero.nii")
    assert run("metrics", "--fixed-labels", pair / "fl.nii.gz", "--moving-labels", pair / "fl.nii.gz",
               "--field", tmp_path / "zero.nii", "--out-report", tmp_path / "r.json") == 0
    m = report(tmp_path / "r.json")["metrics"]
    assert m["dice"]["mean"] == 1.0 and m["hd95_mm"]["mean"] == 0.0
    assert m["sdlogj"] == 0.0 and m["fold_fraction"] == 0.0


def test_warp_zero_field_is_identity(pair, tmp_path):
    write_nifti(np.zeros((24, 24, 24, 3), np.float32), tmp_path / "zero.nii")
    for interp, src in (("trilinear", "f.nii.gz"), ("nearest", "ml.nii.gz")):
        out = tmp_path / f"{interp}.nii.gz"
        assert run("warp", "--in", pair / src, "--field", tmp_path / "zero.nii", "--out", out,
                   "--interp", interp) == 0
        np.testing.assert_array_equal(read_nifti(out).data, read_nifti(pair / src).data)
        assert report(tmp_path / f"{interp}.report.json")["interp"] == interp


def test_warp_rejects_mismatched_field(pair, tmp_path):
    write_nifti(np.zeros((8, 8, 8, 3), np.float32), tmp_path / "small.nii")
    assert run("warp", "--in", pair / "f.nii.gz", "--field", tmp_path / "small.nii",
               "--out", tmp_path / "o.nii") == 1


def test_features_command(pair, tmp_path):
    assert run("features", "--in", pair / "f.nii.gz", "--mode", "mind", "--out", tmp_path / "m.voxf") == 0
    assert read_feat(tmp_path / "m.voxf").data.shape == (24, 24, 24, 6)
    assert report(tmp_path / "m.report.json")["channels"] == 6
    assert run("features", "--in", pair / "f.nii.gz", "--no-window", "--out", tmp_path / "r.voxf") == 0
    raw = read_feat(tmp_path / "r.voxf").data
    assert raw.shape[-1] == 1 and raw.min() == 0.0 and raw.max() == 1.0


def test_external_features(pair, tmp_path):
    for n in ("f", "m"):
        assert run("features", "--in", pair / f"{n}.nii.gz", "--mode", "mind",
                   "--out", tmp_path / f"{n}.voxf") == 0
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--fixed-feat", tmp_path / "f.voxf", "--moving-feat", tmp_path / "m.voxf",
               "--out-field", tmp_path / "u.nii", "--levels", 3) == 0
    assert report(tmp_path / "u.report.json")["config"]["feature_mode"] == "external"
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--fixed-feat", tmp_path / "f.voxf", "--out-field", tmp_path / "v.nii") == 1


def test_dump_entropy(pair, tmp_path):
    dump = tmp_path / "maps"
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--out-field", tmp_path / "u.nii", "--levels", 2, "--dump-entropy", dump) == 0
    e0 = read_nifti(dump / "entropy_level0.nii.gz")
    s1 = read_nifti(dump / "sigma_level1.nii.gz")
    assert e0.data.shape == (24, 24, 24) and s1.data.shape == (12, 12, 12)
    assert s1.spacing == (2.0, 2.0, 2.0)
    assert 0 <= e0.data.min() and e0.data.max() <= np.log(27) + 1e-6
    assert s1.data.max() <= 1.5 * np.log(2) + 1e-6


def test_byte_identical_reruns(tmp_path):
    for tag in ("a", "b"):
        assert run("synth", "--out-fixed", tmp_path / f"f{tag}.nii.gz",
                   "--out-moving", tmp_path / f"m{tag}.nii.gz", "--out-truth", tmp_path / f"t{tag}.nii.gz",
                   "--size", 16, "--magnitude", 2, "--seed", 9) == 0
        assert run("register", "--fixed", tmp_path / f"f{tag}.nii.gz", "--moving", tmp_path / f"m{tag}.nii.gz",
                   "--out-field", tmp_path / f"u{tag}.nii.gz", "--levels", 2) == 0
    for n in ("f", "m", "t", "u"):
        assert (tmp_path / f"{n}a.nii.gz").read_bytes() == (tmp_path / f"{n}b.nii.gz").read_bytes()


def test_thread_variable(pair, tmp_path, monkeypatch):
    monkeypatch.setenv("VOXELOPT_THREADS", "2")
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--out-field", tmp_path / "u2.nii", "--levels", 3) == 0
    assert report(tmp_path / "u2.report.json")["threads"] == 2
    monkeypatch.setenv("VOXELOPT_THREADS", "1")
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--out-field", tmp_path / "u1.nii", "--levels", 3) == 0
    assert (tmp_path / "u1.nii").read_bytes() == (tmp_path / "u2.nii").read_bytes()
    monkeypatch.setenv("VOXELOPT_THREADS", "lots")
    assert run("register", "--fixed", pair / "f.nii.gz", "--moving", pair / "m.nii.gz",
               "--out-field", tmp_path / "u3.nii") == 1


def test_synth_register_metrics_chain(tmp_path):
    d = tmp_path
    assert run("synth", "--out-fixed", d / "f.nii.gz", "--out-moving", d / "m.nii.gz",
               "--out-truth", d / "t.nii.gz", "--out-fixed-labels", d / "fl.nii.gz",
               "--out-moving-labels", d / "ml.nii.gz", "--kind", "translation",
               "--magnitude", 8, "--seed", 0) == 0
    assert run("register", "--fixed", d / "f.nii.gz", "--moving", d / "m.nii.gz",
               "--out-field", d / "u.nii.gz", "--levels", 4) == 0
    assert run("metrics", "--fixed-labels", d / "fl.nii.gz", "--moving-labels", d / "ml.nii.gz",
               "--field", d / "u.nii.gz", "--truth-field", d / "t.nii.gz",
               "--out-report", d / "r.json") == 0
    m = report(d / "r.json")["metrics"]
    assert m["endpoint_error"]["reduction"] >= 0.8
    assert m["fold_fraction"] == 0.0 and m["dice"]["mean"] > 0.8


def test_module_entry_point(tmp_path):
    argv = [sys.executable, "-m", "voxelopt.cli", "synth", "--size", "8", "--magnitude", "1"]
    for flag, name in (("--out-fixed", "f.nii"), ("--out-moving", "m.nii"), ("--out-truth", "t.nii")):
        argv += [flag, str(tmp_path / name)]
    proc = subprocess.run(argv, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "f.report.json").exists()
