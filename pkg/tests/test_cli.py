import filecmp
import json
import os

import numpy as np
import pytest

from loopcmc.cli import main
from loopcmc.io import FIELD_COLUMNS, read_fields_csv, read_obj
from loopcmc.potentials import BUILTIN_NAMES


def write_config(path, **cfg):
    with open(path, "w") as fh:
        json.dump(cfg, fh)
    return str(path)


CYL = {"potential": {"kind": "builtin", "name": "hyperbolic_cylinder"}, "grid": [-1, 1, -1, 1, 33, 33]}


@pytest.fixture(scope="module")
def cylinder_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("cyl")
    cfg = write_config(d / "c.json", **CYL)
    assert main(["run", "--config", cfg, "--output-dir", str(d / "out"), "--quiet"]) == 0
    return d / "out"


def test_list_examples(capsys):
    assert main(["list-examples", "--quiet"]) == 0
    assert capsys.readouterr().out.split() == list(BUILTIN_NAMES)


def test_factorize_identity(tmp_path, capsys):
    p = tmp_path / "one.txt"
    p.write_text("0 1 0 0 1\n")
    assert main(["factorize-demo", str(p), "--truncation", "3"]) == 0
    out = capsys.readouterr().out
    blocks = out.split("# complement_factor")
    for block in blocks:
        rows = [r.split() for r in block.splitlines() if r and not r.startswith("#")]
        for k, *vals in rows:
            expected = [1.0, 0.0, 0.0, 1.0] if int(k) == 0 else [0.0] * 4
            assert [float(v) for v in vals] == expected
    assert "# residual 0.0" in out


def test_factorize_witness_and_garbage(tmp_path):
    p = tmp_path / "w.txt"
    p.write_text("2 1 0 0 0\n-2 0 0 0 1\n")
    assert main(["factorize-demo", str(p)]) == 3
    p.write_text("not a loop\n")
    assert main(["factorize-demo", str(p)]) == 2


@pytest.mark.parametrize("cfg", [
    dict(CYL, grid=[-1, 1, -1, 1, 0, 0]),
    dict(CYL, typo=1),
    dict(CYL, grid=[0.5, 1, -1, 1, 5, 5]),
    dict(CYL, truncation=2),
    dict(CYL, lambdas=[-1.0]),
    {"grid": [-1, 1, -1, 1, 5, 5]},
    {"potential": {"kind": "normalized", "H": 0.5, "Q": 1, "R": 1, "bogus": 0}},
])
def test_config_errors(tmp_path, cfg):
    assert main(["run", "--config", write_config(tmp_path / "c.json", **cfg), "--quiet"]) == 2


def test_missing_config_and_bad_command(tmp_path):
    assert main(["run", "--quiet"]) == 2
    assert main(["run", "--config", str(tmp_path / "absent.json"), "--quiet"]) == 2
    assert main(["frobnicate"]) == 2


def test_run_outputs(cylinder_run):
    names = set(os.listdir(cylinder_run))
    assert {"surface_lam1.obj", "fields_lam1.csv", "report_lam1.json", "surface_lam1.png", "fields_lam1.png",
            "frame_field.npz"} <= names
    with open(cylinder_run / "fields_lam1.csv") as fh:
        assert fh.readline().strip() == ",".join(FIELD_COLUMNS)
    report = json.loads((cylinder_run / "report_lam1.json").read_text())
    assert report["residuals"]["sinh"]["max"] <= 1e-3
    assert report["classification"]["dominant"] == "H+"
    assert report["failure_fraction"] == 0.0
    for key in ("max", "mean", "argmax"):
        assert key in report["residuals"]["gauss_general"]
    assert "tail_loss" in report


def test_mesh_round_trip(cylinder_run):
    verts, normals, faces, grid = read_obj(cylinder_run / "surface_lam1.obj")
    cols = read_fields_csv(cylinder_run / "fields_lam1.csv")
    assert grid.shape == (33, 33) and len(faces) == 32 * 32
    csv_pts = np.stack([cols["u1"], cols["u2"], cols["u3"]], axis=-1)
    assert np.abs(verts - csv_pts).max() <= 1e-12
    assert np.abs(normals - np.stack([cols["n1"], cols["n2"], cols["n3"]], axis=-1)).max() <= 1e-12


def test_verify(cylinder_run, tmp_path, capsys):
    rc = main(["verify", "--mesh", str(cylinder_run / "surface_lam1.obj"),
               "--fields", str(cylinder_run / "fields_lam1.csv"), "--output-dir", str(tmp_path)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    H = report["measured"]["H"]
    assert abs(H["min"] - 0.5) <= 1e-3 and abs(H["max_signed"] - 0.5) <= 1e-3
    # re-measuring the exported mesh reproduces the exported fields exactly
    again = read_fields_csv(tmp_path / "verified_fields.csv")
    orig = read_fields_csv(cylinder_run / "fields_lam1.csv")
    for name in FIELD_COLUMNS:
        a, b = again[name], orig[name]
        same = np.isfinite(a) == np.isfinite(b)
        assert same.all()
        assert np.abs(a[np.isfinite(a)] - b[np.isfinite(b)]).max(initial=0.0) <= 1e-12


def test_verify_rejects_bad_csv(cylinder_run, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,0\n")
    assert main(["verify", "--mesh", str(cylinder_run / "surface_lam1.obj"), "--fields", str(bad)]) == 2


def test_extract(cylinder_run, tmp_path):
    out = tmp_path / "pot.csv"
    assert main(["extract", "--frame-field", str(cylinder_run / "frame_field.npz"), "--output", str(out),
                 "--quiet"]) == 0
    rows = [r.split(",") for r in out.read_text().splitlines()[1:]]
    xs = [r for r in rows if r[0] == "x"]
    assert len(xs) == 33
    for r in xs:
        assert r[2] == "1"
        assert np.allclose([float(v) for v in r[3:]], [0, -0.25, -0.25, 0], atol=1e-6)


def test_dalembert_cosh_run(tmp_path):
    cfg = write_config(tmp_path / "c.json", potential={"kind": "dalembert", "H": 0.5, "epsilon": -1},
                       grid=[-0.5, 0.5, -0.5, 0.5, 33, 33], report={"figures": False})
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--quiet"]) == 0
    report = json.loads((tmp_path / "o" / "report_lam1.json").read_text())
    assert report["classification"]["dominant"] == "H-"
    assert report["residuals"]["cosh"]["applicable"]
    assert report["residuals"]["cosh"]["max"] <= 1e-3


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path / "c.json", potential={"kind": "builtin", "name": "circular_cylinder"},
                       report={"figures": False})
    rc = main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--grid=-0.5,0.5,-0.5,0.5,9,9",
               "--lambda", "0.5", "--lambda", "2", "--truncation", "12", "--substeps", "4", "--quiet"])
    assert rc == 0
    names = os.listdir(tmp_path / "o")
    assert "report_lam0.5.json" in names and "report_lam2.json" in names
    report = json.loads((tmp_path / "o" / "report_lam2.json").read_text())
    assert report["grid"] == [-0.5, 0.5, -0.5, 0.5, 9, 9]
    assert report["truncation"] == 12 and report["substeps"] == 4


def test_run_is_deterministic(tmp_path, cylinder_run):
    cfg = write_config(tmp_path / "c.json", **CYL)
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "again"), "--quiet"]) == 0
    names = sorted(os.listdir(cylinder_run))
    assert names == sorted(os.listdir(tmp_path / "again"))
    match, mismatch, errors = filecmp.cmpfiles(cylinder_run, tmp_path / "again", names, shallow=False)
    assert mismatch == [] and errors == []


def test_truncation_overflow_is_fatal(tmp_path):
    cfg = write_config(tmp_path / "c.json", potential={"kind": "builtin", "name": "hyperbolic_cylinder"},
                       grid=[-40, 40, -40, 40, 5, 5], truncation=4, report={"figures": False})
    assert main(["run", "--config", cfg, "--output-dir", str(tmp_path / "o"), "--quiet"]) == 1


def test_verify_all_masked_exit(cylinder_run, tmp_path):
    lines = (cylinder_run / "fields_lam1.csv").read_text().splitlines()
    masked = [lines[0]] + [r.rsplit(",", 1)[0] + ",1" for r in lines[1:]]
    bad = tmp_path / "masked.csv"
    bad.write_text("\n".join(masked) + "\n")
    assert main(["verify", "--mesh", str(cylinder_run / "surface_lam1.obj"), "--fields", str(bad)]) == 3
