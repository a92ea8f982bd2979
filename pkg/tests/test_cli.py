import json
import subprocess
import sys

import jsonschema
import pytest

from ifsverify import claims
from ifsverify.cli import main
from ifsverify.geometry import read_cloud_csv

SMALL = {
    "snake": {"depth": 8, "angular_step": 5e-3, "radial_step": 5e-3, "pairs": 5000, "shift_max": 4, "sanders_depth": 100},
    "sharkteeth": {"rows": 2, "resolution": 0.02, "m": 3, "threshold": 0.5, "pairs": 2000, "grid": 1000},
    "dendrite": {"depth": 4, "samples_per_arc": 128, "straight_depth": 8, "straight_samples": 129, "pairs": 5000},
}


@pytest.fixture()
def small_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def strip_runtime(doc):
    return [{k: v for k, v in r.items() if k != "runtime_ms"} for r in doc]


# build


def test_build_writes_csv_and_metadata(tmp_path, capsys):
    out = tmp_path / "snake.csv"
    code, _, err = run(["build", "snake", "--depth", 6, "--out", out], capsys)
    assert code == 0 and "wrote" in err
    text = out.read_text().splitlines()
    assert text[0] == "x,y,label"
    # 17 significant digits round-trip exactly
    x = text[1].split(",")[0]
    assert float(repr(float(x))) == float(x)
    meta = json.loads(out.with_suffix(".json").read_text())
    assert meta["space"] == "snake" and meta["parameters"]["depth"] == 6
    cloud = read_cloud_csv(out)
    assert len(cloud) == meta["points"] and cloud.resolution == meta["resolution"]


@pytest.mark.parametrize(
    "space, extra",
    [
        ("sharkteeth", ["--depth", 3, "--samples", 65]),
        ("sharkteeth", ["--depth", 2, "--free-arc"]),
        ("dendrite", ["--depth", 3, "--samples", 64]),
        ("dendrite-straight", ["--depth", 5, "--samples", 33]),
        ("omega-omega", ["--depth", 3]),
        ("omega-omega", ["--beta", "w^2 + 1", "--depth", 3]),
    ],
)
def test_build_each_space(tmp_path, capsys, space, extra):
    out = tmp_path / "c.csv"
    code, _, _ = run(["build", space, *extra, "--out", out], capsys)
    assert code == 0
    assert len(read_cloud_csv(out)) > 1


def test_build_system_out_roundtrip(tmp_path, capsys):
    out, sysf = tmp_path / "d.csv", tmp_path / "d.ifs.json"
    code, _, _ = run(["build", "dendrite-straight", "--depth", 6, "--samples", 65, "--out", out, "--system-out", sysf], capsys)
    assert code == 0
    code, stdout, _ = run(["min-word-length", "--system", sysf, "--cloud", out, "--threshold", 0.05], capsys)
    assert code == 0
    res = json.loads(stdout)
    assert res["m"] == 4 and res["max_diameter"] <= 0.05


def test_min_word_length_exceeded(tmp_path, capsys):
    out, sysf = tmp_path / "d.csv", tmp_path / "d.ifs.json"
    run(["build", "dendrite-straight", "--depth", 4, "--samples", 17, "--out", out, "--system-out", sysf], capsys)
    code, stdout, _ = run(["min-word-length", "--system", sysf, "--cloud", out, "--threshold", 1e-9, "--m-max", 3], capsys)
    assert code == 1 and json.loads(stdout)["m"] == "exceeded"


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "snake", "--depth", 0],
        ["build", "snake", "--system-out", "x.json", "--depth", 3],
        ["build", "dendrite", "--depth", 99],
        ["build", "omega-omega", "--beta", "w^"],
        ["height", "nonsense"],
        ["render", "missing.csv"],
        ["verify", "snake", "--config", "missing.json"],
    ],
)
def test_usage_errors_exit_2(tmp_path, capsys, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(argv, capsys)
    assert code == 2 and err.startswith("error:")


@pytest.mark.parametrize("argv", [["verify", "bogus"], ["--seed", "-1", "height", "w"], ["build"]])
def test_argparse_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_bad_csv_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y,label\n0,0,a\n1,zz,b\n")
    code, _, err = run(["render", bad], capsys)
    assert code == 2 and "line 3" in err


# verify


def test_verify_reports_are_schema_valid_and_reproducible(tmp_path, capsys, small_config):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        code, _, err = run(["verify", "dendrite", "--seed", 11, "--config", small_config, "--out", out], capsys)
        assert code == 0, err
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    jsonschema.validate(da, claims.REPORT_SCHEMA)
    assert strip_runtime(da) == strip_runtime(db)
    assert {r["claim_id"] for r in da} >= {"dendrite.arc-lengths", "dendrite.straight-lipschitz"}
    neg = [r for r in da if r["claim_id"] == "dendrite.not-weak-ifs-attractor"]
    assert neg[0]["status"] == "evidence-only"


def test_verify_without_seed_skips_sampled(capsys, small_config):
    code, out, err = run(["verify", "snake", "--config", small_config, "--claim", "snake.weak-contraction", "--claim", "snake.shift-law"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert [r["claim_id"] for r in doc] == ["snake.shift-law"]
    assert "skipped" in err and "snake.weak-contraction" in err


def test_seed_flag_wins_over_config(tmp_path, capsys):
    cfg = dict(SMALL, seed=1)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    _, out1, _ = run(["--seed", 5, "verify", "sharkteeth", "--config", p, "--claim", "sharkteeth.tent-lipschitz"], capsys)
    _, out2, _ = run(["verify", "sharkteeth", "--seed", 5, "--config", p, "--claim", "sharkteeth.tent-lipschitz"], capsys)
    assert strip_runtime(json.loads(out1)) == strip_runtime(json.loads(out2))


def test_claim_failure_exits_1(tmp_path, capsys):
    cfg = dict(SMALL, tolerances={"dendrite.arc-lengths": 1e-300})
    cfg["dendrite"] = dict(SMALL["dendrite"], depth=6)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    code, out, _ = run(["verify", "dendrite", "--config", p, "--claim", "dendrite.arc-lengths"], capsys)
    doc = json.loads(out)
    jsonschema.validate(doc, claims.REPORT_SCHEMA)
    assert code == 1 and doc[0]["status"] == "fail" and doc[0]["worst_witness"] is not None


def test_unknown_claim_is_usage_error(capsys):
    code, _, err = run(["verify", "scattered", "--claim", "nope"], capsys)
    assert code == 2 and "nope" in err


def test_bad_tolerance_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tolerances": {"x": -1}}))
    code, _, _ = run(["verify", "scattered", "--config", p], capsys)
    assert code == 2


def test_verify_scattered_full(capsys):
    code, out, _ = run(["verify", "scattered"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert {r["status"] for r in doc} == {"pass", "evidence-only"}


# render and height


def test_render_is_deterministic(tmp_path, capsys):
    csv = tmp_path / "o.csv"
    run(["build", "omega-omega", "--depth", 3, "--out", csv], capsys)
    s1, s2 = tmp_path / "1.svg", tmp_path / "2.svg"
    assert run(["render", csv, "--out", s1, "--title", "K"], capsys)[0] == 0
    assert run(["render", csv, "--out", s2, "--title", "K"], capsys)[0] == 0
    text = s1.read_text()
    assert text == s2.read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert "<circle" in text and ">K<" in text


def test_height(capsys):
    code, out, _ = run(["height", "w^w"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["height"] == "w" and doc["limit"] and doc["classification"] == "obstructed_limit_height"
    code, out, _ = run(["height", "w^3*2 + 5"], capsys)
    assert json.loads(out)["height"] == "3"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ifsverify", "height", "w^2"], capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["height"] == "2"
