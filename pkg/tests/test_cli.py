import csv
import json
import os

import pytest

import orbitlab as ol
from orbitlab.cli import main
from orbitlab.profiles import mini_schedule
from orbitlab.schedule import save_config


@pytest.fixture(scope="module")
def mini_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "mini.cfg"
    sched, fams = mini_schedule()
    save_config(path, sched, fams)
    return str(path)


@pytest.fixture(scope="module")
def mini_companion_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "mini_c.cfg"
    sched, fams = mini_schedule(companion=True)
    save_config(path, sched, fams)
    return str(path)


@pytest.fixture(scope="module")
def built(mini_cfg, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("build"))
    assert main(["build", "--config", mini_cfg, "--out", out]) == 0
    return out


@pytest.fixture(scope="module")
def built_companion(mini_companion_cfg, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("build_c"))
    assert main(["build", "--config", mini_companion_cfg, "--out", out]) == 0
    return out


def test_build_outputs(built):
    names = set(os.listdir(built))
    assert {"manifest.json", "schedule.cfg", "F_in_E.mtx", "E_in_F.mtx",
            "T_f.mtx"} <= names
    manifest = json.load(open(os.path.join(built, "manifest.json")))
    assert manifest["n_trunc"] == 31_600
    assert set(manifest["hashes"]) >= {"F_in_E.mtx", "E_in_F.mtx", "T_f.mtx"}


def test_build_echoes_calibrated_gammas(built):
    sched, _ = ol.load_config(os.path.join(built, "schedule.cfg"))
    assert all(st.gamma is not None for st in sched.stages)


def test_rebuild_identical_hashes(mini_cfg, built, tmp_path):
    out2 = str(tmp_path / "again")
    assert main(["build", "--config", mini_cfg, "--out", out2]) == 0
    m1 = json.load(open(os.path.join(built, "manifest.json")))
    m2 = json.load(open(os.path.join(out2, "manifest.json")))
    assert m1["hashes"] == m2["hashes"]


def test_companion_build_writes_A(built_companion):
    assert "A_f.mtx" in os.listdir(built_companion)


def test_build_invalid_config(tmp_path, capsys):
    from dataclasses import replace
    sched, fams = mini_schedule()
    bad = replace(sched, stages=(replace(sched.stages[0], c=(16, 16)),
                                 sched.stages[1]))
    path = tmp_path / "bad.cfg"
    save_config(path, bad, fams)
    rc = main(["build", "--config", str(path), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "c strictly increasing" in capsys.readouterr().err


def test_verify_bfan_suite(built):
    rc = main(["verify", "--build", built, "--suite", "bfan"])
    assert rc == 0
    rows = list(csv.DictReader(open(os.path.join(built, "report_bfan.csv"))))
    assert any(r["claim_id"].startswith("bfan.identity") for r in rows)
    assert all(r["status"] != "fail" for r in rows)


def test_verify_reports_deterministic(built):
    main(["verify", "--build", built, "--suite", "unicell", "--seed", "7"])
    a = open(os.path.join(built, "report_unicell.csv")).read()
    main(["verify", "--build", built, "--suite", "unicell", "--seed", "7"])
    b = open(os.path.join(built, "report_unicell.csv")).read()
    strip = lambda s: [",".join(line.split(",")[:-1])
                       for line in s.splitlines()]  # drop runtime column
    assert strip(a) == strip(b)


def test_verify_profile_mismatch(built, capsys):
    rc = main(["verify", "--build", built, "--suite", "reflexivity"])
    assert rc == 2
    assert "profile" in capsys.readouterr().err


def test_verify_reflexivity_on_companion(built_companion):
    rc = main(["verify", "--build", built_companion, "--suite", "reflexivity"])
    assert rc == 0


def test_verify_unknown_suite(built):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--build", built, "--suite", "nonsense"])
    assert exc.value.code == 2


def test_orbit_zero_vector(built, tmp_path):
    out = tmp_path / "orbit.csv"
    rc = main(["orbit", "--build", built, "--x", "f:", "--targets", "e:1=1",
               "--steps", "3", "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(open(out)))
    assert len(rows) == 5  # header + 4 steps
    assert all(float(r[1]) == pytest.approx(1.0) for r in rows[1:])


def test_orbit_zero_steps(built, tmp_path):
    out = tmp_path / "orbit.csv"
    rc = main(["orbit", "--build", built, "--x", "f:0=1", "--targets",
               "f:0=1", "--steps", "0", "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(open(out)))
    assert len(rows) == 2 and float(rows[1][1]) == 0.0


def test_orbit_certified_minimum(built, tmp_path):
    sched, _ = mini_schedule()
    c2 = sched.stage(1).c[1]
    out = tmp_path / "orbit.csv"
    rc = main(["orbit", "--build", built, "--x", "f:0=1", "--targets", "e:1=1",
               "--steps", str(c2), "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader(open(out)))[1:]
    dists = [float(r[1]) for r in rows]
    xi = sched.stage(1).xi
    assert dists[c2] == min(dists[xi + 1:])


def test_orbit_bad_spec(built, capsys):
    rc = main(["orbit", "--build", built, "--x", "g:0=1", "--targets", "e:1=1",
               "--steps", "1"])
    assert rc == 2


def test_shipped_profiles_load():
    root = os.path.join(os.path.dirname(__file__), "..", "configs")
    for name in ("thm1.cfg", "orbit_reflexive.cfg", "mini.cfg",
                 "mini_reflexive.cfg"):
        sched, fams = ol.load_config(os.path.join(root, name))
        assert ol.validate(sched) == []
