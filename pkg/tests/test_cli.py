import json
from pathlib import Path

import numpy as np
import pytest

from multiborders.cli import main

CONTROLS = Path(__file__).resolve().parent.parent / "controls"
FAST = "-n 200 -e 2 -r 0"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", str(d / "train.dat"), "--n", "1200", "--sigma", "0.2", "--seed", "1"]) == 0
    assert main(["synth", str(d / "test.dat"), "--n", "300", "--sigma", "0.2", "--seed", "2"]) == 0
    for name in ("adjacent", "halving"):
        text = (CONTROLS / f"{name}.ctl").read_text().replace("-n 5000 -e 5 -r 0", FAST)
        (d / f"{name}.ctl").write_text(text)
    return d


def test_synth_file_shape(workdir):
    rows = np.loadtxt(workdir / "train.dat")
    assert rows.shape == (1200, 3)
    assert set(rows[:, -1].astype(int)) == set(range(8))


@pytest.mark.parametrize("scheme, evaluations", [("halving", 3), ("adjacent", 7)])
def test_train_and_classify(workdir, scheme, evaluations, capsys):
    base = workdir / scheme
    assert main(["train", str(workdir / f"{scheme}.ctl"), str(workdir / "train.dat"), str(base)]) == 0
    assert (workdir / f"{scheme}.mbc").exists()
    assert len(list(workdir.glob(f"{scheme}.*.mbm"))) == 7
    out = workdir / f"{scheme}.out"
    capsys.readouterr()
    assert main(["classify", str(workdir / f"{scheme}.mbc"), str(workdir / "test.dat"), str(out)]) == 0
    assert f"{evaluations * 300} binary evaluations" in capsys.readouterr().err
    lines = out.read_text().splitlines()
    assert len(lines) == 300
    assert all(len(line.split()) == 2 for line in lines)
    assert main(["metrics", str(workdir / "test.dat"), str(out), "--json"]) == 0
    record = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert record["accuracy"] > 0.3


def test_probs_columns(workdir):
    control = workdir / "adjacent.mbc"
    if not control.exists():
        main(["train", str(workdir / "adjacent.ctl"), str(workdir / "train.dat"), str(workdir / "adjacent")])
    out = workdir / "probs.out"
    assert main(["classify", str(control), str(workdir / "test.dat"), str(out), "--probs"]) == 0
    table = np.loadtxt(out)
    assert table.shape == (300, 9)
    np.testing.assert_allclose(table[:, 1:].sum(axis=1), 1.0, atol=1e-9)
    assert np.array_equal(table[:, 0], table[:, 1:].argmax(axis=1))


def test_probs_rejected_for_hierarchy(workdir):
    control = workdir / "halving.mbc"
    if not control.exists():
        main(["train", str(workdir / "halving.ctl"), str(workdir / "train.dat"), str(workdir / "halving")])
    assert main(["classify", str(control), str(workdir / "test.dat"), str(workdir / "x.out"), "--probs"]) == 1


def test_classify_accepts_unlabelled_points(workdir):
    control = workdir / "halving.mbc"
    if not control.exists():
        main(["train", str(workdir / "halving.ctl"), str(workdir / "train.dat"), str(workdir / "halving")])
    np.savetxt(workdir / "pts.dat", np.loadtxt(workdir / "test.dat")[:, :2])
    assert main(["classify", str(control), str(workdir / "pts.dat"), str(workdir / "pts.out")]) == 0
    np.savetxt(workdir / "wide.dat", np.zeros((3, 5)))
    assert main(["classify", str(control), str(workdir / "wide.dat"), str(workdir / "w.out")]) == 2


def test_plan_halving(capsys):
    assert main(["plan", str(CONTROLS / "halving.ctl")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 7
    assert lines[0].startswith("0 ") and lines[0].endswith("{0,1,2,3} {4,5,6,7}")


def test_plan_with_counts(workdir, capsys):
    assert main(["plan", str(CONTROLS / "adjacent.ctl"), str(workdir / "train.dat")]) == 0
    for line in capsys.readouterr().out.splitlines():
        n1, n2 = map(int, line.split()[-2:])
        assert n1 + n2 == 1200


def test_validate(tmp_path, capsys):
    assert main(["validate", str(CONTROLS / "adjacent_reference.ctl"), "--classes", "8"]) == 0
    assert main(["validate", str(CONTROLS / "adjacent_reference.ctl"), "--classes", "6"]) == 1
    bad = tmp_path / "bad.ctl"
    bad.write_text('"" { 0 "" {1 0} }')
    assert main(["validate", str(bad), "--classes", "2"]) == 1
    assert main(["validate", str(bad), "--classes", "2", "--allow-duplicates"]) == 0
    assert main(["validate", str(tmp_path / "missing.ctl"), "--classes", "2"]) == 1
    bad.write_text('"" { 0 1')
    capsys.readouterr()
    assert main(["validate", str(bad), "--classes", "2"]) == 1
    assert "bad.ctl" in capsys.readouterr().err


def test_agf_flags_fail_training(workdir, capsys):
    code = main(["train", str(CONTROLS / "halving_reference.ctl"), str(workdir / "train.dat"), str(workdir / "agf")])
    assert code == 2
    assert "-s" in capsys.readouterr().err


def test_missing_data_file(workdir):
    assert main(["train", str(workdir / "halving.ctl"), str(workdir / "nope.dat"), str(workdir / "z")]) == 1


def test_synth_starvation(tmp_path):
    assert main(["synth", str(tmp_path / "s.dat"), "--n", "400", "--d", "200", "--sigma", "0"]) == 1


def test_metrics_length_mismatch(workdir, tmp_path):
    (tmp_path / "p.out").write_text("0 1.0\n")
    assert main(["metrics", str(workdir / "test.dat"), str(tmp_path / "p.out")]) == 1
