import shutil
from pathlib import Path

import numpy as np
import pytest

from crisscross.cli import main
from crisscross.params import NetworkParams, save_params

CONF = Path(__file__).resolve().parents[1] / "configs" / "case2b.conf"


@pytest.fixture(scope="module")
def fb_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("fb")
    rc = main(["solve-fb", "--config", str(CONF), "--out", str(out),
               "--h", "0.5"])
    assert rc == 0
    return out / "boundary.csv"


def test_solve_fb_outputs(fb_file):
    assert fb_file.exists()
    assert (fb_file.parent / "value_grid.csv").exists()
    text = fb_file.read_text()
    assert text.count("\n") > 10


def test_solve_fb_deterministic(fb_file, tmp_path):
    rc = main(["solve-fb", "--config", str(CONF), "--out", str(tmp_path),
               "--h", "0.5"])
    assert rc == 0
    assert (tmp_path / "boundary.csv").read_bytes() == fb_file.read_bytes()


def test_simulate_bcp(fb_file, tmp_path):
    args = ["simulate-bcp", "--config", str(CONF), "--out", str(tmp_path),
            "--fb", str(fb_file), "--paths", "400", "--dt", "0.05",
            "--horizon", "4.0", "--seed", "3"]
    assert main(args) == 0
    got = (tmp_path / "jstar.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "jstar.csv").read_bytes() == got
    rows = dict(line.split(",") for line in got.decode().strip().splitlines()[1:])
    assert 1.0 < float(rows["jstar_mean"]) < 2.5
    assert float(rows["jstar_se"]) > 0


def test_simulate_network(fb_file, tmp_path):
    args = ["simulate-network", "--config", str(CONF), "--out", str(tmp_path),
            "--fb", str(fb_file), "--n", "100", "--reps", "3",
            "--horizon", "2.0", "--c", "2.0", "--l0", "2.0", "--g0", "1.0",
            "--seed", "5"]
    assert main(args) == 0
    rep = tmp_path / "replications_n100.csv"
    lines = rep.read_text().strip().splitlines()
    assert len(lines) == 4  # header + 3 reps
    got = rep.read_bytes()
    assert main(args) == 0
    assert rep.read_bytes() == got


def test_select_params(tmp_path):
    assert main(["select-params", "--config", str(CONF),
                 "--out", str(tmp_path)]) == 0
    text = (tmp_path / "selected_params.txt").read_text()
    assert "lbar" in text and "theta4" in text


def test_experiment_smoke(fb_file, tmp_path):
    rc = main(["experiment", "--config", str(CONF), "--out", str(tmp_path),
               "--h", "0.5", "--n-schedule", "100,400", "--reps", "4",
               "--paths", "400", "--dt", "0.05", "--horizon", "2.0",
               "--c", "2.0", "--l0", "2.0", "--g0", "1.0", "--seed", "1"])
    assert rc == 0
    assert (tmp_path / "convergence_report.csv").exists()
    assert (tmp_path / "replications_n100.csv").exists()
    assert (tmp_path / "replications_n400.csv").exists()
    for fig in ("cost_vs_n.png", "gap_vs_n.png", "diagnostics_vs_n.png"):
        assert (tmp_path / fig).stat().st_size > 0


def test_compare_smoke(tmp_path):
    rc = main(["compare", "--config", str(CONF), "--out", str(tmp_path),
               "--h", "0.5", "--n-schedule", "100", "--reps", "3",
               "--horizon", "2.0", "--c", "2.0", "--l0", "2.0", "--g0", "1.0",
               "--variants", "threshold,psi-zero,priority2", "--seed", "2"])
    assert rc == 0
    lines = (tmp_path / "policy_comparison.csv").read_text().strip().splitlines()
    assert len(lines) == 4


def test_missing_config_exit_code(tmp_path):
    assert main(["solve-fb", "--config", str(tmp_path / "nope.conf"),
                 "--out", str(tmp_path)]) == 2


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("lambda1 = 0.5\n")  # most keys missing
    assert main(["solve-fb", "--config", str(bad),
                 "--out", str(tmp_path)]) == 2


def test_wrong_regime_exit_code(tmp_path):
    p = NetworkParams((0.5, 1.0), (1.0, 2.0, 1.0), (3.0, 2.0, 0.5), 1.0)
    conf = tmp_path / "case1.conf"
    save_params(p, conf)
    assert main(["solve-fb", "--config", str(conf),
                 "--out", str(tmp_path)]) == 2


def test_no_solve_missing_boundary_exit_code(tmp_path):
    rc = main(["experiment", "--config", str(CONF), "--out", str(tmp_path),
               "--no-solve", "--n-schedule", "100", "--reps", "2",
               "--paths", "400", "--horizon", "1.0",
               "--c", "2.0", "--l0", "2.0", "--g0", "1.0"])
    assert rc == 3
