import subprocess
import sys

import numpy as np
import pytest
import yaml

from radpair.cli import main
from radpair.io import read_csv

SIM_COLUMNS = ["t", "trace", "qs", "qs_norm", "pcoh", "C", "n_S", "n_T", "Gamma_c", "kappa", "gamma_c"]


@pytest.fixture
def cfg_file(tmp_path):
    def make(**over):
        doc = {
            "name": "tiny",
            "system": {"nuclei": [{"spin": 0.5, "coupled_to": "donor", "hyperfine": 1.0}]},
            "hamiltonian": {"larmor": 0.1},
            "rates": {"k_S": 0.0, "k_T": 0.5},
            "theories": ["retrodictive", "traditional", "jones-hore"],
            "grid": {"horizon": 3.0, "steps": 300},
            "montecarlo": {"n_trajectories": 200, "seed": 4, "batch_size": 64},
            "output": str(tmp_path / "out"),
        }
        doc.update(over)
        p = tmp_path / "exp.yaml"
        p.write_text(yaml.safe_dump(doc))
        return p

    return make


def test_simulate_writes_one_csv_per_theory(cfg_file, tmp_path, capsys):
    assert main(["simulate", "--config", str(cfg_file())]) == 0
    out = tmp_path / "out"
    for th in ("retrodictive", "traditional", "jones-hore"):
        cols, meta = read_csv(out / f"tiny_{th}.csv")
        assert list(cols) == SIM_COLUMNS
        assert len(cols["t"]) == 301
        assert meta["kind"] == "master-equation" and meta["theory"] == th
        assert "units" in meta
    cols, _ = read_csv(out / "tiny_unitary.csv")
    assert list(cols) == ["t", "qs", "C"]
    assert "wrote" in capsys.readouterr().out


def test_montecarlo_outputs_and_rerun_identical(cfg_file, tmp_path):
    path = cfg_file(montecarlo={"n_trajectories": 100, "seed": 4, "batch_size": 32, "dump_trajectory": 1})
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["montecarlo", "--config", str(path), "--out", str(out_a), "--threads", "1"]) == 0
    assert main(["montecarlo", "--config", str(path), "--out", str(out_b), "--threads", "3"]) == 0
    a = (out_a / "tiny_mc.csv").read_bytes()
    assert a == (out_b / "tiny_mc.csv").read_bytes()
    cols, meta = read_csv(out_a / "tiny_mc.csv")
    for c in ("t", "survival", "qs", "qs_norm", "qs_stderr", "qs_norm_stderr", "alive"):
        assert c in cols
    assert meta["seed"] == "4"
    traj, _ = read_csv(out_a / "tiny_trajectory1.csv")
    assert list(traj) == ["t", "qs", "event"]
    assert traj["qs"][0] == pytest.approx(1.0)


def test_seed_override_changes_output(cfg_file, tmp_path):
    path = cfg_file()
    main(["montecarlo", "--config", str(path), "--out", str(tmp_path / "s1")])
    main(["montecarlo", "--config", str(path), "--out", str(tmp_path / "s2"), "--seed", "99"])
    _, meta = read_csv(tmp_path / "s2" / "tiny_mc.csv")
    assert meta["seed"] == "99"
    assert (tmp_path / "s1" / "tiny_mc.csv").read_bytes() != (tmp_path / "s2" / "tiny_mc.csv").read_bytes()


def test_compare_report(cfg_file, tmp_path, capsys):
    assert main(["compare", "--config", str(cfg_file())]) == 0
    text = (tmp_path / "out" / "tiny_compare.txt").read_text()
    assert text == capsys.readouterr().out.split("wrote")[0]
    for th in ("retrodictive", "traditional", "jones-hore"):
        assert th in text
    assert "max|dev|" in text and "rms" in text and "sigma" in text and "p_coh minima" in text
    cols, _ = read_csv(tmp_path / "out" / "tiny_compare.csv")
    assert "retrodictive_z" in cols and "mc_stderr" in cols


def test_rates_table(cfg_file, tmp_path, capsys):
    assert main(["rates", "--config", str(cfg_file())]) == 0
    out = capsys.readouterr().out
    assert "gamma_c" in out and "ordering" in out
    cols, _ = read_csv(tmp_path / "out" / "tiny_rates.csv")
    assert np.allclose(cols["retrodictive_gamma_c"], 0.25, rtol=1e-9)


@pytest.mark.parametrize(
    "over",
    [
        {"theories": []},
        {"montecarlo": {"n_trajectories": 0}},
        {"rates": {"k_S": "fast", "k_T": 0.1}},
    ],
)
def test_config_errors_exit_2(cfg_file, capsys, over):
    assert main(["simulate", "--config", str(cfg_file(**over))]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--preset", "fig5", "--config", "x.yaml"])
    assert exc.value.code == 2
    assert main(["simulate", "--preset", "nope"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["simulate", "--preset", "fig5", "--threads", "-1"]) == 2


def test_unwritable_output_exit_1(cfg_file, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--config", str(cfg_file()), "--out", str(blocker / "sub")]) == 1
    assert "I/O error" in capsys.readouterr().err


def test_module_entry_point(cfg_file):
    proc = subprocess.run(
        [sys.executable, "-m", "radpair", "rates", "--config", str(cfg_file())],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "gamma_c" in proc.stdout
