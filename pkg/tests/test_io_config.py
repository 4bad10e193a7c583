import numpy as np
import pytest
import yaml

from radpair import analysis
from radpair.config import ConfigError, load_config, load_preset, parse_config, preset_names
from radpair.dynamics import Theory
from radpair.io import read_csv, write_csv

PRESETS = {
    "fig3": (0.25, 0.25, (Theory.LINDBLAD,), False, 20000),
    "fig3-mc": (0.25, 0.25, (Theory.LINDBLAD,), False, 20000),
    "fig4": (0.0, 0.0, (Theory.LINDBLAD,), True, 2000),
    "fig5": (0.25, 0.25, (Theory.RETRODICTIVE, Theory.TRADITIONAL, Theory.JONES_HORE), True, 10000),
    "fig6a": (0.0, 0.25, (Theory.RETRODICTIVE, Theory.TRADITIONAL, Theory.JONES_HORE), True, 10000),
    "fig6b": (0.0, 0.5, (Theory.RETRODICTIVE, Theory.TRADITIONAL, Theory.JONES_HORE), True, 10000),
    "fig7": (0.0, 0.5, (Theory.RETRODICTIVE, Theory.TRADITIONAL, Theory.JONES_HORE), True, 10000),
}


def minimal_doc(**over):
    doc = {
        "name": "t",
        "system": {"nuclei": [{"spin": 0.5, "coupled_to": "donor", "hyperfine": 1.0}]},
        "rates": {"k_S": 0.1, "k_T": 0.2},
        "theories": ["retrodictive"],
        "grid": {"horizon": 1.0, "steps": 100},
    }
    doc.update(over)
    return doc


def test_csv_round_trip(tmp_path):
    cols = {"t": np.linspace(0, 1, 5), "n": np.arange(5), "x": np.array([1e-300, -0.1, np.pi, 2.5e10, 0.0])}
    path = write_csv(tmp_path / "a" / "x.csv", cols, kind="test", meta={"seed": 3})
    back, meta = read_csv(path)
    assert meta["kind"] == "test" and meta["seed"] == "3" and "units" in meta
    for k in cols:
        assert np.array_equal(back[k], cols[k])
    assert back["n"].dtype.kind == "i"
    lines = path.read_text().splitlines()
    assert lines[0] == "# radpair test"
    data = [ln for ln in lines if not ln.startswith("#")]
    assert data[0] == "t,n,x"
    assert all(";" not in ln for ln in data)


def test_csv_nan_round_trip(tmp_path):
    path = write_csv(tmp_path / "n.csv", {"v": np.array([np.nan, 1.0])}, kind="t")
    back, _ = read_csv(path)
    assert np.isnan(back["v"][0]) and back["v"][1] == 1.0


def test_csv_rejects_ragged(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "r.csv", {"a": [1, 2], "b": [1]}, kind="t")


def test_presets_ship_caption_parameters():
    assert set(PRESETS) <= set(preset_names())
    for name, (ks, kt, theories, recomb, n) in PRESETS.items():
        cfg = load_preset(name)
        assert (cfg.rates.k_S, cfg.rates.k_T) == (ks, kt)
        assert cfg.theories == theories
        assert cfg.montecarlo.recombination is recomb
        assert cfg.montecarlo.n_trajectories == n
        assert cfg.hamiltonian.larmor == 0.1
        assert cfg.system.dim == 8
        assert cfg.steps == 10_000 and cfg.horizon == 30.0


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset("fig99")


@pytest.mark.parametrize(
    "patch, where",
    [
        ({"theories": []}, "theories"),
        ({"theories": ["bloch"]}, "theories[0]"),
        ({"montecarlo": {"n_trajectories": 0}}, "montecarlo.n_trajectories"),
        ({"montecarlo": {"initial_state_policy": "x"}}, "montecarlo.initial_state_policy"),
        ({"rates": {"k_S": -1, "k_T": 0}}, "rates"),
        ({"rates": {"k_S": 0.1}}, "rates.k_T"),
        ({"grid": {"horizon": 10.0, "steps": 10}}, "grid"),
        ({"grid": {"horizon": -1.0, "steps": 10}}, "grid.horizon"),
        ({"system": {"nuclei": [{"spin": 0.3}]}}, "system.nuclei[0]"),
        ({"system": {"nuclei": [{"coupled_to": "bridge"}]}}, "system.nuclei[0]"),
    ],
)
def test_config_errors_are_located(patch, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(minimal_doc(**patch), "cfg.yaml")
    assert f"cfg.yaml.{where}" in str(exc.value)


def test_load_config_file(tmp_path):
    p = tmp_path / "e.yaml"
    p.write_text(yaml.safe_dump(minimal_doc(montecarlo={"seed": 9, "dump_trajectory": 3})))
    cfg = load_config(p)
    assert cfg.dt == pytest.approx(0.01)
    assert cfg.montecarlo.seed == 9 and cfg.montecarlo.dump_trajectory == 3
    assert cfg.coherence_window == cfg.horizon
    over = cfg.with_overrides(seed=4, output=str(tmp_path / "o"))
    assert over.montecarlo.seed == 4 and over.output.endswith("o")
    ens = over.ensemble_config()
    assert ens.seed == 4 and ens.steps == 100


def test_load_config_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad)
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("3\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(scalar)


def test_band_agreement_counts():
    pred = np.array([0.0, 1.0, 2.0, 3.0])
    obs = np.array([0.0, 1.2, 2.0, 3.5])
    se = np.array([0.0, 0.05, 0.1, 0.1])
    alive = np.array([100, 100, 100, 10])
    a = analysis.band_agreement(pred, obs, se, alive)
    assert a.n_points == 4 and a.n_resolved == 3
    assert a.frac_within == pytest.approx(2 / 3)
    assert a.frac_within_all == pytest.approx(0.5)
    assert a.max_abs_dev == pytest.approx(0.2)
    z = analysis.z_scores(pred, obs, se)
    assert z[0] == 0 and z[1] == pytest.approx(-4)


def test_extremum_regions():
    t = np.linspace(0, 4 * np.pi, 400)
    near_min, near_max = analysis.extremum_regions(np.cos(t))
    assert near_max[np.argmin(np.abs(t - 2 * np.pi))] and near_min[np.argmin(np.abs(t - np.pi))]
    assert not np.any(near_min & near_max)
    dev = np.where(near_min, 0.2, 0.05)
    sd = analysis.signed_deviation_by_pcoh(dev, np.zeros_like(dev), np.cos(t), np.full(400, 100))
    assert sd.positive_and_localized
    assert sd.near_minima == pytest.approx(0.2) and sd.near_maxima == pytest.approx(0.05)
