import numpy as np
import pytest

from ltesim.errors import ConfigError
from ltesim.rng import drop_streams, stream
from ltesim.simrunner import ResultTable, emit_results, load_config, read_results
from ltesim.simrunner.cli import main
from ltesim.simrunner.config import apply_overrides, config_from_dict, parse_antennas
from ltesim.simrunner.parallel import map_drops, worker_count
from ltesim.simrunner.results import from_csv, plot_script, to_csv


# ---- config ----

def test_defaults_and_top_level():
    cfg = load_config(experiment="cfo", seed=7, n_drops=3)
    assert (cfg.experiment, cfg.seed, cfg.n_drops) == ("cfo", 7, 3)
    assert cfg.mu_gain.users[0] == 2


def test_toml_file_and_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "femto"\nn_drops = 4\n[femto]\nn_clusters = 3\n')
    cfg = load_config(p, ["femto.cluster_radius=15", "radio.velocity_kmh=30",
                          "mu_gain.antennas=['2x2']"])
    assert cfg.experiment == "femto" and cfg.n_drops == 4
    assert cfg.femto.n_clusters == 3
    assert cfg.femto.cluster_radius == 15.0
    assert cfg.radio.velocity_kmh == 30.0
    assert cfg.mu_gain.antennas == ("2x2",)


@pytest.mark.parametrize("data,key", [
    ({"bogus": 1}, "bogus"),
    ({"femto": {"bogus": 1}}, "femto.bogus"),
    ({"n_drops": 0}, "n_drops"),
    ({"n_drops": "many"}, "n_drops"),
    ({"experiment": "nope"}, "experiment"),
    ({"mu_gain": {"antennas": ["3x3"]}}, "mu_gain.antennas"),
    ({"mu_gain": {"users": []}}, "mu_gain.users"),
    ({"femto": {"femto_counts": [11]}}, "femto.femto_counts"),
    ({"das": {"su_scheduler": "x"}}, "das.su_scheduler"),
    ({"seed": -1}, "seed"),
])
def test_strict_config_errors(data, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        config_from_dict(data)


def test_override_syntax():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    assert apply_overrides({}, ["cfo.preset=frequency-domain"]) == {
        "cfo": {"preset": "frequency-domain"}}
    assert parse_antennas("k", "4x4") == (4, 4)


# ---- rng ----

def test_streams_are_addressed():
    a = stream(5, "x", 1).random(3)
    assert np.array_equal(a, stream(5, "x", 1).random(3))
    assert not np.array_equal(a, stream(5, "x", 2).random(3))
    assert not np.array_equal(a, stream(6, "x", 1).random(3))
    s = drop_streams(5, "exp", 0, ["a", "b"])
    assert not np.array_equal(s["a"].random(3), s["b"].random(3))


def _square(x):
    return x * x


def test_map_drops_order(monkeypatch):
    assert map_drops(_square, range(7), workers=1) == [x * x for x in range(7)]
    assert map_drops(_square, range(7), workers=2) == [x * x for x in range(7)]
    monkeypatch.setenv("SIM_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SIM_THREADS", "0")
    assert worker_count() == 1


# ---- results ----

def _table():
    t = ResultTable("cfo")
    t.add("snr_db", 4.0, "b", [1.0, 2.0, 3.0])
    t.add("snr_db", 0.0, "a", [2.0, 4.0])
    t.add_exact("snr_db", 0.0, "c", 0.1)
    return t


def test_table_rows_and_stderr():
    t = _table().sorted()
    assert [(r.sweep_value, r.metric) for r in t.rows] == [(0.0, "a"), (0.0, "c"), (4.0, "b")]
    b = t.get("b")
    assert b.stderr == pytest.approx(1.0 / np.sqrt(3))
    assert b.n == 3
    with pytest.raises(KeyError):
        t.get("zzz")


def test_csv_round_trip_exact():
    t = _table()
    text = to_csv(t)
    assert text.splitlines()[0] == "sweep_var,sweep_value,metric,mean,stderr,n"
    back = from_csv(text, "cfo")
    assert back.rows == t.sorted().rows
    assert to_csv(back) == text


def test_emit_and_plot(tmp_path):
    csv_path, gp_path = emit_results(_table(), tmp_path)
    assert csv_path.name == "cfo.csv" and gp_path.name == "cfo.gp"
    assert read_results(csv_path).rows == _table().sorted().rows
    gp = gp_path.read_text()
    assert "cfo.csv" in gp and "set xlabel" in gp
    with pytest.raises(OSError):
        emit_results(_table(), tmp_path / "missing")


def test_femto_plot_has_jain_axis():
    t = ResultTable("femto")
    t.add("femto_count", 0, "tput_combined", [1.0, 2.0])
    t.add("femto_count", 0, "jain", [0.5, 0.6])
    assert "y2" in plot_script(t, "femto.csv")


# ---- cli ----

def test_cli_runs(tmp_path, capsys):
    code = main(["cfo", "--drops", "5", "--seed", "3", "--out", str(tmp_path),
                 "--override", "cfo.snr_db=[0, 10]"])
    assert code == 0
    out = capsys.readouterr().out.split()
    assert out[0].endswith("cfo.csv") and out[1].endswith("cfo.gp")
    t = read_results(tmp_path / "cfo.csv")
    assert {r.sweep_value for r in t.rows} == {0.0, 10.0}


def test_cli_error_codes(tmp_path):
    assert main(["cfo", "--drops", "2", "--out", str(tmp_path / "nope")]) == 3
    assert main(["cfo", "--out", str(tmp_path), "--override", "cfo.bogus=1"]) == 2
    assert main(["cfo", "--config", str(tmp_path / "missing.toml")]) == 3
    assert main(["no-such-experiment"]) == 2
    assert main(["cfo", "--out", str(tmp_path), "--override", "cfo.preset=unknown"]) == 2
