import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from wavesource import cli
from wavesource.config import config_from_dict, dump_config, load_config, save_config
from wavesource.errors import ValidationError
from wavesource.io import RunManifest, read_measurements, read_table, sha256

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _small_static():
    return {
        "name": "tiny",
        "physics": {"c": 1.0},
        "sensors": {"kind": "sphere", "radius": 5.0, "n_phi": 4, "n_theta": 4},
        "time": {"T": 12.0, "N_T": 24},
        "sources": {"kind": "static", "locations": [[0.0, 0.5, 0.0]], "intensities": [2.0]},
        "grid": {"lower": [-1, -1, -1], "upper": [1, 1, 1], "shape": [5, 5, 5]},
        "noise": {"level": 0.0, "seed": 0},
        "solver": {"max_iter": 200, "tol": 1e-8, "intensity_threshold": 0.5},
    }


def _small_moving():
    d = _small_static()
    d.update(name="tiny-moving", physics={"c": 340.0}, time={"T": 6.283185307179586, "N_T": 16},
             sources={"kind": "trajectory", "trajectory": "circle_modulated"},
             grid={"lower": [-3, -3, -3], "upper": [3, 3, 3], "shape": [11, 11, 11]},
             postprocess={"fourier_order": 2, "segment_order": 1})
    return d


def _write(tmp_path, d, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(d))
    return str(p)


class TestConfig:
    def test_example1(self):
        cfg = load_config(CONFIGS / "example1.yaml")
        assert len(cfg.sensors.build()) == 64
        assert (cfg.N_T, cfg.T, cfg.c) == (64, 15.0, 1.0)

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_round_trip(self, path, tmp_path):
        cfg = load_config(path)
        save_config(cfg, tmp_path / "x.yaml")
        assert load_config(tmp_path / "x.yaml") == cfg

    @pytest.mark.parametrize("patch,field", [
        ({"noise": {"level": -0.1}}, "noise.level"),
        ({"grid": {"lower": [0, 0, 0], "upper": [1, -1, 1], "shape": [3, 3, 3]}}, "grid"),
        ({"physics": {"c": 0}}, "physics.c"),
        ({"time": {"T": 1.0, "N_T": "many"}}, "time.N_T"),
        ({"solver": {"max_iterations": 3}}, "solver"),
        ({"sources": {"kind": "trajectory", "trajectory": "spiral"}}, "sources.trajectory"),
        ({"sensors": {"kind": "sphere", "n_phi": 2.5}}, "sensors.n_phi"),
        ({"extra": 1}, "config"),
    ])
    def test_validation_names_field(self, patch, field):
        d = _small_static()
        d.update(patch)
        with pytest.raises(ValidationError) as exc:
            config_from_dict(d)
        assert exc.value.field == field

    def test_yaml_parse_error(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("physics: [c: 1\n")
        with pytest.raises(ValidationError):
            load_config(p)

    def test_dump_is_yaml(self):
        cfg = config_from_dict(_small_static())
        assert yaml.safe_load(dump_config(cfg))["sources"]["intensities"] == [2.0]


def test_run_manifest_round_trip():
    m = RunManifest("simulate", {"a": [1, 2]}, "0.1.0", "numpy.PCG64", 4, {"t": 0.5},
                    {"x": {"path": "x.csv", "sha256": "00"}}, {"note": True})
    assert RunManifest.from_json(m.to_json()) == m


class TestCLI:
    def test_simulate_outputs(self, tmp_path):
        cfg = _write(tmp_path, _small_static())
        out = tmp_path / "sim"
        assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        data, sig = read_measurements(out / "measurements.json")
        assert data.samples.shape == (16, 24)
        r = np.linalg.norm(data.sensors.points - [0, 0.5, 0], axis=1)
        assert np.all(data.samples[data.times[None, :] < r[:, None]] == 0)
        man = RunManifest.from_json((out / "simulate_manifest.json").read_text())
        assert man.verify(out) == []
        assert man.seed == 0 and man.generator == "numpy.PCG64"

    def test_measurement_round_trip_exact(self, tmp_path):
        d = _small_static()
        d["noise"] = {"level": 0.05, "seed": 3}
        cfg = _write(tmp_path, d)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        data, _ = read_measurements(tmp_path / "a" / "measurements.json")
        ref, _ = cli.simulate(load_config(cfg))
        np.testing.assert_array_equal(data.samples, ref.samples)
        assert data.noise == ref.noise

    def test_noise_free_byte_identical(self, tmp_path):
        cfg = _write(tmp_path, _small_static())
        for name in ("a", "b"):
            cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / name)])
        for f in ("measurements.csv", "measurements.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_seed_override(self, tmp_path):
        d = _small_static()
        d["noise"] = {"level": 0.05, "seed": 3}
        cfg = _write(tmp_path, d)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "9"])
        data, _ = read_measurements(tmp_path / "a" / "measurements.json")
        assert data.noise.seed == 9

    def test_invert_static(self, tmp_path, capsys):
        cfg = _write(tmp_path, _small_static())
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "sim")])
        out = tmp_path / "inv"
        rc = cli.main(["invert-static", "--config", cfg, "--data",
                       str(tmp_path / "sim" / "measurements.json"), "--out", str(out)])
        assert rc == 0
        peaks = read_table(out / "peaks.csv")
        assert len(peaks["n"]) == 1
        np.testing.assert_allclose([peaks["x"][0], peaks["y"][0], peaks["z"][0]], [0, 0.5, 0])
        assert peaks["intensity"][0] == pytest.approx(2.0, rel=0.1)
        coef = read_table(out / "coefficients.csv")
        assert list(coef) == ["l", "i", "j", "k", "x", "y", "z", "c"] and len(coef["l"]) == 125
        man = RunManifest.from_json((out / "invert-static_manifest.json").read_text())
        assert set(man.outputs) == {"coefficients", "peaks", "isosurface"}
        assert man.verify(out) == []
        assert "peak 1" in capsys.readouterr().out

    def test_invert_static_zero_data(self, tmp_path):
        d = _small_static()
        cfg = _write(tmp_path, d)
        cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "sim")])
        m = tmp_path / "sim" / "measurements.csv"
        m.write_text("\n".join(",".join(["0"] * 24) for _ in range(16)) + "\n")
        cli.main(["invert-static", "--config", cfg, "--data",
                  str(tmp_path / "sim" / "measurements.json"), "--out", str(tmp_path / "inv")])
        assert len(read_table(tmp_path / "inv" / "peaks.csv")["n"]) == 0

    def test_invert_moving_and_plot(self, tmp_path):
        cfg = _write(tmp_path, _small_moving())
        out = tmp_path / "mv"
        assert cli.main(["invert-moving", "--config", cfg, "--out", str(out),
                         "--threads", "2"]) == 0
        est = read_table(out / "estimate.csv")
        assert list(est) == ["k", "t", "sx", "sy", "sz", "indicator", "repaired"]
        assert len(est["k"]) == 16
        man = RunManifest.from_json((out / "invert-moving_manifest.json").read_text())
        assert man.verify(out) == []
        assert {"measurements", "estimate_raw", "estimate", "fourier", "segments"} <= set(man.outputs)
        plot = tmp_path / "plot"
        assert cli.main(["plot-data", "--config", cfg, "--data", str(out), "--out", str(plot)]) == 0
        ov = read_table(plot / "trajectory_overlay.csv")
        assert set(ov["series"]) == {"truth", "raw", "estimate", "smooth"}
        err = read_table(plot / "error_curves.csv")
        assert np.all(err["error"][err["series"] == "estimate"] < 0.8)

    def test_static_pipeline_through_moving(self, tmp_path):
        d = _small_static()
        d["sources"] = {"kind": "static", "locations": [[0.5, 0.0, 0.0]], "intensities": [1.0]}
        cfg = _write(tmp_path, d)
        cli.main(["invert-moving", "--config", cfg, "--out", str(tmp_path / "mv")])
        est = read_table(tmp_path / "mv" / "estimate.csv")
        late = est["t"] > 6.0
        np.testing.assert_allclose(est["sx"][late], 0.5)
        np.testing.assert_allclose(est["sy"][late], 0.0, atol=1e-15)

    def test_plot_static(self, tmp_path):
        cfg = _write(tmp_path, _small_static())
        cli.main(["invert-static", "--config", cfg, "--out", str(tmp_path / "inv")])
        cli.main(["plot-data", "--config", cfg, "--data", str(tmp_path / "inv"),
                  "--out", str(tmp_path / "plot")])
        sl = read_table(tmp_path / "plot" / "field_slices.csv")
        assert set(sl["plane"]) == {"xy", "xz", "yz"} and len(sl["c"]) == 75

    def test_superluminal_exit_2(self, tmp_path, capsys):
        d = _small_moving()
        d["physics"] = {"c": 1.0}
        d["sources"] = {"kind": "trajectory", "trajectory": "helix"}
        cfg = _write(tmp_path, d)
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
        assert "superluminal" in capsys.readouterr().err

    def test_validation_exit_1(self, tmp_path, capsys):
        d = _small_static()
        d["noise"] = {"level": -0.1}
        assert cli.main(["simulate", "--config", _write(tmp_path, d), "--out",
                         str(tmp_path / "x")]) == 1
        assert "noise.level" in capsys.readouterr().err

    def test_missing_config_exit_1(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 1

    def test_speed_warning(self, tmp_path):
        d = _small_moving()
        d["physics"] = {"c": 20.0}
        with pytest.warns(RuntimeWarning, match=r"\|v\|/c"):
            cli.main(["invert-moving", "--config", _write(tmp_path, d), "--out",
                      str(tmp_path / "mv")])

    def test_deterministic_across_threads(self, tmp_path):
        d = _small_moving()
        d["noise"] = {"level": 0.05, "seed": 1}
        cfg = _write(tmp_path, d)
        for n in ("1", "3"):
            cli.main(["invert-moving", "--config", cfg, "--out", str(tmp_path / n),
                      "--threads", n])
        a = json.loads((tmp_path / "1" / "invert-moving_manifest.json").read_text())["outputs"]
        b = json.loads((tmp_path / "3" / "invert-moving_manifest.json").read_text())["outputs"]
        assert {k: v["sha256"] for k, v in a.items()} == {k: v["sha256"] for k, v in b.items()}
        assert sha256(tmp_path / "1" / "estimate.csv") == a["estimate"]["sha256"]
