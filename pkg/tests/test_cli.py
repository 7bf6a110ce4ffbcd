import json
import math
from pathlib import Path

import numpy as np
import pytest

from svtv.cli import main
from svtv.fileio import read_map_blob, read_maps_csv, read_pgm, write_pgm
from svtv.imagecore import BlurOperator, gaussian_kernel
from svtv.synthetic import geometric

DATA = Path(__file__).parent / "data"


def write_config(path, **values):
    path.write_text("".join(f"{k} = {v}\n" for k, v in values.items()))
    return str(path)


@pytest.fixture
def truth(tmp_path):
    path = tmp_path / "u.pgm"
    write_pgm(path, geometric(32))
    return path


def run(*argv):
    return main([str(a) for a in argv])


class TestDegrade:
    def test_noiseless_is_blur_only(self, tmp_path, truth):
        out = tmp_path / "o"
        assert run("degrade", truth, "--out", out) == 0
        b, comments = read_pgm(out / "degraded.pgm")
        u, _ = read_pgm(truth)
        expect = BlurOperator(gaussian_kernel(5, 1.0), u.shape).apply(u)
        assert np.max(np.abs(b - expect)) <= 1.0 / 65535
        assert any(c.startswith("config-hash") for c in comments)
        side = json.loads((out / "degraded.pgm.json").read_text())
        assert side["sigma"] == 0.0 and side["seed"] == 0

    def test_gaussian_noise_level(self, tmp_path):
        flat = tmp_path / "flat.pgm"
        write_pgm(flat, np.full((320, 320), 0.5))
        cfg = write_config(tmp_path / "c.cfg", **{"noise.sigma": 0.1})
        assert run("degrade", flat, "--config", cfg, "--out", tmp_path, "--seed", 7) == 0
        b, _ = read_pgm(tmp_path / "degraded.pgm")
        assert np.std(b - 0.5) == pytest.approx(0.1, rel=0.02)

    def test_uniform_noise_bounds(self, tmp_path):
        flat = tmp_path / "flat.pgm"
        write_pgm(flat, np.full((64, 64), 0.5))
        cfg = write_config(tmp_path / "c.cfg", **{"noise.sigma": 0.1, "noise.q": "inf"})
        assert run("degrade", flat, "--config", cfg, "--out", tmp_path) == 0
        b, _ = read_pgm(tmp_path / "degraded.pgm")
        bound = math.sqrt(3) * 0.1
        assert np.all(np.abs(b - 0.5) <= bound + 2.0 / 65535)

    def test_seed_changes_output(self, tmp_path, truth):
        cfg = write_config(tmp_path / "c.cfg", **{"noise.sigma": 0.1})
        run("degrade", truth, "--config", cfg, "--out", tmp_path / "a", "--seed", 1)
        run("degrade", truth, "--config", cfg, "--out", tmp_path / "b", "--seed", 1)
        run("degrade", truth, "--config", cfg, "--out", tmp_path / "c", "--seed", 2)
        a = (tmp_path / "a" / "degraded.pgm").read_bytes()
        assert a == (tmp_path / "b" / "degraded.pgm").read_bytes()
        assert a != (tmp_path / "c" / "degraded.pgm").read_bytes()


class TestRestore:
    def test_round_trip_and_determinism(self, tmp_path, truth):
        cfg = write_config(tmp_path / "c.cfg", model="WTV", **{"noise.sigma": 0.1, "admm.max_iters": 30,
                                                                 "io.truth": truth})
        run("degrade", truth, "--config", cfg, "--out", tmp_path / "d")
        b = tmp_path / "d" / "degraded.pgm"
        assert run("restore", b, "--config", cfg, "--out", tmp_path / "r1") == 0
        assert run("restore", b, "--config", cfg, "--out", tmp_path / "r2") == 0
        for name in ("restored.pgm", "maps.csv", "alpha.map", "diagnostics.csv", "manifest.json"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes(), name
        manifest = json.loads((tmp_path / "r1" / "manifest.json").read_text())
        assert manifest["summary"]["isnr"] > 0
        assert manifest["blobs"] == {"alpha": "alpha.map"}
        np.testing.assert_array_equal(read_maps_csv(tmp_path / "r1" / "maps.csv")["alpha"],
                                      read_map_blob(tmp_path / "r1" / "alpha.map"))
        diag = (tmp_path / "r1" / "diagnostics.csv").read_text().splitlines()
        assert diag[0] == "# svtv restore"

    def test_missing_noise_is_an_error(self, tmp_path, truth, capsys):
        cfg = write_config(tmp_path / "c.cfg", model="TV")
        assert run("restore", truth, "--config", cfg, "--out", tmp_path) == 2
        assert "noise" in capsys.readouterr().err

    def test_explicit_noise_without_sidecar(self, tmp_path, truth):
        cfg = write_config(tmp_path / "c.cfg", model="TV", **{"noise.sigma": 0.05, "admm.max_iters": 5})
        assert run("restore", truth, "--config", cfg, "--out", tmp_path) == 0
        assert (tmp_path / "restored.pgm").exists()


class TestEstimate:
    def test_golden_texture(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", model="WDTVpSV")
        assert run("estimate", DATA / "texture32.pgm", "--config", cfg, "--out", tmp_path) == 0
        for name in ("alpha", "p", "theta", "a"):
            np.testing.assert_array_equal(read_map_blob(tmp_path / f"{name}.map"),
                                          read_map_blob(DATA / f"golden_WDTVpSV_{name}.map"))

    def test_constant_image(self, tmp_path):
        img = tmp_path / "c.pgm"
        write_pgm(img, np.full((8, 8), 0.5))
        cfg = write_config(tmp_path / "c.cfg", model="WTV", **{"estimation.eps_reg": 1e-3})
        assert run("estimate", img, "--config", cfg, "--out", tmp_path) == 0
        np.testing.assert_allclose(read_map_blob(tmp_path / "alpha.map"), 1000.0)


class TestProxFieldAndMetrics:
    def test_prox_field(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", model="WTV", **{"prox.beta": 3.0, "prox.grid": 11})
        assert run("prox-field", "--config", cfg, "--out", tmp_path) == 0
        lines = (tmp_path / "prox_field.csv").read_text().splitlines()
        body = [ln for ln in lines if not ln.startswith("#")]
        assert body[0] == "w1,w2,e1,e2"
        assert len(body) == 11 * 11 + 1
        for row in body[1:]:
            w1, w2, e1, e2 = map(float, row.split(","))
            if math.hypot(w1, w2) < 1.0 / 3.0:
                assert (e1, e2) == (-w1, -w2)

    def test_metrics_identical(self, tmp_path, truth, capsys):
        other = tmp_path / "b.pgm"
        write_pgm(other, geometric(32) * 0.9)
        assert run("metrics", truth, other, truth) == 0
        out = capsys.readouterr().out.splitlines()
        assert out == ["ISNR\tinf", "SSIM\t1.0"]


class TestExitCodes:
    def test_unknown_key(self, tmp_path, truth):
        cfg = write_config(tmp_path / "c.cfg", bogus=1)
        assert run("degrade", truth, "--config", cfg) == 2

    def test_missing_file(self, tmp_path):
        assert run("degrade", tmp_path / "nope.pgm") == 4

    def test_bad_model(self, tmp_path, truth):
        cfg = write_config(tmp_path / "c.cfg", model="TGV", **{"noise.sigma": 0.1})
        assert run("restore", truth, "--config", cfg, "--out", tmp_path) == 2
