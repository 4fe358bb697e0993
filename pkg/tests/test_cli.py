import json
import subprocess
import sys

import numpy as np
import pytest

from pottsrecon.cli import EXIT_DATA, EXIT_IO, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main, parse_signal
from pottsrecon.io import FormatError, read_raw, write_pgm, write_raw


def _metrics(out_dir):
    lines = (out_dir / "metrics.txt").read_text().splitlines()
    return dict(line.split("=", 1) for line in lines)


def _manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


def test_potts1d_example(capsys):
    assert main(["potts1d", "--signal", "1,1,5,5", "--gamma", "1"]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "breakpoints=2 levels=1.0,5.0 energy=1.0"


def test_potts1d_constant_and_large_gamma(capsys, tmp_path):
    assert main(["potts1d", "--signal", "3,3,3", "--gamma", "0.5"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("breakpoints= levels=3.0 ")
    (tmp_path / "s.csv").write_text("0\n1\n5\n2\n")
    assert main(["potts1d", "--input", str(tmp_path / "s.csv"), "--gamma", "1e6", "--prune"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("breakpoints= levels=2.0 ")


def test_potts1d_errors(capsys, tmp_path):
    assert main(["potts1d", "--signal", "1,x", "--gamma", "1"]) == EXIT_DATA
    assert main(["potts1d", "--signal", "1,nan", "--gamma", "1"]) == EXIT_DATA
    assert main(["potts1d", "--input", str(tmp_path / "missing.csv"), "--gamma", "1"]) == EXIT_IO
    with pytest.raises(SystemExit) as exc:
        main(["potts1d", "--signal", "1,2", "--gamma", "-1"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["potts1d", "--gamma", "1"])
    assert exc.value.code == EXIT_USAGE


def test_parse_signal():
    np.testing.assert_array_equal(parse_signal("1, 2,\n3,"), [1.0, 2.0, 3.0])
    with pytest.raises(FormatError):
        parse_signal(" , ")


def test_usage_errors(tmp_path):
    img = tmp_path / "a.raw"
    write_raw(img, np.zeros((4, 4)))
    assert main(["segment", "--input", str(img), "--output-dir", str(tmp_path / "o")]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["segment", "--input", str(img), "--gamma", "1", "--algo", "3", "--output-dir", str(tmp_path)])
    assert exc.value.code == EXIT_USAGE
    assert main(["segment", "--input", str(img), "--gamma", "1", "--lambda", "2", "--output-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["--threads", "0", "segment", "--input", str(img), "--gamma", "1", "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_io_and_format_errors(tmp_path):
    out = str(tmp_path / "o")
    assert main(["segment", "--input", str(tmp_path / "nope.pgm"), "--gamma", "1", "--output-dir", out]) == EXIT_IO
    (tmp_path / "bad.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
    assert main(["segment", "--input", str(tmp_path / "bad.pgm"), "--gamma", "1", "--output-dir", out]) == EXIT_DATA


def _half_plane(n=12):
    x = np.zeros((n, n))
    x[:, n // 2 :] = 1.0
    return x


@pytest.mark.parametrize("algo", ["1", "2"])
def test_segment_half_plane(tmp_path, capsys, algo):
    img = tmp_path / "h.pgm"
    write_pgm(img, _half_plane())
    out = tmp_path / "o"
    assert main(["segment", "--input", str(img), "--gamma", "0.2", "--algo", algo, "--output-dir", str(out)]) == EXIT_OK
    assert _metrics(out)["segments"] == "2"
    np.testing.assert_allclose(read_raw(out / "segmentation.raw"), _half_plane(), atol=1e-9)
    for name in ("segmentation.pgm", "labels.pgm", "trace.csv", "manifest.json"):
        assert (out / name).exists()
    assert "segments=2" in capsys.readouterr().out


def test_segment_huge_gamma_gives_mean(tmp_path):
    g = np.random.default_rng(0).uniform(size=(6, 7))
    write_raw(tmp_path / "g.raw", g)
    out = tmp_path / "o"
    assert main(["segment", "--input", str(tmp_path / "g.raw"), "--gamma", "1e6", "--output-dir", str(out)]) == EXIT_OK
    assert _metrics(out)["segments"] == "1"
    np.testing.assert_allclose(read_raw(out / "segmentation.raw"), g.mean(), rtol=1e-9)


def test_segment_tiny_gamma_near_identity(tmp_path):
    g = np.random.default_rng(1).uniform(size=(6, 7))
    write_raw(tmp_path / "g.raw", g)
    out = tmp_path / "o"
    assert main(["segment", "--input", str(tmp_path / "g.raw"), "--gamma", "1e-12", "--output-dir", str(out)]) == EXIT_OK
    np.testing.assert_allclose(read_raw(out / "segmentation.raw"), g, atol=1e-6)


@pytest.mark.parametrize("kernel", ["gaussian", "motion", "identity"])
def test_deblur_constant_input(tmp_path, kernel):
    write_raw(tmp_path / "c.raw", np.full((10, 10), 0.3))
    out = tmp_path / "o"
    argv = ["deblur", "--input", str(tmp_path / "c.raw"), "--kernel", kernel, "--gamma", "0.1", "--output-dir", str(out)]
    assert main(argv) == EXIT_OK
    assert _metrics(out)["segments"] == "1"
    np.testing.assert_allclose(read_raw(out / "reconstruction.raw"), 0.3, atol=1e-9)


def test_deblur_identity_round_trip(tmp_path):
    g = np.random.default_rng(2).uniform(size=(8, 9))
    write_raw(tmp_path / "g.raw", g)
    out = tmp_path / "o"
    argv = ["deblur", "--input", str(tmp_path / "g.raw"), "--kernel", "identity", "--gamma", "1e-12", "--output-dir", str(out)]
    assert main(argv) == EXIT_OK
    np.testing.assert_allclose(read_raw(out / "reconstruction.raw"), g, atol=1e-6)


def test_deblur_manifest_records_derived_values(tmp_path):
    x = np.zeros((12, 12))
    x[3:9, 4:10] = 1.0
    write_raw(tmp_path / "x.raw", x)
    out1, out2 = tmp_path / "a1", tmp_path / "a2"
    base = ["deblur", "--input", str(tmp_path / "x.raw"), "--simulate", "--kernel-size", "1", "--gamma", "0.05"]
    assert main(base + ["--algo", "1", "--output-dir", str(out1)]) == EXIT_OK
    d1 = _manifest(out1)["derived"]
    assert {"rho", "L_rho", "epsilon", "norm_A"} <= d1.keys()
    assert _manifest(out1)["parameters"]["gamma"] == 0.05
    assert main(base + ["--output-dir", str(out2)]) == EXIT_OK
    d2 = _manifest(out2)["derived"]
    assert {"t", "rho0", "rho_final", "L_rho_final", "eta", "tau"} <= d2.keys()
    assert d2["t"] == pytest.approx(d2["t_formula"])
    assert float(_metrics(out2)["mssim"]) > 0.9


def test_deblur_not_converged_exit_code(tmp_path):
    g = np.random.default_rng(3).uniform(size=(8, 8))
    write_raw(tmp_path / "g.raw", g)
    argv = ["deblur", "--input", str(tmp_path / "g.raw"), "--gamma", "0.1", "--max-iters", "2", "--output-dir", str(tmp_path / "o")]
    assert main(argv) == EXIT_NOT_CONVERGED
    assert _metrics(tmp_path / "o")["converged"] == "0"


def test_gauss3_preset(tmp_path):
    write_raw(tmp_path / "c.raw", np.full((8, 8), 0.5))
    out = tmp_path / "o"
    argv = ["deblur", "--input", str(tmp_path / "c.raw"), "--preset", "gauss3", "--algo", "1", "--kernel", "motion", "--output-dir", str(out)]
    assert main(argv) == EXIT_OK
    p = _manifest(out)["parameters"]
    assert (p["kernel"], p["kernel_size"], p["coupling"], p["gamma"]) == ("gaussian", 3.0, "full", 0.1)


def test_radon_zero_phantom(tmp_path):
    write_raw(tmp_path / "z.raw", np.zeros((16, 16)))
    out = tmp_path / "o"
    argv = ["radon", "--input", str(tmp_path / "z.raw"), "--angles", "6", "--noise", "0", "--output-dir", str(out)]
    assert main(argv) == EXIT_OK
    for name in ("sinogram.raw", "fbp.raw", "proposed.raw"):
        assert not np.any(read_raw(out / name))
    assert read_raw(out / "sinogram.raw").shape[0] == 6
    assert _manifest(out)["derived"]["num_detectors"] == read_raw(out / "sinogram.raw").shape[1]


def test_radon_dense_angles_fbp(tmp_path):
    out = tmp_path / "o"
    argv = ["radon", "--size", "64", "--angles", "180", "--noise", "0", "--max-iters", "1", "--output-dir", str(out)]
    assert main(argv) == EXIT_NOT_CONVERGED
    assert float(_metrics(out)["mssim_fbp"]) >= 0.8
    assert _manifest(out)["parameters"]["normalize"] is True


def test_radon_usage(tmp_path):
    assert main(["radon", "--size", "8", "--output-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["radon", "--angles", "0", "--output-dir", str(tmp_path)]) == EXIT_USAGE


def test_determinism(tmp_path):
    g = np.random.default_rng(4).uniform(size=(10, 10))
    write_raw(tmp_path / "g.raw", g)
    outs = []
    for i, threads in enumerate(([], ["--threads", "1"])):
        out = tmp_path / f"o{i}"
        argv = [*threads, "deblur", "--input", str(tmp_path / "g.raw"), "--gamma", "0.05", "--noise", "0.05", "--seed", "9", "--output-dir", str(out)]
        assert main(argv) == EXIT_OK
        outs.append(out)
    for name in ("reconstruction.raw", "labels.pgm", "trace.csv", "data.raw"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pottsrecon", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
