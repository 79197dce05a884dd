import math
import os
import pathlib

import pytest

import kronrec

CONFIGS = pathlib.Path(os.environ.get("KRONREC_CONFIG_DIR", pathlib.Path(__file__).parents[2] / "configs"))


def test_simulate_example():
    R = kronrec.simulate("T^1", "3/10", "(0.25, 0.55)", (0, 19))
    expected = [n for n in range(20) if (3 * n) % 10 in (3, 4, 5)]
    assert R.members() == expected
    assert len(R) == len(expected)
    assert 5 in R and 6 not in R
    assert R.window == (0, 19)
    assert kronrec.ReturnSet.from_rts(R.to_rts()) == R


def test_polynomial_shift_by_a_fifth():
    a = kronrec.simulate("T^1", "sqrt2", "(0.1, 0.4)", (-2000, 2000), polynomial="n^5 - n")
    b = kronrec.simulate("T^1", "sqrt2 + 1/5", "(0.1, 0.4)", (-2000, 2000), polynomial="n^5 - n")
    assert a == b


def test_half_interval_spectrum_and_reconstruction():
    N = 1 << 16
    R = kronrec.simulate("T^1", "sqrt2 - 1", "(0, 1/2)", (1, N))
    peaks = kronrec.spectrum(R)
    alpha = math.sqrt(2) - 1
    theta = (-alpha) % 1.0
    nearest = min(peaks, key=lambda p: min(abs(p.theta - theta), 1 - abs(p.theta - theta)))
    assert abs(abs(nearest.amplitude) - 1 / math.pi) < 5e-3
    assert abs(kronrec.cesaro_average(R, 0.0, N) - 0.5) < 1e-3

    rec = kronrec.reconstruct(peaks)
    assert rec["rank"] == 1 and rec["torsion"] == []
    beta = rec["alpha_image"]["torus"][0]
    assert min(abs(beta - alpha), abs(beta + alpha - 1)) < 1e-4


def test_skew_with_cylinder_set_matches_rotation():
    rot = kronrec.simulate("T^1", "sqrt2 - 1", "(0, 0.37)", (1, 4096))
    skew = kronrec.simulate_skew("sqrt2 - 1", "(0, 0.37) x T", (1, 4096))
    assert rot.members() == skew.members()


def test_stabilizer():
    two = kronrec.closure_stabilizer("T^1", "(-0.1, 0.1) | (0.4, 0.6)")
    assert not two["trivial"]
    assert kronrec.closure_stabilizer("T^1", "(0, 0.37)")["trivial"]


def test_gset():
    assert kronrec.gset_order("D_4") == 8
    assert kronrec.gset_is_simple("C_4", [0, 1])
    assert not kronrec.gset_is_simple("C_4", [0, 2])
    assert kronrec.gset_roundtrip("C_4", [0, 1])
    assert kronrec.gset_roundtrip("S_4", [0], base_point=2)


def test_errors_map_to_exceptions():
    with pytest.raises(kronrec.ShapeError):
        kronrec.simulate("T^1", "1/3", "(0, 1/2)", (5, 1))
    with pytest.raises(ValueError):
        kronrec.simulate("T^1", "pi", "(0, 1/2)", (0, 5))


def test_run_config(tmp_path):
    code, artifacts, summary = kronrec.run_config(CONFIGS / "simulate_example.cfg", tmp_path / "out")
    assert code == 0
    assert artifacts == ["return_set.rts", "manifest.json"]
    assert "6 return times" in summary

    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = simulate\nbogus = 1\n")
    with pytest.raises(kronrec.ConfigError, match="bad.cfg:2"):
        kronrec.run_config(bad, tmp_path / "bad")
    assert issubclass(kronrec.ConfigError, kronrec.Error)

    cap = tmp_path / "cap.cfg"
    cap.write_text("experiment = gset-search\ncatalog = S_5\n")
    with pytest.raises(kronrec.CapExceeded):
        kronrec.run_config(cap, tmp_path / "cap")
