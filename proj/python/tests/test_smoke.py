import math

import numpy as np
import pytest

import sublab


def heisenberg_solve_config(**overrides):
    cfg = {
        "frame": "heisenberg",
        "box": {"lower": [-1, -1, -1], "upper": [1, 1, 1]},
        "dims": [9, 9, 9],
        "T": 0.05,
        "initial": "x^2",
        "boundary": "x^2 + 2*t",
        "exact": "x^2 + 2*t",
    }
    cfg.update(overrides)
    return cfg


def test_frame_commutators():
    f = sublab.load_frame("heisenberg")
    assert f.dim == 3
    entries = f.commutators()
    assert [e["degree"] for e in entries] == [1, 1, 2]
    # [X1, X2] = d/dz for X1 = (1, 0, -y/2), X2 = (0, 1, x/2).
    bracket = entries[2]["components"]
    assert bracket[0] == "0" and bracket[1] == "0" and float(bracket[2]) == 1.0
    assert f.hormander_rank([0.3, -0.2, 0.1]) == 3
    assert sublab.load_frame("commuting3").hormander_rank([0.0, 0.0, 0.0]) == 2


def test_family_matrices():
    fam = sublab.load_frame("heisenberg").family(0.25)
    x = [0.4, -0.6, 0.2]
    frame = fam.rescaled_frame(x)
    assert frame.shape == (3, fam.size)
    np.testing.assert_allclose(frame[:, 0], [1.0, 0.0, 0.3])
    np.testing.assert_allclose(frame[:, 1], [0.0, 1.0, 0.2])
    assert fam.extended_frame(x).shape == (3, fam.extended_size)


def test_distance_field_vertical_axis():
    fam = sublab.load_frame("heisenberg").family(0.0)
    field = sublab.distance_field(fam, [0, 0, 0], [-0.6, -0.6, -0.1], [0.6, 0.6, 0.1], nodes=21)
    assert field.values.shape == (21, 21, 21)
    assert field([0.0, 0.0, 0.0]) == 0.0
    # Horizontal segments are geodesics.
    assert field([0.3, 0.0, 0.0]) == pytest.approx(0.3, rel=0.05)
    z = 0.05
    assert field([0.0, 0.0, z]) == pytest.approx(2 * math.sqrt(math.pi * z), rel=0.15)


def test_doubling_homogeneous_dimension():
    fam = sublab.load_frame("heisenberg").family(0.0)
    d = sublab.doubling_ratio(fam, [0, 0, 0], 0.1, samples=100000, seed=3)
    assert d["ratio"] == pytest.approx(16.0, rel=0.05)
    again = sublab.doubling_ratio(fam, [0, 0, 0], 0.1, samples=100000, seed=3)
    assert again["ratio"] == d["ratio"]


def test_solve_manufactured():
    out = sublab.solve(heisenberg_solve_config())
    assert out["values"].shape[1:] == (9, 9, 9)
    assert out["values"].shape[0] == len(out["times"])
    assert out["times"][-1] == pytest.approx(0.05)
    assert out["max_error"] <= 1e-8


def test_errors_are_typed():
    with pytest.raises(sublab.CflViolation):
        sublab.solve(heisenberg_solve_config(tau=0.5))
    with pytest.raises(sublab.ConfigError):
        sublab.solve(heisenberg_solve_config(colour="red"))
    with pytest.raises(sublab.ParseError):
        sublab.solve(heisenberg_solve_config(initial="x +"))
    with pytest.raises(sublab.ParseError):
        sublab.parse_frame('{"dim": 2, "generators": [["1", "0"], ["0", "x*"]]}')
    assert issubclass(sublab.BallEscapesBox, sublab.SublabError)


def test_cfl_limit_one_dimensional_heat():
    cfg = {
        "frame": "euclid2",
        "box": {"lower": [0, 0], "upper": [1, 1]},
        "dims": [11, 11],
        "T": 0.01,
        "initial": "0",
    }
    h = 0.1
    # Two independent axes, unit diffusion: monotone limit h^2 / 4.
    assert sublab.cfl_limit(cfg, "monotone") == pytest.approx(h * h / 4)
