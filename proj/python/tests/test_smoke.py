import math

import numpy as np
import pytest

import shlab


def test_version():
    assert shlab.__version__


def test_simulate_shape_and_validation():
    traj = shlab.simulate(1.0, 0.01)
    assert traj.shape == (101, 4)
    assert traj[0, 1:] == pytest.approx([1.0, 1.0, 20.0])
    with pytest.raises(ValueError):
        shlab.simulate(0.0, 0.01)


def test_lorenz_exponents():
    lp, l0, lm = shlab.lyapunov_spectrum(500.0)
    assert 0.8 < lp < 1.0
    assert abs(l0) < 0.02
    assert lp + l0 + lm == pytest.approx(-(10 + 1 + 8 / 3), rel=0.01)


def test_geometric_map_matches_formula():
    xs = [-0.7, -0.2, 0.3, 0.9]
    ys = shlab.map_eval("geometric", xs)
    for x, y in zip(xs, ys):
        assert y == pytest.approx(math.copysign(1.0, x) * (1.95 * abs(x) ** 0.52 - 1.0), abs=1e-12)


def test_doubling_density_is_lebesgue():
    res = shlab.acim("doubling", 256)
    assert len(res["densities"]) == 1
    assert np.allclose(res["densities"][0], 1.0, atol=1e-10)


def test_quotient_singular_set():
    res = shlab.quotient_map(500)
    assert res["gamma0"] == pytest.approx([-1.0, 0.0, 1.0], abs=1e-6)


def test_hyperbolic_times_positive():
    res = shlab.hyperbolic_time_frequency("geometric", seeds=5, N=2000)
    assert res["positive"] == 5


def test_lifted_constant_roof():
    value, _ = shlab.lifted_average(3.0, 2000)
    assert value == pytest.approx(1.5, abs=1e-12)


def test_alignment_identity():
    t = np.linspace(0, 2, 201)
    pts = np.stack([np.cos(t), np.sin(t), 0 * t], axis=1).tolist()
    sup, unaligned, h = shlab.monotone_alignment(pts, pts)
    assert sup == 0.0 and unaligned == 0.0
    assert h == list(range(201))


def test_sensitivity_separates():
    res = shlab.sensitivity(perturbations=5)
    assert res["capped"] == 0
    assert 5.0 < res["median"] < 30.0
