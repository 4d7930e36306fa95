import math

import numpy as np
import pytest

import singular_drift as sd


SPEC = {"family": "random-fourier", "seed": 4, "beta": 0.25, "amplitude": 0.2}


def small_drift():
    return sd.generate_drift(SPEC, modes=32, steps=16)


def test_drift_shape_and_assumptions():
    b = small_drift()
    assert (b.nodes, b.components, b.modes) == (17, 1, 32)
    vals = b.values()
    assert vals.shape == (17, 1, 32)
    assert abs(vals.mean()) < 1e-12  # no zero mode
    report = sd.assumption_check(b, 0.25, 3.0)
    assert report["finite"]


def test_constant_drift_solution():
    b = sd.generate_drift({"family": "smooth-test", "amplitude": 0.0}, modes=16, steps=32)
    v, report = sd.solve_pde(b, 1.0)
    assert sd.value_sup(v) == 0.0
    assert report["iterations"] == 1


def test_calibrate_and_simulate(tmp_path):
    b = small_drift()
    lam, trace, v = sd.calibrate(b)
    assert trace[-1][0] == lam
    u = sd.to_backward(v)
    assert sd.gradient_sup(u) <= 0.5
    x = sd.simulate_virtual(u, {"x0": [0.0], "steps": 16, "paths": 50, "seed": 3, "lambda": lam})
    assert x.shape == (50, 17, 1)
    assert np.all(np.isfinite(x))

    path = tmp_path / "u.bin"
    u.save(str(path), "u")
    back = sd.TimeField.load(str(path))
    assert np.array_equal(back.values(), u.values())


def test_zero_drift_is_brownian():
    b = sd.generate_drift({"family": "smooth-test", "amplitude": 0.0}, modes=16, steps=8)
    x = sd.simulate_classical(b, {"x0": [1.0], "steps": 8, "paths": 4000, "seed": 11})
    end = x[:, -1, 0]
    assert abs(end.mean() - 1.0) < 4 * math.sqrt(1 / 4000)


def test_statistics():
    rng = np.random.default_rng(0)
    a = rng.normal(size=1000)
    assert sd.wasserstein1(a, a + 0.5) == pytest.approx(0.5)
    assert sd.ks_stat(a, a) == 0.0
    trend = sd.kendall_trend([5, 4, 3, 2, 1])
    assert trend["tau"] == -1.0 and trend["p_decreasing"] == pytest.approx(1 / 120)
    assert sd.gamma_integral(2.0, 0.0, 0.0, 1.0) == pytest.approx((1 - math.exp(-2)) / 2)
    assert sd.gamma_bound_check(4.0, 0.5, 0.0, math.inf)


def test_study_and_errors(tmp_path):
    cfg = {"drift": SPEC, "N": 32, "M": 16, "sim": {"steps": 16, "paths": 200}, "bootstrap": 20}
    report = sd.run_study("lambda", cfg, tmp_path)
    assert report["study"] == "lambda"
    assert (tmp_path / report["results_dir"].split("/")[-1] / "manifest.json").exists()
    with pytest.raises(sd.Error):
        sd.run_study("nonsense", cfg)
    with pytest.raises(sd.Error):
        sd.generate_drift({"beta": 0.7})
