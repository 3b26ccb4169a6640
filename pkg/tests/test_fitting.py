import numpy as np
import pytest

from qmemsim.detection import DetectionConfig
from qmemsim.errors import FitError
from qmemsim.fitting import (
    DecayDataset,
    achievable_fidelity_range,
    calibrate_static_gamma,
    closed_form_fidelity,
    fidelity_at,
    fit_exponential,
    fit_sigma_gamma,
)
from qmemsim.memory import DEFAULT_CHANNELS, MemoryConfig

S2_PARAMS = dict(r0=0.127, tau=2.9, gamma0=1.0, sigma_gamma=104.0)


def test_closed_form_reference_values():
    assert abs(closed_form_fidelity(0.0, **S2_PARAMS) - 0.9656974844821954) < 1e-15
    assert abs(closed_form_fidelity(0.005, **S2_PARAMS) - 0.9656410018596912) < 1e-15
    assert abs(closed_form_fidelity(6.0, **S2_PARAMS) - 0.7924966388150465) < 1e-15


def test_closed_form_zero_signal_floor():
    # No signal: post-selection keeps only background, F = N / 4N = 1/4.
    assert closed_form_fidelity(0.0, 0.0, 2.9, 1.0, 104.0) == 0.25


def test_closed_form_vectorized():
    t = np.array([0.0, 1.0, 6.0])
    out = closed_form_fidelity(t, **S2_PARAMS)
    assert out.shape == (3,)
    assert abs(out[2] - 0.7924966388150465) < 1e-15


def test_closed_form_validation():
    with pytest.raises(ValueError):
        closed_form_fidelity(0.0, -0.1, 2.9, 1.0, 104.0)
    with pytest.raises(ValueError):
        closed_form_fidelity(0.0, 0.1, 2.9, 1.5, 104.0)
    with pytest.raises(ValueError):
        closed_form_fidelity(0.0, 0.1, -1.0, 1.0, 104.0)


def test_fidelity_at_matches_closed_form():
    mem = MemoryConfig()
    det = DetectionConfig()
    s2 = DEFAULT_CHANNELS[2]
    for t in (0.0, 0.005, 2.2, 6.0):
        want = closed_form_fidelity(t, **S2_PARAMS)
        assert abs(fidelity_at(t, s2, mem, det) - want) < 1e-15


def test_fidelity_at_uses_static_gamma():
    mem = MemoryConfig(static_gamma={"S2": 0.8917592722497402})
    det = DetectionConfig()
    s2 = DEFAULT_CHANNELS[2]
    assert abs(fidelity_at(0.005, s2, mem, det) - 0.914) < 1e-12


def test_dataset_validation():
    with pytest.raises(ValueError):
        DecayDataset(np.array([1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        DecayDataset(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        DecayDataset(np.array([-1.0, 1.0]), np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        DecayDataset(np.array([0.0, 1.0]), np.array([1.0, 0.5]), np.array([0.1, 0.0]))


def test_fit_exponential_exact_recovery(rng):
    t = np.linspace(0.0, 8.0, 12)
    for _ in range(10):
        a = rng.uniform(0.05, 0.3)
        tau = rng.uniform(0.8, 5.0)
        report = fit_exponential(DecayDataset(t, a * np.exp(-t / tau)))
        assert report.converged
        assert abs(report.params["r0"] - a) / a < 1e-9
        assert abs(report.params["tau"] - tau) / tau < 1e-9


def test_fit_exponential_noisy_weighted(rng):
    t = np.linspace(0.005, 6.0, 12)
    truth = 0.127 * np.exp(-t / 2.9)
    sigma = np.full_like(t, 1e-3)
    values = truth + rng.normal(scale=sigma)
    report = fit_exponential(DecayDataset(t, values, sigma))
    assert report.converged
    assert abs(report.params["tau"] - 2.9) / 2.9 < 0.1
    assert set(report.uncertainties) == {"r0", "tau"}
    assert report.uncertainties["tau"] > 0


def test_fit_exponential_rejects_nonpositive_data():
    t = np.linspace(0.0, 5.0, 6)
    with pytest.raises(FitError):
        fit_exponential(DecayDataset(t, np.zeros_like(t)))


def test_fit_sigma_gamma_noise_free_recovery():
    t = np.array([0.005, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0])
    for sigma_true in (50.0, 104.0, 300.0):
        values = closed_form_fidelity(t, 0.127, 2.9, 1.0, sigma_true)
        report = fit_sigma_gamma(DecayDataset(t, values), r0=0.127, tau=2.9, gamma0=1.0)
        assert report.converged
        assert not report.at_bound
        got = report.params["sigma_gamma"]
        assert abs(got - sigma_true) / sigma_true < 1e-6


def test_fit_sigma_gamma_flags_bracket_edge():
    # A flat dephasing envelope carries no width information; the search
    # runs to the bracket edge and must say so instead of failing.
    t = np.linspace(0.005, 6.0, 12)
    values = closed_form_fidelity(t, 0.127, 2.9, 1.0, 1e9)
    report = fit_sigma_gamma(DecayDataset(t, values), r0=0.127, tau=2.9, gamma0=1.0)
    assert report.at_bound


def test_calibrate_round_trip(rng):
    for _ in range(25):
        r0 = rng.uniform(0.02, 0.2)
        gamma0 = rng.uniform(0.0, 1.0)
        t = rng.uniform(0.0, 6.0)
        target = closed_form_fidelity(t, r0, 2.9, gamma0, 104.0)
        got = calibrate_static_gamma(target, t, r0, 2.9, 104.0)
        assert abs(got - gamma0) < 1e-10


def test_calibrate_reference_channel_values():
    # Exact algebraic inversions at the table storage time.
    cases = {
        0.14: (0.902, 0.8607934896046422),
        0.127: (0.914, 0.8917592722497402),
        0.0800023536228853: (0.895, 0.8883186572593773),
    }
    for r0, (target, gamma0) in cases.items():
        got = calibrate_static_gamma(target, 0.005, r0, 2.9, 104.0)
        assert abs(got - gamma0) < 1e-12


def test_calibrate_rejects_unreachable_target():
    floor, ceiling = achievable_fidelity_range(0.005, 0.127, 2.9, 104.0)
    assert 0.4 < floor < ceiling < 1.0
    with pytest.raises(FitError, match="achievable"):
        calibrate_static_gamma(ceiling + 0.01, 0.005, 0.127, 2.9, 104.0)
    with pytest.raises(FitError, match="achievable"):
        calibrate_static_gamma(floor - 0.01, 0.005, 0.127, 2.9, 104.0)


def test_calibrate_rejects_zero_signal():
    with pytest.raises(FitError, match="signal"):
        calibrate_static_gamma(0.9, 0.005, 0.0, 2.9, 104.0)
