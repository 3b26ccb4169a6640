"""Release acceptance suite.

One test per acceptance criterion, each asserting its stated tolerance
and runtime budget.  Run with ``pytest tests/test_acceptance.py -v``
for the per-criterion pass/fail lines; add ``-s`` for the detail lines.
"""

import dataclasses
import json
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from qmemsim.config import ScenarioConfig, config_from_dict
from qmemsim.fitting import closed_form_fidelity
from qmemsim.memory import MemoryConfig, PhaseMatchConfig, theta_prime, walk_off_r0
from qmemsim.polarization import (
    density_from_stokes,
    density_of,
    ket_from_named,
    stokes_of,
)
from qmemsim.scenarios import (
    CALIBRATION_TARGET_ERRORS,
    DEFAULT_CALIBRATION_TARGETS,
    calibrate_table,
    run_fig3,
    run_fig4,
    run_fig5,
    run_table1,
    tomography_point,
)
from qmemsim.tomography import (
    DEFAULT_INPUT_LABELS,
    identity_chi,
    process_fidelity,
    process_matrix,
    state_estimate,
)
from conftest import apply_kraus, chi_from_kraus, random_cptp_kraus, random_density


def _report(criterion: int, detail: str) -> None:
    print(f"criterion {criterion}: PASS ({detail})")


def test_criterion_1_closed_form_oracle_equivalence():
    # Expected-counts pipeline fidelity must equal the closed-form
    # expression within 1e-6 on a storage-time grid and on random
    # (gamma, R, N, eta) operating points.
    start = time.monotonic()
    cfg = ScenarioConfig()
    worst = 0.0
    for t in np.linspace(0.0, 10.0, 10):
        point = tomography_point(cfg, "S2", float(t), expected=True)
        ref = closed_form_fidelity(
            float(t), r0=0.127, tau=2.9, gamma0=1.0, sigma_gamma=104.0
        )
        worst = max(worst, abs(point["fidelity"] - float(ref)))
    draws = np.random.default_rng(202608)
    for _ in range(100):
        gamma = float(draws.uniform(1e-6, 1.0))
        r = float(draws.uniform(0.01, 0.2))
        background = float(draws.uniform(1e-5, 1e-3))
        eta = float(draws.uniform(0.1, 0.9))
        custom = config_from_dict(
            {
                "channels": [{"id": "X", "theta": 0.0}],
                "memory": {"r0_axis": r, "static_gamma": {"X": gamma}},
                "detection": {"eta_total": eta, "background_n": background},
            }
        )
        point = tomography_point(custom, "X", 0.0, expected=True)
        ref = closed_form_fidelity(
            0.0,
            r0=r,
            tau=2.9,
            gamma0=gamma,
            sigma_gamma=104.0,
            eta=eta,
            background=background,
        )
        worst = max(worst, abs(point["fidelity"] - float(ref)))
    elapsed = time.monotonic() - start
    assert worst < 1e-6
    assert elapsed < 10.0
    _report(1, f"max pipeline deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_efficiency_decay_reproduction():
    start = time.monotonic()
    exact = run_fig4(ScenarioConfig(), expected_counts=True).meta["fit"]
    assert exact["converged"]
    assert abs(exact["params"]["r0"] - 0.127) < 1e-6
    assert abs(exact["params"]["tau"] - 2.9) < 1e-6

    base = ScenarioConfig()
    assert len(base.storage_times) == 12
    assert base.pulses_per_setting == 100_000
    hits = 0
    for seed in range(100):
        noisy = run_fig4(dataclasses.replace(base, seed=seed))
        fit = noisy.meta["fit"]
        if "params" in fit and abs(fit["params"]["tau"] - 2.9) <= 0.1 * 2.9:
            hits += 1
    elapsed = time.monotonic() - start
    assert hits >= 95
    assert elapsed < 30.0
    _report(2, f"noise-free round trip exact, tau within 10% in {hits}/100 seeds, {elapsed:.1f}s")


def test_criterion_3_dephasing_curve_reproduction():
    start = time.monotonic()
    model_6ms = float(closed_form_fidelity(6.0, r0=0.127, tau=2.9, gamma0=1.0, sigma_gamma=104.0))
    assert abs(model_6ms - 0.7925) <= 0.002

    fit = run_fig5(ScenarioConfig(), expected_counts=True).meta["fit"]
    assert fit["converged"]
    assert not fit["at_bound"]
    rel_err = abs(fit["params"]["sigma_gamma"] - 104.0) / 104.0
    elapsed = time.monotonic() - start
    assert rel_err < 0.01
    assert elapsed < 30.0
    _report(3, f"F(6 ms) = {model_6ms:.4f}, sigma_gamma off by {rel_err:.2e}, {elapsed:.1f}s")


def test_criterion_4_fidelity_table_reproduction():
    start = time.monotonic()
    fragment = calibrate_table(ScenarioConfig())
    cfg = config_from_dict({"memory": {"static_gamma": fragment["memory"]["static_gamma"]}})
    assert cfg.pulses_per_setting == 100_000
    assert cfg.mc_resamples == 500

    art = run_table1(cfg)
    worst_pull = 0.0
    for channel, theta, fidelity, sigma, model in art.rows:
        target = DEFAULT_CALIBRATION_TARGETS[channel]
        bar = CALIBRATION_TARGET_ERRORS[channel]
        assert abs(fidelity - target) <= bar, (channel, fidelity, target, bar)
        worst_pull = max(worst_pull, abs(fidelity - target) / bar)

    # Monte Carlo error bars must scale as 1/sqrt(M): a 9x pulse-budget
    # increase shrinks sigma by 3x, within 20%.
    small = tomography_point(
        dataclasses.replace(cfg, pulses_per_setting=10_000, mc_resamples=400), "S2", 0.005
    )
    big = tomography_point(
        dataclasses.replace(cfg, pulses_per_setting=90_000, mc_resamples=400), "S2", 0.005
    )
    ratio = small["sigma"] / big["sigma"]
    elapsed = time.monotonic() - start
    assert abs(ratio - 3.0) <= 0.6
    assert elapsed < 120.0
    _report(
        4,
        f"all 7 rows inside their error bars (worst pull {worst_pull:.2f}), "
        f"sigma ratio {ratio:.2f} vs 3, {elapsed:.1f}s",
    )


def test_criterion_5_walk_off_profile_reproduction():
    art = run_fig3(ScenarioConfig())
    effs = [row[2] for row in art.rows]
    assert len(effs) == 7
    assert abs(effs[0] - 0.14) / 0.14 < 0.005
    assert abs(effs[-1] - 0.08) / 0.08 < 0.005
    assert all(a > b for a, b in zip(effs, effs[1:]))
    # calibration identity at zero storage time
    assert walk_off_r0(0.0, MemoryConfig()) == 0.14
    _report(5, f"R(0) = {effs[0]:.4f}, R(5) = {effs[-1]:.4f}, monotone")


def test_criterion_6_tomography_property_suite():
    rng = np.random.default_rng(6)

    for _ in range(50):
        rho = random_density(rng)
        assert np.max(np.abs(density_from_stokes(stokes_of(rho)) - rho)) < 1e-12

    for _ in range(200):
        raw = rng.uniform(-1.6, 1.6, size=3)
        est = state_estimate(raw)
        assert np.linalg.eigvalsh(est.rho).min() >= -1e-12
        assert abs(np.trace(est.rho).real - 1.0) < 1e-12

    inputs = [density_of(ket_from_named(label)) for label in DEFAULT_INPUT_LABELS]
    worst = 0.0
    for _ in range(50):
        kraus = random_cptp_kraus(rng)
        chi_true = chi_from_kraus(kraus)
        pairs = [(rho, apply_kraus(kraus, rho)) for rho in inputs]
        worst = max(worst, float(np.max(np.abs(process_matrix(pairs) - chi_true))))
    assert worst < 1e-8

    for _ in range(20):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        chi = g @ g.conj().T
        chi /= np.trace(chi).real
        assert abs(process_fidelity(chi, identity_chi()) - chi[0, 0].real) < 1e-10
    _report(6, f"50 CPTP inversions, worst reconstruction error {worst:.2e}")


def test_criterion_7_phase_matching_identity():
    pm = PhaseMatchConfig()
    assert pm.delta == 1.81e-5
    thetas = np.linspace(0.0, 5.0, 501)
    devs = [abs(theta_prime(float(t), pm) - float(t)) for t in thetas]
    assert max(devs) < 1e-4

    exact = PhaseMatchConfig(delta=0.0)
    for t in thetas:
        assert theta_prime(float(t), exact) == float(t)
    _report(7, f"max |theta' - theta| = {max(devs):.2e} deg")


def test_criterion_8_determinism(tmp_path):
    start = time.monotonic()
    cfg_path = tmp_path / "small.json"
    cfg_path.write_text(
        json.dumps(
            {
                "pulses_per_setting": 2000,
                "mc_resamples": 8,
                "output_dir": str(tmp_path / "out"),
            }
        )
    )

    def run_cli(target):
        proc = subprocess.run(
            [sys.executable, "-m", "qmemsim", "reproduce", target, "--config", str(cfg_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        out = tmp_path / "out"
        return {
            name: (out / name).read_bytes()
            for name in (f"{target}.csv", f"{target}.json")
        }

    for target in ("fig3", "table1"):
        first = run_cli(target)
        second = run_cli(target)
        assert first == second

    # Parallelism invariance: per-unit RNG streams make threaded and
    # sequential evaluation bit-identical.
    cfg = config_from_dict({"pulses_per_setting": 2000, "mc_resamples": 8})
    sequential = run_table1(cfg)
    with ThreadPoolExecutor(max_workers=7) as pool:
        points = list(
            pool.map(lambda ch: tomography_point(cfg, ch.id, 0.005), cfg.channels)
        )
    for row, point in zip(sequential.rows, points):
        assert row[2] == point["fidelity"]
        assert row[3] == point["sigma"]
    elapsed = time.monotonic() - start
    _report(8, f"byte-identical reruns, threaded == sequential, {elapsed:.1f}s")
