"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion
lines; every criterion asserts both its physics tolerance and its runtime
budget.
"""

import math
import time

import numpy as np
import pytest

from eitcool.chain import BeamGeometry, TrapConfig, compute_modes
from eitcool.collective import (ConstantDrive, SweepProfile,
                                brute_force_reference, rap_fock_fidelities,
                                rap_transfer, reduced_reference,
                                sideband_spectrum)
from eitcool.constants import TWO_PI
from eitcool.fits import (ThermalDistribution, cooling_rate_fit,
                          heating_rate_fit, histogram_model,
                          thermal_fit_histogram)
from eitcool.collective import histogram_sampler
from eitcool.lindblad import LambdaSystem, simulate_eit_cooling
from eitcool.rates import (EITBeams, cooling_rate, inverse_light_shift,
                           light_shift, rate_coefficients, steady_state_nbar)

MHZ = TWO_PI * 1e6


class Criterion:
    """Collects checks for one criterion and prints a summary line."""

    def __init__(self, number, description, budget_s):
        self.number = number
        self.description = description
        self.budget_s = budget_s
        self.failures = []
        self.details = []

    def check(self, ok, detail):
        (self.details if ok else self.failures).append(detail)

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.monotonic() - self.t0
        if exc_type is not None:
            print(f"CRITERION {self.number}: FAIL ({exc}) [{elapsed:.1f}s]")
            return False
        if elapsed > self.budget_s:
            self.failures.append(
                f"runtime {elapsed:.1f}s exceeds {self.budget_s:.0f}s budget")
        status = "PASS" if not self.failures else "FAIL"
        info = "; ".join(self.failures if self.failures else self.details)
        print(f"CRITERION {self.number} ({self.description}): {status} "
              f"[{elapsed:.1f}s] {info}")
        assert not self.failures, f"criterion {self.number}: {self.failures}"
        return False


def geometry_setup1():
    s = math.sqrt(0.375)
    return BeamGeometry(wavelength=397e-9, unit_k_sigma=(1.0, 0.0, 0.0),
                        unit_k_pi=(0.5, s, s))


def test_criterion_01_two_ion_mode_reproduction():
    with Criterion(1, "two-ion out-of-phase modes", 1.0) as c:
        trap = TrapConfig(2, 40.0, 1.13 * MHZ, 3.29 * MHZ, 3.84 * MHZ)
        ms = compute_modes(trap)
        got = np.array([ms.frequencies("axial")[1],
                        ms.frequencies("radial_1")[0],
                        ms.frequencies("radial_2")[0]]) / MHZ
        for value, expected in zip(got, (1.96, 3.09, 3.67)):
            c.check(abs(value - expected) / expected < 0.01,
                    f"{value:.4f} vs {expected} MHz")


def test_criterion_02_long_chain_radial_structure():
    with Criterion(2, "nine/eighteen-ion radial structure", 5.0) as c:
        ms9 = compute_modes(TrapConfig(9, 40.0, 0.50 * MHZ, 2.59 * MHZ,
                                       2.76 * MHZ))
        rad9 = np.concatenate([ms9.frequencies("radial_1"),
                               ms9.frequencies("radial_2")]) / MHZ
        spread = rad9.max() - rad9.min()
        c.check(abs(spread - 1.2) / 1.2 < 0.15,
                f"nine-ion spread {spread:.3f} MHz vs 1.2 MHz")
        ms18 = compute_modes(TrapConfig(18, 40.0, 0.21 * MHZ, 2.68 * MHZ,
                                        2.71 * MHZ))
        rad18 = np.concatenate([ms18.frequencies("radial_1"),
                                ms18.frequencies("radial_2")]) / MHZ
        c.check(abs(rad18.min() - 2.08) / 2.08 < 0.05,
                f"eighteen-ion lowest radial {rad18.min():.3f} MHz vs 2.08")


def test_criterion_03_light_shift_consistency():
    with Criterion(3, "light shift and algebraic inverse", 1.0) as c:
        beams = EITBeams(omega_sigma=30.0 * MHZ, omega_pi=0.0,
                         delta=106.0 * MHZ, delta_pi=106.0 * MHZ,
                         gamma=21.57 * MHZ)
        shift = light_shift(beams)
        c.check(abs(shift / MHZ - 2.2) / 2.2 < 0.10,
                f"shift {shift / MHZ:.4f} MHz vs 2.2 MHz setting")
        rng = np.random.default_rng(31)
        worst = 0.0
        for _ in range(100):
            target = 10 ** rng.uniform(4.5, 7.5)
            delta = 10 ** rng.uniform(6.0, 9.0)
            sigma = inverse_light_shift(target, delta)
            b = EITBeams(omega_sigma=sigma, omega_pi=0.0, delta=delta,
                         delta_pi=delta, gamma=1e8)
            worst = max(worst, abs(light_shift(b) - target) / target)
        c.check(worst < 1e-12, f"worst inverse round-trip {worst:.2e}")


def test_criterion_04_resonance_identity():
    with Criterion(4, "red-rate resonance identity", 30.0) as c:
        rng = np.random.default_rng(4)
        worst_id, worst_arg = 0.0, 0.0
        for _ in range(20):
            beams = EITBeams(omega_sigma=rng.uniform(15, 60) * MHZ,
                             omega_pi=rng.uniform(0.5, 6.0) * MHZ,
                             delta=rng.uniform(60, 200) * MHZ,
                             delta_pi=0.0, gamma=rng.uniform(8, 35) * MHZ)
            shift = light_shift(beams)
            rc = rate_coefficients(beams, shift)
            ref = beams.omega_pi**2 / beams.gamma
            worst_id = max(worst_id, abs(rc.a_minus - ref) / ref)
            grid = np.arange(max(shift - 2.0 * MHZ, 0.01 * MHZ),
                             shift + 2.0 * MHZ, 0.01 * MHZ)
            a_minus = np.array([rate_coefficients(beams, w).a_minus
                                for w in grid])
            worst_arg = max(worst_arg,
                            abs(grid[np.argmax(a_minus)] - shift))
        c.check(worst_id < 1e-12, f"identity deviation {worst_id:.2e}")
        c.check(worst_arg <= 0.01 * MHZ,
                f"argmax offset {worst_arg / MHZ * 1e3:.1f} kHz on 10 kHz grid")


def test_criterion_05_ground_state_cooling_band():
    with Criterion(5, "ground-state cooling band", 1.0) as c:
        beams = EITBeams(
            omega_sigma=inverse_light_shift(2.2 * MHZ, 100.0 * MHZ),
            omega_pi=4.0 * MHZ, delta=100.0 * MHZ, delta_pi=100.0 * MHZ,
            gamma=21.57 * MHZ)
        shift = light_shift(beams)
        nss = steady_state_nbar(rate_coefficients(beams, shift))
        ref = (21.57 / 400.0) ** 2
        c.check(abs(nss - ref) / ref < 0.30,
                f"resonant nbar {nss:.5f} vs (G/4D)^2={ref:.5f}")
        grid = np.linspace(0.8 * MHZ, 4.5 * MHZ, 371)
        cold = []
        for w in grid:
            rc = rate_coefficients(beams, w)
            cold.append(rc.a_minus > rc.a_plus
                        and steady_state_nbar(rc) < 0.1)
        band = np.ptp(grid[np.array(cold)])
        c.check(band > 1.0 * MHZ, f"nbar<0.1 band {band / MHZ:.2f} MHz")


def test_criterion_06_lindblad_oracle_agreement():
    with Criterion(6, "master-equation vs rate model", 120.0) as c:
        beams = EITBeams(omega_sigma=30.0 * MHZ, omega_pi=6.0 * MHZ,
                         delta=100.0 * MHZ, delta_pi=100.0 * MHZ,
                         gamma=21.57 * MHZ)  # probe ratio at the 0.2 bound
        shift = light_shift(beams)
        rc = rate_coefficients(beams, shift)
        eta = 0.05
        rate_model = cooling_rate(eta, rc)
        nss_model = steady_state_nbar(rc)
        sys_ = LambdaSystem(beams=beams, fock_cutoff=15, eta_total=eta,
                            mode_frequency=shift)
        res = simulate_eit_cooling(sys_, duration=12.0 / rate_model,
                                   nbar0=2.0, samples=240)
        fit = cooling_rate_fit(res.times, res.nbar)
        nss_sim = fit.params["n_eq"]
        rate_sim = fit.params["rate"]
        c.check(abs(nss_sim - nss_model) / nss_model < 0.25,
                f"nbar_ss {nss_sim:.5f} vs {nss_model:.5f}")
        c.check(abs(rate_sim - rate_model) / rate_model < 0.25,
                f"R {rate_sim:.3e} vs {rate_model:.3e} 1/s")


def test_criterion_07_reduced_basis_correctness():
    with Criterion(7, "reduced ladder vs full space", 30.0) as c:
        eta = np.array([0.08, 0.08])
        drive = ConstantDrive(duration=180e-6, rabi_hz=60e3, detuning_hz=2e3)
        worst = 0.0
        for n in (1, 2, 3):
            bf = brute_force_reference(2, eta, n, n + 4, drive, steps=512,
                                       samples=32)
            rd = reduced_reference(2, eta, n, drive, steps=512, samples=32)
            worst = max(worst,
                        float(np.max(np.abs(bf.excited_probs
                                            - rd.excited_probs))))
        c.check(worst < 1e-8, f"max trajectory deviation {worst:.2e}")


def test_criterion_08_rap_mapping():
    with Criterion(8, "RAP phonon mapping", 300.0) as c:
        n_ions = 4
        eta = np.full(n_ions, 0.08)
        sweep = SweepProfile(duration=4e-3, span_hz=50e3, peak_rabi_hz=200e3)
        fid = rap_fock_fidelities(n_ions, eta, sweep, range(n_ions + 1))
        c.check(bool(np.all(fid >= 0.95)),
                "fidelities n=0..4: " + np.array2string(fid, precision=4))
        weights = ThermalDistribution(5.0).weights(1e-4)
        hist = rap_transfer(n_ions, eta, sweep, weights / weights.sum(),
                            "metastable")
        transferred = n_ions - hist.mean
        c.check(transferred >= 0.97 * n_ions,
                f"metastable transfer {transferred:.3f} of {n_ions}")


def test_criterion_09_estimator_round_trips():
    with Criterion(9, "estimator round-trips", 60.0) as c:
        times = np.linspace(0.0, 350e-6, 20)
        rng = np.random.default_rng(9)
        nbar = 6.0 * np.exp(-19e3 * times) + 0.02
        nbar = nbar * np.exp(0.10 * rng.standard_normal(times.size))
        fit = cooling_rate_fit(times, nbar)
        c.check(abs(fit.params["rate"] - 19e3) / 19e3 < 0.15,
                f"cooling rate {fit.params['rate']:.3e} vs 19e3")

        waits = np.linspace(5e-3, 80e-3, 6)
        est = []
        for i, nb in enumerate(65.0 * waits):
            h = histogram_sampler(histogram_model(nb, 18), shots=500,
                                  seed=90 + i)
            est.append(thermal_fit_histogram(h, 18).params["nbar"])
        hfit = heating_rate_fit(waits, est)
        c.check(abs(hfit.params["rate"] - 65.0) <= 7.0,
                f"heating rate {hfit.params['rate']:.1f} vs 65 +- 7")

        h5 = histogram_sampler(histogram_model(5.0, 18), shots=500, seed=909)
        n5 = thermal_fit_histogram(h5, 18).params["nbar"]
        c.check(abs(n5 - 5.0) / 5.0 < 0.10, f"histogram nbar {n5:.2f} vs 5")


def test_criterion_10_collective_sideband_asymmetry():
    with Criterion(10, "collective red/blue asymmetry", 300.0) as c:
        nbar = 6.0
        dets = TWO_PI * np.linspace(-30e3, 30e3, 21)
        eta9 = np.full(9, 0.05)
        p_r = sideband_spectrum(9, eta9, nbar, TWO_PI * 200e3, 25e-6, dets,
                                "red").mean_excited_fraction.max()
        p_b = sideband_spectrum(9, eta9, nbar, TWO_PI * 200e3, 25e-6, dets,
                                "blue").mean_excited_fraction.max()
        apparent = p_r / (p_b - p_r)
        # uncertainty of the inversion at typical 500-shot statistics
        sr = math.sqrt(p_r * (1.0 - p_r) / 500.0)
        sb = math.sqrt(p_b * (1.0 - p_b) / 500.0)
        sigma = math.hypot(p_b * sr, p_r * sb) / (p_b - p_r) ** 2
        c.check(abs(apparent - nbar) > 3.0 * sigma,
                f"apparent nbar {apparent:.2f} vs true {nbar} "
                f"(3 sigma = {3 * sigma:.2f})")
        # single-ion control: the inversion works when one ion is addressed
        eta1 = np.array([0.05])
        q_r = sideband_spectrum(1, eta1, 5.0, TWO_PI * 50e3, 40e-6, dets,
                                "red").mean_excited_fraction.max()
        q_b = sideband_spectrum(1, eta1, 5.0, TWO_PI * 50e3, 40e-6, dets,
                                "blue").mean_excited_fraction.max()
        control = q_r / (q_b - q_r)
        c.check(abs(control - 5.0) / 5.0 < 0.05,
                f"single-ion control {control:.3f} vs 5")
