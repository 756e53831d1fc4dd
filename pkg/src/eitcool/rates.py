"""Closed-form EIT cooling theory.

Light shift of the dressed states, red/blue sideband rate coefficients,
steady-state phonon number, cooling rate, single-mode rate-equation
dynamics, and the uncoupled multi-mode cooling scan.  All frequencies and
rates are angular (rad/s) unless a name says otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chain import BeamGeometry, TrapConfig, compute_modes
from .errors import HeatingRegimeError


@dataclass(frozen=True)
class EITBeams:
    """Dressing and probe beam parameters of the cooling scheme.

    omega_sigma, omega_pi : Rabi frequencies of dressing and probe beam.
    delta, delta_pi       : blue detunings of dressing and probe.
    gamma                 : linewidth of the excited state.
    branching             : decay fractions (to dressed ground, to probed
                            ground); must sum to one.
    """

    omega_sigma: float
    omega_pi: float
    delta: float
    delta_pi: float
    gamma: float
    branching: tuple[float, float] = (2.0 / 3.0, 1.0 / 3.0)

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0 (blue-detuned dressing)")
        if self.omega_sigma < 0.0 or self.omega_pi < 0.0:
            raise ValueError("Rabi frequencies must be >= 0")
        bg, bf = self.branching
        if bg < 0.0 or bf < 0.0 or abs(bg + bf - 1.0) > 1e-9:
            raise ValueError("branching fractions must be >= 0 and sum to 1")
        if self.omega_sigma > 0.0 and self.omega_pi / self.omega_sigma > 0.5:
            warnings.warn("probe is not weak (omega_pi/omega_sigma > 0.5); "
                          "the rate formulas assume a weak probe",
                          stacklevel=2)


@dataclass(frozen=True)
class RateCoefficients:
    """Blue (a_plus) and red (a_minus) sideband scattering rates in 1/s."""

    a_plus: float
    a_minus: float

    def __post_init__(self):
        if self.a_plus < 0.0 or self.a_minus < 0.0:
            raise ValueError("rate coefficients must be >= 0")


@dataclass
class CoolingTrajectory:
    """Time grid plus mean phonon numbers for one or more modes."""

    times: np.ndarray              # (K,) seconds
    nbar: np.ndarray               # (M, K)
    rates: np.ndarray              # (M,) cooling rate R per mode, 1/s
    heating_rates: np.ndarray      # (M,) R_h per mode, phonons/s
    mode_labels: list[str] = field(default_factory=list)
    status: list[str] = field(default_factory=list)      # 'ok' or 'heating'
    nbar_ss: np.ndarray | None = None                     # NaN where flagged
    time_to_unity: np.ndarray | None = None               # NaN if unreachable


def light_shift(beams: EITBeams) -> float:
    """AC Stark shift of the dressed ground state induced by the dressing beam."""
    return 0.5 * (math.hypot(beams.omega_sigma, beams.delta) - abs(beams.delta))


def inverse_light_shift(shift: float, delta: float) -> float:
    """Dressing Rabi frequency that produces a given light shift at detuning delta."""
    if shift < 0.0 or delta < 0.0:
        raise ValueError("shift and delta must be >= 0")
    return 2.0 * math.sqrt(shift * (shift + delta))


def rate_coefficients(beams: EITBeams, omega: float) -> RateCoefficients:
    """Sideband rate coefficients A+- for a mode of frequency omega."""
    if omega <= 0.0:
        raise ValueError("mode frequency must be positive")
    g, d = beams.gamma, beams.delta
    s2_4 = 0.25 * beams.omega_sigma**2
    num = beams.omega_pi**2 / g * g**2 * omega**2

    def lorentz(sign: float) -> float:
        # A+- carries omega (omega -+ delta): red (A-) resonates where the
        # light shift matches the mode frequency
        det = s2_4 - omega * (omega - sign * d)
        return num / (g**2 * omega**2 + 4.0 * det**2)

    return RateCoefficients(a_plus=lorentz(+1.0), a_minus=lorentz(-1.0))


def steady_state_nbar(rc: RateCoefficients) -> float:
    """Steady-state mean phonon number A+/(A- - A+)."""
    if rc.a_plus >= rc.a_minus:
        raise HeatingRegimeError(
            "a_plus >= a_minus: heating regime, no cooling steady state")
    return rc.a_plus / (rc.a_minus - rc.a_plus)


def cooling_rate(eta: float, rc: RateCoefficients) -> float:
    """Cooling rate eta^2 (A- - A+); negative values signal net heating."""
    if eta < 0.0:
        raise ValueError("eta must be >= 0")
    return eta**2 * (rc.a_minus - rc.a_plus)


def evolve_nbar(nbar0: float, rate: float | Callable[[float], float],
                heating_rate: float, times: np.ndarray,
                method: str = "closed_form") -> CoolingTrajectory:
    """Integrate d(nbar)/dt = -R nbar + R_h on the given time grid.

    ``method='closed_form'`` evaluates the analytic solution and requires a
    constant R > 0.  ``method='rk4'`` runs a fixed-step classical
    Runge-Kutta integrator (substeps between grid points) and also accepts
    R <= 0 or a time-dependent R(t) callable.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be a strictly increasing 1-d grid")
    if nbar0 < 0.0:
        raise ValueError("nbar0 must be >= 0")

    if method == "closed_form":
        if callable(rate):
            raise ValueError("closed form requires a constant rate")
        if rate <= 0.0:
            raise ValueError("closed form requires R > 0; use method='rk4'")
        n_eq = heating_rate / rate
        nb = (nbar0 - n_eq) * np.exp(-rate * (times - times[0])) + n_eq
        rate_val = rate
    elif method == "rk4":
        rfun = rate if callable(rate) else (lambda t, _r=rate: _r)

        def deriv(t, n):
            return -rfun(t) * n + heating_rate

        nb = np.empty_like(times)
        nb[0] = nbar0
        substeps = 16
        for i in range(times.size - 1):
            h = (times[i + 1] - times[i]) / substeps
            n = nb[i]
            t = times[i]
            for _ in range(substeps):
                k1 = deriv(t, n)
                k2 = deriv(t + 0.5 * h, n + 0.5 * h * k1)
                k3 = deriv(t + 0.5 * h, n + 0.5 * h * k2)
                k4 = deriv(t + h, n + h * k3)
                n = n + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t += h
            nb[i + 1] = n
        rate_val = math.nan if callable(rate) else rate
    else:
        raise ValueError(f"unknown method {method!r}")

    nb = np.clip(nb, 0.0, None)
    return CoolingTrajectory(times=times, nbar=nb[None, :],
                             rates=np.array([rate_val]),
                             heating_rates=np.array([heating_rate]),
                             mode_labels=["mode"], status=["ok"])


def multimode_cooling_scan(trap: TrapConfig, geometry: BeamGeometry,
                           beams: EITBeams, duration: float, *,
                           nbar0: float | Sequence[float] = 5.0,
                           heating_rate: float | Sequence[float] = 0.0,
                           samples: int = 200) -> CoolingTrajectory:
    """Independent rate-equation cooling of all 3N modes of the crystal.

    Modes are uncoupled in this model.  ``heating_rate`` is the
    environmental heating; the intrinsic blue-sideband pump is added to it,
    so each trajectory relaxes to the reported nbar_ss.  Modes in the
    heating regime are flagged in ``status`` (steady state and
    time-to-unity become NaN) but do not abort the scan.
    """
    modeset = compute_modes(trap, geometry)
    n_modes = len(modeset.modes)
    nbar0 = np.broadcast_to(np.asarray(nbar0, dtype=float), (n_modes,))
    rh_env = np.broadcast_to(np.asarray(heating_rate, dtype=float), (n_modes,))
    times = np.linspace(0.0, duration, samples)

    nbar = np.empty((n_modes, samples))
    rates = np.empty(n_modes)
    rh_eff = np.empty(n_modes)
    nss = np.full(n_modes, math.nan)
    t1 = np.full(n_modes, math.nan)
    labels, status = [], []
    branch_counter: dict[str, int] = {}
    for i, mode in enumerate(modeset.modes):
        rc = rate_coefficients(beams, mode.frequency)
        r = cooling_rate(mode.eta_com_equivalent, rc)
        rates[i] = r
        rh_eff[i] = mode.eta_com_equivalent**2 * rc.a_plus + rh_env[i]
        idx = branch_counter.get(mode.branch, 0)
        branch_counter[mode.branch] = idx + 1
        labels.append(f"{mode.branch}:{idx}")
        if r > 0.0:
            status.append("ok")
            n_eq = rh_eff[i] / r
            nbar[i] = (nbar0[i] - n_eq) * np.exp(-r * times) + n_eq
            nss[i] = n_eq
            if nbar0[i] > 1.0 > n_eq:
                t1[i] = math.log((nbar0[i] - n_eq) / (1.0 - n_eq)) / r
            elif nbar0[i] <= 1.0:
                t1[i] = 0.0
        else:
            status.append("heating")
            traj = evolve_nbar(nbar0[i], r, rh_eff[i], times, method="rk4")
            nbar[i] = traj.nbar[0]
    return CoolingTrajectory(times=times, nbar=np.clip(nbar, 0.0, None),
                             rates=rates, heating_rates=rh_eff,
                             mode_labels=labels, status=status,
                             nbar_ss=nss, time_to_unity=t1)
