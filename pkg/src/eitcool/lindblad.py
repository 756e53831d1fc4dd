"""Master-equation oracle for the three-level cooling scheme.

A Lambda atom (two ground states |g>, |f> coupled to one short-lived
excited state |e>) is optionally tensored with a truncated harmonic mode
and evolved under a Lindblad generator.  The module validates the
closed-form rate theory, produces the interference absorption profile of
the dressed atom, and simulates the two beam-calibration experiments
(light-shift spectroscopy and the polarization Ramsey check).

Basis order: atom indices (g=0, f=1, e=2) tensored with Fock states
0..fock_cutoff.  Density operators are vectorized column-major,
vec(A X B) = (B^T kron A) vec(X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import curve_fit

from .constants import TWO_PI
from .errors import DimensionLimitError, NumericalError
from .rates import EITBeams, light_shift

G, F, E = 0, 1, 2
ATOM_DIM = 3

# hard guard on the superoperator dimension (dim^2), keeping runs desk-scale
MAX_SUPEROP_DIM = 4096


@dataclass(frozen=True)
class LambdaSystem:
    """Three-level atom, optionally coupled to one truncated mode.

    fock_cutoff is the highest Fock index kept (0 = atom only).  eta_total
    is the Lamb-Dicke parameter of the two-photon wave-vector difference
    projected on the simulated mode; the sideband coupling is expanded to
    first order in it.
    """

    beams: EITBeams
    fock_cutoff: int = 0
    eta_total: float = 0.0
    mode_frequency: float = 0.0

    def __post_init__(self):
        if self.fock_cutoff < 0:
            raise ValueError("fock_cutoff must be >= 0")
        if self.eta_total < 0.0:
            raise ValueError("eta_total must be >= 0")
        if self.fock_cutoff > 0 and self.mode_frequency <= 0.0:
            raise ValueError("mode_frequency must be positive when a mode is present")
        if self.dim**2 > MAX_SUPEROP_DIM:
            raise DimensionLimitError(
                f"superoperator dimension {self.dim**2} exceeds {MAX_SUPEROP_DIM}")

    @property
    def mode_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return ATOM_DIM * self.mode_dim


def _atom_op(i: int, j: int) -> np.ndarray:
    op = np.zeros((ATOM_DIM, ATOM_DIM), dtype=complex)
    op[i, j] = 1.0
    return op


def hamiltonian(sys: LambdaSystem) -> np.ndarray:
    """RWA Hamiltonian in the frame co-rotating with both beams (units of rad/s)."""
    b = sys.beams
    md = sys.mode_dim
    im = np.eye(md, dtype=complex)
    a = np.diag(np.sqrt(np.arange(1, md, dtype=float)), 1).astype(complex)
    x = a + a.conj().T

    h_atom = (-b.delta * _atom_op(E, E)
              + (b.delta_pi - b.delta) * _atom_op(F, F))
    h = np.kron(h_atom, im)
    h += sys.mode_frequency * np.kron(np.eye(ATOM_DIM, dtype=complex),
                                      a.conj().T @ a)
    h += 0.5 * b.omega_sigma * np.kron(_atom_op(E, G) + _atom_op(G, E), im)
    # probe carries the first-order sideband coupling (two-photon recoil
    # folded into eta_total)
    probe = np.kron(_atom_op(E, F), im + 1j * sys.eta_total * x)
    h += 0.5 * b.omega_pi * (probe + probe.conj().T)
    return h


def collapse_operators(sys: LambdaSystem) -> list[np.ndarray]:
    """Decay of |e> at rate gamma, split between the two ground states."""
    b = sys.beams
    im = np.eye(sys.mode_dim, dtype=complex)
    bg, bf = b.branching
    ops = []
    if bg > 0.0:
        ops.append(math.sqrt(bg * b.gamma) * np.kron(_atom_op(G, E), im))
    if bf > 0.0:
        ops.append(math.sqrt(bf * b.gamma) * np.kron(_atom_op(F, E), im))
    return ops


def liouvillian_matrix(h: np.ndarray, c_ops: list[np.ndarray]) -> np.ndarray:
    """Dense Lindblad generator acting on column-stacked density operators."""
    d = h.shape[0]
    if d * d > MAX_SUPEROP_DIM:
        raise DimensionLimitError(
            f"superoperator dimension {d * d} exceeds {MAX_SUPEROP_DIM}")
    ident = np.eye(d, dtype=complex)
    lv = -1j * (np.kron(ident, h) - np.kron(h.T, ident))
    for c in c_ops:
        cdc = c.conj().T @ c
        lv += np.kron(c.conj(), c)
        lv -= 0.5 * (np.kron(ident, cdc) + np.kron(cdc.T, ident))
    return lv


def build_liouvillian(sys: LambdaSystem) -> np.ndarray:
    return liouvillian_matrix(hamiltonian(sys), collapse_operators(sys))


def steady_state(lv: np.ndarray, *, degeneracy_threshold: float = 1e-10) -> np.ndarray:
    """Trace-normalized null vector of the generator (smallest singular vector)."""
    d = int(round(math.sqrt(lv.shape[0])))
    _, s, vh = np.linalg.svd(lv)
    if s.size > 1 and s[-2] < degeneracy_threshold * max(s[0], 1.0):
        raise NumericalError("degenerate null space: steady state is not unique")
    rho = vh[-1].conj().reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-14:
        raise NumericalError("null vector has vanishing trace")
    return rho / tr


def validate_density(rho: np.ndarray) -> None:
    """Trace, Hermiticity and positivity guards for a density operator."""
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise NumericalError("density operator trace deviates from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
        raise NumericalError("density operator is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-9:
        raise NumericalError("density operator has a negative eigenvalue")


def thermal_density(nbar: float, mode_dim: int) -> np.ndarray:
    """Truncated, renormalized thermal state of the mode."""
    if nbar < 0.0:
        raise ValueError("nbar must be >= 0")
    n = np.arange(mode_dim, dtype=float)
    if nbar == 0.0:
        p = np.zeros(mode_dim)
        p[0] = 1.0
    else:
        logp = n * math.log(nbar) - (n + 1.0) * math.log(nbar + 1.0)
        p = np.exp(logp)
        p /= p.sum()
    return np.diag(p).astype(complex)


def propagate(lv: np.ndarray, rho0: np.ndarray,
              times: np.ndarray) -> np.ndarray:
    """Evolve rho0 on a uniform time grid; returns stacked rho(t_k).

    The propagator for one grid spacing is computed once with a
    scaled-and-squared matrix exponential and applied repeatedly, so the
    result is independent of any further step subdivision by construction.
    """
    times = np.asarray(times, dtype=float)
    dts = np.diff(times)
    if times.size < 2 or np.any(dts <= 0.0) or not np.allclose(dts, dts[0],
                                                               rtol=1e-9):
        raise ValueError("times must be a uniform increasing grid")
    d = rho0.shape[0]
    prop = sla.expm(lv * dts[0])
    vec = rho0.reshape(-1, order="F").astype(complex)
    out = np.empty((times.size, d, d), dtype=complex)
    out[0] = rho0
    for k in range(1, times.size):
        vec = prop @ vec
        out[k] = vec.reshape((d, d), order="F")
    return out


@dataclass
class LindbladCoolingResult:
    """Trajectory record from :func:`simulate_eit_cooling`."""

    times: np.ndarray
    nbar: np.ndarray
    pe: np.ndarray
    scatter_integral: np.ndarray      # cumulative integral of Gamma * P_e
    final_rho: np.ndarray = field(repr=False, default=None)


def simulate_eit_cooling(sys: LambdaSystem, duration: float, *,
                         nbar0: float, samples: int = 240,
                         tail_tol: float = 1e-6) -> LindbladCoolingResult:
    """Cooling trajectory of the mode under the full master equation.

    The atom starts in the probed ground state, the mode in a truncated
    thermal state.  The top two Fock populations are monitored at every
    reported time; any growth beyond their initial occupation (or beyond
    ``tail_tol``, whichever is larger) flags the cutoff as too small.
    """
    if sys.fock_cutoff < 2:
        raise ValueError("cooling simulation needs a mode (fock_cutoff >= 2)")
    if sys.eta_total > 0.15:
        raise ValueError("eta_total > 0.15 is outside the Lamb-Dicke expansion")
    md = sys.mode_dim
    atom0 = np.zeros((ATOM_DIM, ATOM_DIM), dtype=complex)
    atom0[F, F] = 1.0
    rho0 = np.kron(atom0, thermal_density(nbar0, md))

    lv = build_liouvillian(sys)
    times = np.linspace(0.0, duration, samples)
    rhos = propagate(lv, rho0, times)

    num_op = np.kron(np.eye(ATOM_DIM), np.diag(np.arange(md, dtype=float)))
    pe_op = np.kron(_atom_op(E, E), np.eye(md))
    top_two = np.kron(np.eye(ATOM_DIM),
                      np.diag((np.arange(md) >= md - 2).astype(float)))

    nbar = np.empty(samples)
    pe = np.empty(samples)
    tail0 = float(np.trace(top_two @ rhos[0]).real)
    budget = max(tail_tol, tail0 * (1.0 + 1e-6) + 1e-12)
    for k, rho in enumerate(rhos):
        validate_density(rho)
        nbar[k] = np.trace(num_op @ rho).real
        pe[k] = np.trace(pe_op @ rho).real
        tail = np.trace(top_two @ rho).real
        if tail > budget:
            raise NumericalError(
                f"Fock cutoff too small: top-two population {tail:.3g} at "
                f"t={times[k]:.3g}s exceeds budget {budget:.3g}")
    scatter = np.concatenate(
        [[0.0], np.cumsum(0.5 * (pe[1:] + pe[:-1]) * np.diff(times))])
    return LindbladCoolingResult(times=times, nbar=nbar, pe=pe,
                                 scatter_integral=sys.beams.gamma * scatter,
                                 final_rho=rhos[-1])


def absorption_spectrum(sys: LambdaSystem,
                        delta_pi_grid: np.ndarray) -> np.ndarray:
    """Steady-state photon scattering rate Gamma * P_e versus probe detuning."""
    if sys.fock_cutoff != 0:
        raise ValueError("absorption spectrum is an atom-only computation")
    rates = np.empty(len(delta_pi_grid))
    for i, dpi in enumerate(np.asarray(delta_pi_grid, dtype=float)):
        s = replace(sys, beams=replace(sys.beams, delta_pi=dpi))
        rho = steady_state(build_liouvillian(s))
        rates[i] = sys.beams.gamma * rho[E, E].real
    return rates


def default_pump_rate(beams: EITBeams) -> float:
    """Optical pump-out rate of the dressed ground state by the dressing beam."""
    b = beams
    if b.omega_sigma == 0.0:
        return 0.0
    sat = 0.25 * b.omega_sigma**2
    return b.branching[1] * b.gamma * sat / (b.delta**2 + 0.25 * b.gamma**2
                                             + 2.0 * sat)


def simulate_lightshift_spectroscopy(beams: EITBeams, *,
                                     probe_rabi: float = TWO_PI * 39e3,
                                     pulse_duration: float = 250e-6,
                                     detuning_grid: np.ndarray,
                                     pump_rate: float | None = None) -> np.ndarray:
    """Metastable-state population after a probe pulse, versus probe detuning.

    Effective model of the light-shift calibration: a two-level probe
    transition from the metastable state to the dressed ground state, whose
    resonance is displaced by the dressing-beam light shift, plus incoherent
    pump-out of the ground state by the dressing beam.  Returns the
    metastable population (depletion dip centered at the light shift).
    """
    shift = light_shift(beams)
    gp = default_pump_rate(beams) if pump_rate is None else pump_rate
    # basis: metastable 0, probed ground 1, pumped-out sink 2
    sink = np.zeros((3, 3), dtype=complex)
    sink[2, 1] = 1.0
    coupling = np.zeros((3, 3), dtype=complex)
    coupling[0, 1] = coupling[1, 0] = 0.5 * probe_rabi
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0

    out = np.empty(len(detuning_grid))
    for i, det in enumerate(np.asarray(detuning_grid, dtype=float)):
        h = coupling.copy()
        h[1, 1] = -(det - shift)
        lv = liouvillian_matrix(h, [math.sqrt(gp) * sink] if gp > 0.0 else [])
        rho = sla.expm(lv * pulse_duration) @ rho0.reshape(-1, order="F")
        out[i] = rho.reshape((3, 3), order="F")[0, 0].real
    return out


def simulate_polarization_ramsey(delta_prime: float, pump_out_rate: float,
                                 durations: np.ndarray) -> np.ndarray:
    """Ramsey signal probing spurious polarization components.

    Sequence: pi/2 pulse, dressing pulse of variable length during which the
    tracked ground state acquires phase delta_prime * t while the coherence
    decays at the pump-out rate, then a second pi/2 pulse phase-shifted by
    pi/2.  Returns the metastable-state population for each duration.
    """
    def rot(theta: float, phase: float) -> np.ndarray:
        sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
        sy = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
        gen = math.cos(phase) * sx + math.sin(phase) * sy
        return (math.cos(0.5 * theta) * np.eye(2, dtype=complex)
                - 1j * math.sin(0.5 * theta) * gen)

    u1 = rot(0.5 * math.pi, 0.0)
    u2 = rot(0.5 * math.pi, 0.5 * math.pi)
    rho0 = np.zeros((2, 2), dtype=complex)
    rho0[0, 0] = 1.0  # ground state |S>

    out = np.empty(len(durations))
    for i, t in enumerate(np.asarray(durations, dtype=float)):
        rho = u1 @ rho0 @ u1.conj().T
        phase = np.exp(-1j * delta_prime * t)
        damp = math.exp(-pump_out_rate * t)
        rho = rho.copy()
        rho[0, 1] *= phase * damp
        rho[1, 0] *= np.conj(phase) * damp
        rho = u2 @ rho @ u2.conj().T
        out[i] = rho[1, 1].real
    return out


def write_absorption_csv(path, delta_pi_grid, scatter_rates,
                         metadata: dict | None = None) -> None:
    """Emit an absorption scan as (delta_pi_hz, scatter_rate)."""
    from .csvio import write_csv
    write_csv(path, {"delta_pi_hz": np.asarray(delta_pi_grid) / TWO_PI,
                     "scatter_rate": scatter_rates}, metadata)


def write_trajectory_csv(path, result: LindbladCoolingResult,
                         metadata: dict | None = None) -> None:
    """Emit a cooling trajectory as (t_s, nbar, pe, scatter_integral)."""
    from .csvio import write_csv
    write_csv(path, {"t_s": result.times, "nbar": result.nbar,
                     "pe": result.pe,
                     "scatter_integral": result.scatter_integral}, metadata)


def write_calibration_csv(path, x, d_population,
                          metadata: dict | None = None) -> None:
    """Emit a calibration scan as (x, d_population)."""
    from .csvio import write_csv
    write_csv(path, {"x": x, "d_population": d_population}, metadata)


def fit_ramsey(durations: np.ndarray, signal: np.ndarray) -> tuple[float, float]:
    """Least-squares fit of a decaying Ramsey oscillation.

    Returns (angular frequency, coherence decay rate) of the model
    0.5 + 0.5 exp(-g t) sin(w t).
    """
    durations = np.asarray(durations, dtype=float)
    signal = np.asarray(signal, dtype=float)

    def model(t, w, g):
        return 0.5 + 0.5 * np.exp(-g * t) * np.sin(w * t)

    # frequency seed from the discrete spectrum of the mean-free signal
    dt = durations[1] - durations[0]
    power = np.abs(np.fft.rfft(signal - signal.mean()))
    freqs = np.fft.rfftfreq(len(signal), dt)
    w0 = TWO_PI * freqs[np.argmax(power[1:]) + 1]
    popt, _ = curve_fit(model, durations, signal, p0=[w0, 1.0 / durations[-1]],
                        maxfev=20000)
    return abs(popt[0]), abs(popt[1])
