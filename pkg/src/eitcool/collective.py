"""Collective sideband dynamics of N ions coupled to one vibrational mode.

A globally applied sideband drive couples at most min(N, n) + 1 states of
the form (raising operator)^k applied to |all ions down, n phonons>, where
the collective raising operator flips one ion up while removing (red) or
adding (blue) one phonon, weighted by the per-ion Lamb-Dicke factors.
Working in this reduced ladder makes N-ion sideband spectra and rapid
adiabatic passage (RAP) phonon readout tractable; a brute-force full
tensor-space propagator for small N serves as the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constants import TWO_PI
from .errors import ConvergenceError, DimensionLimitError, NumericalError
from .fits import ThermalDistribution

# reduced-ladder states become numerically dependent below this coupling
# ratio; the basis is truncated there and flagged
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SweepProfile:
    """Frequency sweep with a truncated-Gaussian intensity envelope.

    The laser detuning moves linearly across ``span_hz`` (centered on the
    sideband) during ``duration``; the carrier Rabi frequency follows a
    Gaussian peaking at ``peak_rabi_hz`` whose value at the sweep edges is
    ``truncation`` times the peak.
    """

    duration: float
    span_hz: float
    peak_rabi_hz: float
    truncation: float = 0.05
    shape: str = "linear"

    def __post_init__(self):
        if self.duration <= 0.0 or self.span_hz <= 0.0 or self.peak_rabi_hz <= 0.0:
            raise ValueError("duration, span and peak Rabi must be positive")
        if not 0.0 < self.truncation < 1.0:
            raise ValueError("truncation must lie in (0, 1)")
        if self.shape != "linear":
            raise ValueError("only the linear sweep shape is implemented")

    def detuning(self, t: float) -> float:
        """Instantaneous detuning from the sideband in rad/s."""
        return TWO_PI * self.span_hz * (0.5 - t / self.duration)

    def rabi(self, t: float) -> float:
        """Instantaneous carrier Rabi frequency in rad/s."""
        sigma = 0.5 * self.duration / math.sqrt(2.0 * math.log(1.0 / self.truncation))
        arg = (t - 0.5 * self.duration) / sigma
        return TWO_PI * self.peak_rabi_hz * math.exp(-0.5 * arg * arg)


@dataclass(frozen=True)
class ConstantDrive:
    """Rectangular pulse at fixed detuning (rad/s via the Hz inputs)."""

    duration: float
    rabi_hz: float
    detuning_hz: float = 0.0

    def detuning(self, t: float) -> float:
        return TWO_PI * self.detuning_hz

    def rabi(self, t: float) -> float:
        return TWO_PI * self.rabi_hz


@dataclass
class ReducedBasis:
    """Normalized ladder states for one initial phonon number.

    ``norms`` are the norms of the unnormalized ladder states; ``couplings``
    are the tridiagonal sideband matrix elements between successive
    normalized states, in units of half the carrier Rabi frequency.
    """

    ion_count: int
    eta: np.ndarray
    n_phonons: int
    side: str
    norms: np.ndarray
    couplings: np.ndarray
    truncated: bool = False

    @property
    def dim(self) -> int:
        return len(self.norms)


@dataclass
class ExcitationHistogram:
    """Probability distribution over the number of excited ions."""

    probabilities: np.ndarray
    shots: int | None = None
    counts: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("histogram probabilities must sum to 1")
        self.probabilities = p

    @property
    def mean(self) -> float:
        return float(np.arange(len(self.probabilities)) @ self.probabilities)


def _elementary_symmetric(x: np.ndarray) -> np.ndarray:
    """e_k of the inputs for k = 0..len(x), by iterative expansion."""
    e = np.zeros(len(x) + 1)
    e[0] = 1.0
    for v in x:
        e[1:] = e[1:] + v * e[:-1]
    return e


def build_reduced_basis(n_ions: int, eta_vec, n_phonons: int,
                        side: str = "red") -> ReducedBasis:
    """Construct the ladder-state norms and tridiagonal couplings.

    Red sideband: k runs to min(N, n).  Blue sideband: k runs to N.  If a
    pathological Lamb-Dicke pattern makes a ladder norm vanish before the
    combinatorial maximum, the basis is truncated there and flagged.
    """
    eta = np.asarray(eta_vec, dtype=float)
    if eta.shape != (n_ions,):
        raise ValueError("eta_vec must have one entry per ion")
    if n_ions < 1 or n_phonons < 0:
        raise ValueError("need n_ions >= 1 and n_phonons >= 0")
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta_vec entries must be finite")

    k_max = min(n_ions, n_phonons) if side == "red" else n_ions
    if side not in ("red", "blue"):
        raise ValueError("side must be 'red' or 'blue'")
    esym = _elementary_symmetric(eta**2)

    # squared-norm ratio recursion avoids overflow of the factorials
    norms = [1.0]
    couplings = []
    truncated = False
    for k in range(k_max):
        phonon = (n_phonons - k) if side == "red" else (n_phonons + k + 1)
        if esym[k] <= 0.0:
            truncated = True
            break
        ratio_sq = (k + 1) ** 2 * (esym[k + 1] / esym[k]) * phonon
        if ratio_sq <= NORM_FLOOR**2 * max(1.0, max(couplings, default=1.0) ** 2):
            truncated = True
            break
        couplings.append(math.sqrt(ratio_sq))
        norms.append(norms[-1] * couplings[-1])
    return ReducedBasis(ion_count=n_ions, eta=eta, n_phonons=n_phonons,
                        side=side, norms=np.array(norms),
                        couplings=np.array(couplings), truncated=truncated)


# Gauss-Legendre nodes for the fourth-order Magnus step
_GL = (0.5 - math.sqrt(3.0) / 6.0, 0.5 + math.sqrt(3.0) / 6.0)


def _magnus_step(h1: np.ndarray, h2: np.ndarray, dt: float,
                 psi: np.ndarray) -> np.ndarray:
    """Exact exponential of the fourth-order Magnus effective Hamiltonian."""
    h_eff = 0.5 * (h1 + h2) + 1j * (math.sqrt(3.0) / 12.0) * dt * (h1 @ h2 - h2 @ h1)
    w, v = np.linalg.eigh(h_eff)
    return v @ (np.exp(-1j * w * dt) * (v.conj().T @ psi))


def _evolve_ladder(basis: ReducedBasis, drive, steps: int,
                   c0: np.ndarray, sample_every: int | None = None):
    """Time-ordered propagation of ladder amplitudes.

    The sweep is split into equal segments; each segment is advanced with a
    fourth-order Magnus step built from two Gauss-Legendre samples of the
    drive, exponentiated exactly.  Returns the final amplitudes, or sampled
    snapshots if requested.
    """
    kvec = np.arange(basis.dim, dtype=float)
    c = np.asarray(c0, dtype=complex).copy()
    dt = drive.duration / steps
    snapshots = [c.copy()] if sample_every else None
    if basis.dim > 1:
        tri = np.diag(basis.couplings, 1) + np.diag(basis.couplings, -1)

    def ham(t: float) -> np.ndarray:
        return np.diag(-drive.detuning(t) * kvec) + 0.5 * drive.rabi(t) * tri

    for i in range(steps):
        t0 = i * dt
        if basis.dim == 1:
            pass  # a single ladder state only picks up a global phase
        else:
            c = _magnus_step(ham(t0 + _GL[0] * dt), ham(t0 + _GL[1] * dt),
                             dt, c)
        if sample_every and (i + 1) % sample_every == 0:
            snapshots.append(c.copy())
    if abs(np.linalg.norm(c) - 1.0) > 1e-9:
        raise NumericalError("ladder propagation lost norm (step-size instability)")
    return np.array(snapshots) if sample_every else c


def _converged_final_probs(basis: ReducedBasis, drive, c0: np.ndarray, *,
                           tol: float = 1e-8, start_steps: int = 256,
                           max_steps: int = 1 << 17) -> np.ndarray:
    """Double the step count until the final probabilities settle."""
    steps = start_steps
    prev = np.abs(_evolve_ladder(basis, drive, steps, c0)) ** 2
    while steps < max_steps:
        steps *= 2
        cur = np.abs(_evolve_ladder(basis, drive, steps, c0)) ** 2
        if np.max(np.abs(cur - prev)) < tol:
            return cur
        prev = cur
    raise ConvergenceError("sweep discretization did not converge")


@dataclass
class SpectrumResult:
    """Thermal-averaged collective sideband spectrum."""

    detunings: np.ndarray                 # rad/s relative to the sideband
    mean_excited_fraction: np.ndarray
    per_fock: np.ndarray = field(repr=False, default=None)  # (n_max+1, n_det)
    fock_weights: np.ndarray = field(repr=False, default=None)


def sideband_spectrum(n_ions: int, eta_vec, nbar: float, probe_rabi: float,
                      pulse_time: float, detuning_grid, side: str = "red", *,
                      tail: float = 1e-4, n_cap: int = 4000) -> SpectrumResult:
    """Mean excited-ion fraction versus drive detuning near one sideband.

    The thermal mixture is truncated at cumulative probability 1 - ``tail``
    and each Fock component is evolved independently for the pulse time, so
    the averaged spectrum is linear in the mixture by construction.
    """
    dist = ThermalDistribution(nbar)
    weights = dist.weights(tail, n_cap)
    weights = weights / weights.sum()
    dets = np.asarray(detuning_grid, dtype=float)

    per_fock = np.zeros((len(weights), len(dets)))
    for n, w in enumerate(weights):
        basis = build_reduced_basis(n_ions, eta_vec, n, side)
        if basis.dim == 1:
            continue  # no sideband coupling (red sideband from n = 0)
        kvec = np.arange(basis.dim, dtype=float)
        c0 = np.zeros(basis.dim, dtype=complex)
        c0[0] = 1.0
        for j, det in enumerate(dets):
            diag = -det * kvec
            off = 0.5 * probe_rabi * basis.couplings
            lam, v = sla.eigh_tridiagonal(diag, off)
            c = v @ (np.exp(-1j * lam * pulse_time) * (v.T @ c0))
            per_fock[n, j] = kvec @ (np.abs(c) ** 2) / n_ions
    return SpectrumResult(detunings=dets,
                          mean_excited_fraction=weights @ per_fock,
                          per_fock=per_fock, fock_weights=weights)


def rap_transfer(n_ions: int, eta_vec, sweep: SweepProfile,
                 initial_distribution, start_state: str = "ground", *,
                 tol: float = 1e-8) -> ExcitationHistogram:
    """Excited-ion-count distribution after a red-sideband RAP.

    ``initial_distribution`` gives the phonon-number probabilities before
    the sweep.  A ground-state start maps n phonons one-to-one onto n
    excited ions for n <= N on an equal-coupling mode; a metastable start
    (all ions excited, n phonons) drives the complete ladder and inverts
    the electronic state nearly independently of n.
    """
    if start_state not in ("ground", "metastable"):
        raise ValueError("start_state must be 'ground' or 'metastable'")
    p_init = np.asarray(initial_distribution, dtype=float)
    if np.any(p_init < 0.0) or abs(p_init.sum() - 1.0) > 1e-9:
        raise ValueError("initial distribution must be normalized")

    hist = np.zeros(n_ions + 1)
    for n, p in enumerate(p_init):
        if p == 0.0:
            continue
        family = n if start_state == "ground" else n + n_ions
        basis = build_reduced_basis(n_ions, eta_vec, family, "red")
        c0 = np.zeros(basis.dim, dtype=complex)
        c0[0 if start_state == "ground" else basis.dim - 1] = 1.0
        probs = _converged_final_probs(basis, sweep, c0, tol=tol)
        hist[: basis.dim] += p * probs
    return ExcitationHistogram(probabilities=hist / hist.sum())


def rap_fock_fidelities(n_ions: int, eta_vec, sweep: SweepProfile,
                        n_values, start_state: str = "ground", *,
                        tol: float = 1e-8) -> np.ndarray:
    """Mapping fidelity P(measured excited count = min(n, N)) per Fock state."""
    out = np.empty(len(n_values))
    for i, n in enumerate(n_values):
        dist = np.zeros(n + 1)
        dist[n] = 1.0
        hist = rap_transfer(n_ions, eta_vec, sweep, dist, start_state, tol=tol)
        target = min(n, n_ions) if start_state == "ground" else 0
        out[i] = hist.probabilities[target]
    return out


def histogram_sampler(probabilities, shots: int, seed: int) -> ExcitationHistogram:
    """Multinomial sampling of an excitation histogram, reproducible by seed."""
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must be a normalized distribution")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum())
    return ExcitationHistogram(probabilities=counts / shots, shots=shots,
                               counts=counts)


# --- brute-force reference in the full tensor space ------------------------

MAX_FULL_DIM = 1024


def _full_space_ops(n_ions: int, eta_vec, mode_dim: int):
    """Collective lowering structure and excitation counter, full space."""
    eta = np.asarray(eta_vec, dtype=float)
    a = np.diag(np.sqrt(np.arange(1, mode_dim, dtype=float)), 1)
    sp = np.array([[0.0, 0.0], [1.0, 0.0]])  # sigma+ with |down>=index 0
    s_plus = np.zeros((2**n_ions * mode_dim,) * 2)
    for i in range(n_ions):
        op = np.eye(1)
        for j in range(n_ions):
            op = np.kron(op, sp if j == i else np.eye(2))
        s_plus += eta[i] * np.kron(op, a)
    # excited-ion count of every spin configuration (bit i = ion i excited)
    spin_counts = np.array([bin(s).count("1") for s in range(2**n_ions)])
    count_diag = np.repeat(spin_counts, mode_dim)
    return s_plus, count_diag


def ladder_state_full(n_ions: int, eta_vec, n_phonons: int, k: int,
                      mode_dim: int) -> np.ndarray:
    """Normalized ladder state built explicitly in the full tensor space."""
    s_plus, _ = _full_space_ops(n_ions, eta_vec, mode_dim)
    psi = np.zeros(2**n_ions * mode_dim)
    psi[n_phonons] = 1.0  # all spins down block comes first
    for _ in range(k):
        psi = s_plus @ psi
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise ValueError("ladder state vanishes for this (eta, n, k)")
    return psi / norm


@dataclass
class BruteForceResult:
    times: np.ndarray
    excited_probs: np.ndarray      # (samples, N+1)
    leakage: np.ndarray            # population outside the ladder span


def brute_force_reference(n_ions: int, eta_vec, n_phonons: int,
                          fock_cutoff: int, drive, *, steps: int,
                          samples: int = 0,
                          start_state: str = "ground") -> BruteForceResult:
    """Full tensor-space propagation under the same sideband drive.

    Uses the identical piecewise-constant discretization as the reduced
    model so that trajectories are directly comparable.  Reports the
    excited-ion-count distribution and the population leakage outside the
    span of the reduced ladder.
    """
    mode_dim = fock_cutoff + 1
    dim = 2**n_ions * mode_dim
    if dim > MAX_FULL_DIM:
        raise DimensionLimitError(
            f"full-space dimension {dim} exceeds {MAX_FULL_DIM}")
    if start_state not in ("ground", "metastable"):
        raise ValueError("start_state must be 'ground' or 'metastable'")
    # the drive conserves (excitations + phonons), so the highest reachable
    # Fock index is the ladder family number
    family_n = n_phonons + (n_ions if start_state == "metastable" else 0)
    if family_n >= mode_dim:
        raise ValueError("fock_cutoff too small for the requested dynamics")

    s_plus, count_diag = _full_space_ops(n_ions, eta_vec, mode_dim)
    coupling = s_plus + s_plus.T

    psi = np.zeros(dim, dtype=complex)
    if start_state == "ground":
        psi[n_phonons] = 1.0
    else:
        psi[(2**n_ions - 1) * mode_dim + n_phonons] = 1.0

    # ladder span for the leakage measurement
    k_max = min(n_ions, family_n)
    span = np.column_stack([ladder_state_full(n_ions, eta_vec, family_n, k,
                                              mode_dim)
                            for k in range(k_max + 1)])

    sample_every = max(steps // samples, 1) if samples else steps
    dt = drive.duration / steps
    count_mat = np.diag(count_diag.astype(float))

    def ham(t: float) -> np.ndarray:
        return -drive.detuning(t) * count_mat + 0.5 * drive.rabi(t) * coupling

    times = [0.0]
    excited = [_count_probs(psi, count_diag, n_ions)]
    leak = [1.0 - float(np.linalg.norm(span.T @ psi) ** 2)]
    for i in range(steps):
        t0 = i * dt
        psi = _magnus_step(ham(t0 + _GL[0] * dt), ham(t0 + _GL[1] * dt),
                           dt, psi)
        if (i + 1) % sample_every == 0 or i == steps - 1:
            times.append((i + 1) * dt)
            excited.append(_count_probs(psi, count_diag, n_ions))
            leak.append(1.0 - float(np.linalg.norm(span.T @ psi) ** 2))
    return BruteForceResult(times=np.array(times),
                            excited_probs=np.array(excited),
                            leakage=np.array(leak))


def reduced_reference(n_ions: int, eta_vec, n_phonons: int, drive, *,
                      steps: int, samples: int = 0,
                      start_state: str = "ground") -> BruteForceResult:
    """Reduced-ladder twin of :func:`brute_force_reference` (zero leakage)."""
    family = n_phonons if start_state == "ground" else n_phonons + n_ions
    basis = build_reduced_basis(n_ions, eta_vec, family, "red")
    c0 = np.zeros(basis.dim, dtype=complex)
    c0[0 if start_state == "ground" else basis.dim - 1] = 1.0
    sample_every = max(steps // samples, 1) if samples else steps
    snaps = _evolve_ladder(basis, drive, steps, c0, sample_every=sample_every)
    times = np.arange(len(snaps)) * sample_every * (drive.duration / steps)
    probs = np.zeros((len(snaps), n_ions + 1))
    probs[:, : basis.dim] = np.abs(snaps) ** 2
    return BruteForceResult(times=times, excited_probs=probs,
                            leakage=np.zeros(len(snaps)))


def _count_probs(psi: np.ndarray, count_diag: np.ndarray,
                 n_ions: int) -> np.ndarray:
    dens = np.abs(psi) ** 2
    return np.array([dens[count_diag == j].sum() for j in range(n_ions + 1)])
