"""Equilibrium positions and normal modes of linear ion crystals.

An N-ion string in a 3D harmonic trap is described by a :class:`TrapConfig`.
The axial equilibrium positions follow from a force balance between the trap
and the Coulomb repulsion; diagonalizing the potential curvature around the
equilibrium yields 3N normal modes in three branches (one axial, two radial).
For each mode the coupling to a pair of laser beams is quantified by
Lamb-Dicke factors computed from the beam-geometry wave-vector difference.

Coordinate convention: all 3-vectors live in the principal-axis frame with
component order (axial, radial_1, radial_2).  Frequencies are angular
(rad/s) everywhere inside the package; plain cycles/s appear only at file
and config boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import AMU, EPS0, HBAR, QE, TWO_PI
from .errors import ConvergenceError, UnstableCrystalError

BRANCHES = ("axial", "radial_1", "radial_2")

# principal-axis frame: component 0 is axial, 1 and 2 the radial directions
_BRANCH_AXIS = {"axial": 0, "radial_1": 1, "radial_2": 2}


@dataclass(frozen=True)
class TrapConfig:
    """Static description of the trap and the ion species.

    Frequencies are angular trap frequencies in rad/s (ordinary frequencies
    multiplied by 2*pi).  The mass is given in atomic mass units.
    """

    ion_count: int
    ion_mass_amu: float
    omega_axial: float
    omega_radial_1: float
    omega_radial_2: float
    principal_axes: tuple[str, str, str] = BRANCHES

    def __post_init__(self):
        if self.ion_count < 1:
            raise ValueError("ion_count must be >= 1")
        if self.ion_mass_amu <= 0:
            raise ValueError("ion_mass_amu must be positive")
        for name in ("omega_axial", "omega_radial_1", "omega_radial_2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if (self.omega_radial_1 <= self.omega_axial
                or self.omega_radial_2 <= self.omega_axial):
            raise UnstableCrystalError(
                "linear-crystal configuration requires both radial frequencies "
                "to exceed the axial frequency")
        if tuple(self.principal_axes) != BRANCHES:
            raise ValueError(f"principal_axes must be {BRANCHES}")

    @property
    def ion_mass(self) -> float:
        """Ion mass in kg."""
        return self.ion_mass_amu * AMU

    @property
    def length_scale(self) -> float:
        """Characteristic Coulomb length l = (q^2/(4 pi eps0 m w_z^2))^(1/3) in m."""
        return (QE**2 / (4.0 * math.pi * EPS0 * self.ion_mass
                         * self.omega_axial**2)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class BeamGeometry:
    """Wavelength and unit propagation directions of the two cooling beams."""

    wavelength: float
    unit_k_sigma: tuple[float, float, float]
    unit_k_pi: tuple[float, float, float]

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        for name in ("unit_k_sigma", "unit_k_pi"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"{name} must have unit norm (within 1e-12)")

    @property
    def delta_k(self) -> np.ndarray:
        """Two-photon wave-vector difference k_pi - k_sigma in 1/m."""
        k = TWO_PI / self.wavelength
        return k * (np.asarray(self.unit_k_pi) - np.asarray(self.unit_k_sigma))


@dataclass(eq=False)
class Mode:
    """One normal mode: frequency, branch and per-ion participation.

    ``lamb_dicke`` and ``eta_com_equivalent`` are filled in by
    :func:`lamb_dicke_factors`; they are None straight out of
    :func:`normal_modes`.  Compared by identity (holds arrays).
    """

    frequency: float                      # rad/s
    branch: str
    participation: np.ndarray             # (N,) orthonormal within the branch
    lamb_dicke: np.ndarray | None = None  # (N,) per-ion eta, all >= 0
    eta_com_equivalent: float | None = None

    @property
    def frequency_hz(self) -> float:
        return self.frequency / TWO_PI


@dataclass
class ModeSet:
    """All 3N normal modes of a linear crystal, sorted ascending per branch."""

    modes: list[Mode] = field(default_factory=list)

    def branch(self, name: str) -> list[Mode]:
        if name not in BRANCHES:
            raise ValueError(f"unknown branch {name!r}")
        return [m for m in self.modes if m.branch == name]

    def frequencies(self, name: str) -> np.ndarray:
        return np.array([m.frequency for m in self.branch(name)])

    def participation_matrix(self, name: str) -> np.ndarray:
        """Columns are the participation vectors of the branch."""
        return np.column_stack([m.participation for m in self.branch(name)])

    def com_mode(self, name: str) -> Mode:
        """Center-of-mass mode: lowest axial, highest within each radial branch."""
        modes = self.branch(name)
        return modes[0] if name == "axial" else modes[-1]


def _dimensionless_force(u: np.ndarray) -> np.ndarray:
    """Gradient of the dimensionless chain potential (zero at equilibrium)."""
    d = u[:, None] - u[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv2 = np.where(d != 0.0, np.sign(d) / d**2, 0.0)
    return u - inv2.sum(axis=1)


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    """Dimensionless axial Hessian (units of m*w_z^2)."""
    d = np.abs(u[:, None] - u[None, :])
    with np.errstate(divide="ignore"):
        inv3 = np.where(d != 0.0, 1.0 / d**3, 0.0)
    a = -2.0 * inv3
    np.fill_diagonal(a, 1.0 + 2.0 * inv3.sum(axis=1))
    return a


def _radial_hessian(u: np.ndarray, alpha: float) -> np.ndarray:
    """Dimensionless radial Hessian built directly from the positions."""
    d = np.abs(u[:, None] - u[None, :])
    with np.errstate(divide="ignore"):
        inv3 = np.where(d != 0.0, 1.0 / d**3, 0.0)
    b = inv3.copy()
    np.fill_diagonal(b, alpha - inv3.sum(axis=1))
    return b


def equilibrium_positions(trap: TrapConfig, *, tol: float = 1e-13,
                          max_iter: int = 200) -> np.ndarray:
    """Axial equilibrium positions in meters, sorted ascending.

    Damped Newton iteration on the dimensionless force balance, seeded with
    the quasi-uniform guess u_i proportional to i - (N+1)/2.  The chain
    potential is strictly convex on ordered configurations, so the iteration
    is globally convergent with backtracking.
    """
    n = trap.ion_count
    if n == 1:
        return np.zeros(1)

    u = 1.26 * (np.arange(1, n + 1) - 0.5 * (n + 1))
    fval = _dimensionless_force(u)
    for _ in range(max_iter):
        if np.max(np.abs(fval)) < tol:
            break
        step = np.linalg.solve(_axial_hessian(u), -fval)
        t = 1.0
        while t > 1e-6:
            trial = u + t * step
            if np.all(np.diff(trial) > 0.0):
                trial_f = _dimensionless_force(trial)
                if np.max(np.abs(trial_f)) < np.max(np.abs(fval)) or t == 1.0:
                    break
            t *= 0.5
        u = u + t * step
        fval = _dimensionless_force(u)
    else:
        raise ConvergenceError(
            f"equilibrium solve did not reach |F| < {tol:g} in {max_iter} iterations")

    if np.max(np.abs(u + u[::-1])) > 1e-10 * max(1.0, np.max(np.abs(u))):
        raise ConvergenceError("equilibrium positions are not antisymmetric")
    return np.sort(u) * trap.length_scale


def normal_modes(trap: TrapConfig, positions: np.ndarray) -> ModeSet:
    """Diagonalize the crystal Hessians and return all 3N modes.

    The radial Hessian of branch b obeys B = (alpha_b + 1/2) I - A/2 with A
    the dimensionless axial Hessian and alpha_b = (w_rb/w_z)^2; the relation
    is asserted element-wise against the directly constructed radial Hessian.
    """
    n = trap.ion_count
    u = np.asarray(positions, dtype=float) / trap.length_scale
    if u.shape != (n,):
        raise ValueError("positions do not match ion_count")
    residual = np.max(np.abs(_dimensionless_force(u))) if n > 1 else 0.0
    if residual > 1e-9:
        raise ValueError("positions are not an equilibrium configuration")

    a = _axial_hessian(u)
    modes: list[Mode] = []
    for branch in BRANCHES:
        if branch == "axial":
            h = a
        else:
            omega_r = getattr(trap, f"omega_{branch}")
            alpha = (omega_r / trap.omega_axial) ** 2
            h = (alpha + 0.5) * np.eye(n) - 0.5 * a
            direct = _radial_hessian(u, alpha)
            if not np.allclose(h, direct, rtol=0.0, atol=1e-12 * max(alpha, 1.0)):
                raise AssertionError("radial/axial Hessian relation violated")
        evals, evecs = np.linalg.eigh(h)
        if evals[0] <= 0.0:
            raise UnstableCrystalError(
                f"negative eigenvalue in branch {branch!r}: zigzag instability")
        res = np.linalg.norm(h @ evecs - evecs * evals, axis=0)
        if np.any(res > 1e-10 * np.linalg.norm(h)):
            raise ConvergenceError(f"eigen-solver residual too large in {branch!r}")
        for lam, vec in zip(evals, evecs.T):
            v = vec.copy()
            # fix the sign so that the dominant component is positive
            if v[np.argmax(np.abs(v))] < 0.0:
                v = -v
            modes.append(Mode(frequency=trap.omega_axial * math.sqrt(lam),
                              branch=branch, participation=v))
    return ModeSet(modes=modes)


def eta_scalar(delta_k: np.ndarray, branch: str, mass: float,
               omega: float) -> float:
    """Mode-projected Lamb-Dicke factor |dk . e_branch| sqrt(hbar/(2 m w))."""
    if omega <= 0.0:
        raise ValueError("mode frequency must be positive")
    proj = abs(float(np.asarray(delta_k)[_BRANCH_AXIS[branch]]))
    return proj * math.sqrt(HBAR / (2.0 * mass * omega))


def lamb_dicke_factors(modeset: ModeSet, geometry: BeamGeometry,
                       trap: TrapConfig) -> ModeSet:
    """Return a copy of the mode set with Lamb-Dicke factors filled in.

    eta_im = |(k_pi - k_sigma) . e_m| sqrt(hbar/(2 m w_m)) |b_im|, where e_m
    is the oscillation direction of mode m (its branch axis).  The scalar
    prefactor is stored as ``eta_com_equivalent``.
    """
    dk = geometry.delta_k
    out = []
    for m in modeset.modes:
        scal = eta_scalar(dk, m.branch, trap.ion_mass, m.frequency)
        out.append(replace(m, lamb_dicke=scal * np.abs(m.participation),
                           eta_com_equivalent=scal))
    return ModeSet(modes=out)


def compute_modes(trap: TrapConfig,
                  geometry: BeamGeometry | None = None) -> ModeSet:
    """Convenience pipeline: positions -> normal modes -> Lamb-Dicke factors."""
    positions = equilibrium_positions(trap)
    modeset = normal_modes(trap, positions)
    if geometry is not None:
        modeset = lamb_dicke_factors(modeset, geometry, trap)
    return modeset
