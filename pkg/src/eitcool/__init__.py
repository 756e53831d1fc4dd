"""Simulation and analysis suite for EIT ground-state cooling of ion strings.

Subpackages by task: normal-mode mechanics (:mod:`~eitcool.chain`),
closed-form cooling theory (:mod:`~eitcool.rates`), master-equation oracle
(:mod:`~eitcool.lindblad`), collective sideband dynamics and RAP phonon
readout (:mod:`~eitcool.collective`), data-analysis estimators
(:mod:`~eitcool.fits`) and the CLI harness (:mod:`~eitcool.cli`).
"""

__version__ = "0.1.0"

from .chain import (BeamGeometry, Mode, ModeSet, TrapConfig, compute_modes,
                    equilibrium_positions, lamb_dicke_factors, normal_modes)
from .collective import (ConstantDrive, ExcitationHistogram, ReducedBasis,
                         SweepProfile, build_reduced_basis,
                         brute_force_reference, histogram_sampler,
                         rap_fock_fidelities, rap_transfer, sideband_spectrum)
from .fits import (FitResult, ThermalDistribution, cooling_rate_fit,
                   heating_rate_fit, sideband_ratio_nbar,
                   thermal_fit_histogram, thermal_fit_rabi)
from .lindblad import (LambdaSystem, absorption_spectrum, build_liouvillian,
                       simulate_eit_cooling, simulate_lightshift_spectroscopy,
                       simulate_polarization_ramsey, steady_state)
from .rates import (CoolingTrajectory, EITBeams, RateCoefficients,
                    cooling_rate, evolve_nbar, inverse_light_shift,
                    light_shift, multimode_cooling_scan, rate_coefficients,
                    steady_state_nbar)

__all__ = [name for name in dir() if not name.startswith("_")]
