"""Estimators used to extract phonon numbers and rates from data.

Sideband-ratio thermometry, thermal fits to sideband Rabi oscillations and
to excitation histograms, exponential cooling-rate fits in the log domain,
and linear heating-rate fits.  All fitters work on plain arrays and can be
fed either simulated results or external two-column data files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .constants import TWO_PI
from .errors import ConvergenceError, NumericalError


@dataclass(frozen=True)
class ThermalDistribution:
    """Thermal phonon distribution p_n = nbar^n / (nbar+1)^(n+1)."""

    nbar: float

    def __post_init__(self):
        if self.nbar < 0.0:
            raise ValueError("nbar must be >= 0")

    def pmf(self, n: np.ndarray | int) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.nbar == 0.0:
            return np.where(n == 0, 1.0, 0.0)
        logp = n * math.log(self.nbar) - (n + 1.0) * math.log(self.nbar + 1.0)
        return np.exp(logp)

    def tail_mass(self, n_min: int) -> float:
        """Total probability of n >= n_min."""
        if self.nbar == 0.0:
            return 1.0 if n_min <= 0 else 0.0
        return (self.nbar / (self.nbar + 1.0)) ** n_min

    def cutoff(self, tail: float = 1e-6, n_cap: int = 100000) -> int:
        """Smallest N with tail mass below ``tail`` beyond it."""
        if self.nbar == 0.0:
            return 0
        n = math.log(tail) / math.log(self.nbar / (self.nbar + 1.0))
        n = int(math.ceil(n))
        if n > n_cap:
            raise NumericalError("thermal truncation budget exceeded")
        return max(n, 1)

    def weights(self, tail: float = 1e-6, n_cap: int = 100000) -> np.ndarray:
        """pmf values 0..cutoff (unnormalized; missing mass below ``tail``)."""
        return self.pmf(np.arange(self.cutoff(tail, n_cap) + 1))


@dataclass
class FitResult:
    """Parameter estimates with linearized 1-sigma uncertainties."""

    params: dict[str, float]
    sigma: dict[str, float]
    residual_norm: float
    converged: bool
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(s < 0.0 for s in self.sigma.values()):
            raise ValueError("uncertainties must be >= 0")


def sideband_ratio_nbar(p_red: float, p_blue: float, *, ion_count: int = 1) -> float:
    """Mean phonon number from red/blue sideband excitation, single ion only.

    The inversion nbar = p_r / (p_b - p_r) assumes a laser addressing a
    single ion; for collective excitation of several ions it is biased, so
    multi-ion input is refused.
    """
    if ion_count != 1:
        raise ValueError(
            "sideband-ratio thermometry is valid for a single addressed ion "
            "only; collective multi-ion spectra bias the inversion")
    if not (0.0 <= p_red <= 1.0 and 0.0 <= p_blue <= 1.0):
        raise ValueError("excitation probabilities must lie in [0, 1]")
    if p_red >= p_blue:
        raise ValueError("p_red >= p_blue: ratio undefined "
                         "(heating-dominated or saturated signal)")
    return p_red / (p_blue - p_red)


def _simplex(objective, starts, *, names, fatol=1e-15, xatol=1e-11,
             maxiter=4000):
    """Derivative-free simplex minimization with multi-start."""
    best = None
    for x0 in starts:
        res = minimize(objective, np.asarray(x0, dtype=float),
                       method="Nelder-Mead",
                       options={"fatol": fatol, "xatol": xatol,
                                "maxiter": maxiter, "maxfev": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise ConvergenceError(f"no start converged for fit {names}")
    return best


def _linearized_sigma(model, popt, y, names, scale=1e-6):
    """1-sigma from the finite-difference Jacobian at the optimum."""
    y = np.asarray(y, dtype=float)
    f0 = model(popt)
    resid = y - f0
    dof = max(y.size - len(popt), 1)
    s2 = float(resid @ resid) / dof
    jac = np.empty((y.size, len(popt)))
    for j, p in enumerate(popt):
        h = scale * max(abs(p), 1e-9)
        pp = np.array(popt, dtype=float)
        pp[j] = p + h
        jac[:, j] = (model(pp) - f0) / h
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        sig = np.full(len(popt), np.nan)
    return dict(zip(names, sig)), math.sqrt(float(resid @ resid))


def _bootstrap_sigma(model_vec, refit, popt, y, names, n_boot, seed):
    """Residual-resampling bootstrap: refit synthetic data sets, return std."""
    rng = np.random.default_rng(seed)
    base = model_vec(popt)
    resid = np.asarray(y, dtype=float) - base
    samples = []
    for _ in range(n_boot):
        yb = base + rng.choice(resid, size=resid.size, replace=True)
        samples.append(refit(yb))
    std = np.asarray(samples).std(axis=0, ddof=1)
    return dict(zip(names, std))


def rabi_excitation(times: np.ndarray, nbar: float, eta: float,
                    carrier_rabi: float, side: str, *,
                    tail: float = 1e-6, n_cap: int = 4000,
                    decay: float = 0.0) -> np.ndarray:
    """Thermal-averaged sideband Rabi signal sum_n p_n sin^2(Omega_n t / 2).

    Blue sideband: Omega_n = eta * Omega * sqrt(n+1); red: eta * Omega *
    sqrt(n).  A nonzero ``decay`` applies a per-Fock Gaussian contrast
    envelope exp(-((n+1) decay t)^2 / 2) to the oscillating part.
    """
    if side not in ("red", "blue"):
        raise ValueError("side must be 'red' or 'blue'")
    dist = ThermalDistribution(nbar)
    nmax = max(dist.cutoff(tail, n_cap), 8)
    n = np.arange(nmax + 1, dtype=float)
    p = dist.pmf(n)
    p /= p.sum()
    omega_n = eta * carrier_rabi * np.sqrt(n + 1.0 if side == "blue" else n)
    t = np.asarray(times, dtype=float)
    if decay == 0.0:
        return p @ np.sin(0.5 * np.outer(omega_n, t)) ** 2
    env = np.exp(-0.5 * np.outer((n + 1.0) * decay, t) ** 2)
    return p @ (0.5 * (1.0 - np.cos(np.outer(omega_n, t)) * env))


def thermal_fit_rabi(times, excitation, eta: float, carrier_rabi: float,
                     side: str, *, fit_rabi: bool = False,
                     decoherence: bool = False, weights=None,
                     bootstrap: int = 0, seed: int = 0) -> FitResult:
    """Weighted least-squares thermal fit of sideband Rabi oscillations.

    Fits nbar, optionally the carrier Rabi frequency (``fit_rabi``) and
    optionally a per-Fock Gaussian contrast decay rate (``decoherence``;
    off by default).  Uncertainties are linearized at the optimum;
    ``bootstrap`` > 0 switches to residual-resampling bootstrap with that
    many synthetic data sets.  Data spanning less than one oscillation of
    the typical sideband Rabi frequency is flagged low-confidence.
    """
    times = np.asarray(times, dtype=float)
    y = np.asarray(excitation, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    decay_scale = 1.0 / max(times.max(), 1e-12)

    names = ["nbar"] + (["omega"] if fit_rabi else []) \
        + (["decay"] if decoherence else [])

    def unpack(x):
        nbar = x[0] ** 2
        i = 1
        omega = carrier_rabi
        if fit_rabi:
            omega = x[i] ** 2 * carrier_rabi
            i += 1
        decay = x[i] ** 2 * decay_scale if decoherence else 0.0
        return nbar, omega, decay

    def model_vec(x):
        nbar, omega, decay = unpack(x)
        return rabi_excitation(times, nbar, eta, omega, side, decay=decay)

    def objective(x):
        r = (model_vec(x) - y) * w
        return float(r @ r)

    starts = []
    for s in (0.1, 1.0, 5.0):
        x0 = [math.sqrt(s)]
        if fit_rabi:
            x0.append(1.0)
        if decoherence:
            x0.append(0.5)
        starts.append(x0)
    best = _simplex(objective, starts, names="thermal_fit_rabi")
    nbar, omega, decay = unpack(best.x)

    popt = [nbar] + ([omega] if fit_rabi else []) \
        + ([decay] if decoherence else [])

    def model_phys(p):
        return rabi_excitation(
            times, p[0], eta, p[1] if fit_rabi else carrier_rabi, side,
            decay=p[-1] if decoherence else 0.0)

    sigma, resid = _linearized_sigma(model_phys, popt, y, names)
    notes = {}
    if bootstrap > 0:
        def refit(yb):
            res = minimize(lambda x: float((((model_vec(x) - yb) * w) ** 2)
                                           .sum()),
                           best.x, method="Nelder-Mead",
                           options={"fatol": 1e-12, "xatol": 1e-8})
            nb, om, dc = unpack(res.x)
            return [nb] + ([om] if fit_rabi else []) \
                + ([dc] if decoherence else [])

        sigma = _bootstrap_sigma(model_phys, refit, popt, y, names,
                                 bootstrap, seed)
        notes["bootstrap"] = bootstrap
    params = dict(zip(names, popt))

    typical = eta * omega * math.sqrt(nbar + 1.0)
    if times.max() * typical < TWO_PI:
        notes["low_confidence"] = True
    return FitResult(params=params, sigma=sigma, residual_norm=resid,
                     converged=bool(best.success), notes=notes)


def histogram_model(nbar: float, n_ions: int) -> np.ndarray:
    """Expected excitation-count probabilities after phonon-to-ion mapping.

    k < N carries the thermal mass at n = k; the k = N bin absorbs the full
    tail sum_{n >= N} p_n.
    """
    dist = ThermalDistribution(nbar)
    p = np.empty(n_ions + 1)
    p[:n_ions] = dist.pmf(np.arange(n_ions))
    p[n_ions] = dist.tail_mass(n_ions)
    return p


def thermal_fit_histogram(histogram, n_ions: int, *,
                          shots: int | None = None,
                          bootstrap: int = 0, seed: int = 0) -> FitResult:
    """Maximum-likelihood thermal fit to an excitation-count histogram.

    ``histogram`` is an array of probabilities or counts over 0..N excited
    ions (an :class:`~eitcool.collective.ExcitationHistogram` works too).
    The estimate depends only on the empirical distribution; ``shots``
    scales the uncertainty.  ``bootstrap`` > 0 switches to multinomial
    resampling of the histogram (requires a shot count).
    """
    counts = getattr(histogram, "counts", None)
    if counts is None:
        counts = np.asarray(getattr(histogram, "probabilities", histogram),
                            dtype=float)
    else:
        counts = np.asarray(counts, dtype=float)
    if shots is None:
        shots = getattr(histogram, "shots", None)
    if counts.size != n_ions + 1:
        raise ValueError("histogram length must be n_ions + 1")
    total = counts.sum()
    if total <= 0.0:
        raise ValueError("histogram is empty")
    freq = counts / total
    n_eff = float(shots) if shots else total if total > 1.5 else 1.0

    notes = {}
    if freq[-1] == 1.0:
        # all mass in the tail bin: likelihood increases monotonically with
        # nbar, only a lower bound can be quoted
        notes["lower_bound"] = True

    if freq[0] == 1.0:
        nbar_hat = 0.0
    else:
        def nll(log_nbar):
            q = histogram_model(math.exp(log_nbar), n_ions)
            q = np.clip(q, 1e-300, None)
            return -float(freq @ np.log(q))

        res = minimize_scalar(nll, bounds=(math.log(1e-4), math.log(1e4)),
                              method="bounded",
                              options={"xatol": 1e-12})
        nbar_hat = math.exp(res.x)

    # observed Fisher information for the 1-sigma interval
    if 0.0 < nbar_hat:
        h = 1e-4 * max(nbar_hat, 1e-3)

        def nll_n(nb):
            q = np.clip(histogram_model(nb, n_ions), 1e-300, None)
            return -float(freq @ np.log(q))

        d2 = (nll_n(nbar_hat + h) - 2.0 * nll_n(nbar_hat)
              + nll_n(max(nbar_hat - h, 1e-12))) / h**2
        sig = 1.0 / math.sqrt(n_eff * d2) if d2 > 0.0 else math.nan
    else:
        sig = math.nan

    if bootstrap > 0:
        if not shots:
            raise ValueError("histogram bootstrap needs a shot count")
        rng = np.random.default_rng(seed)
        res = []
        for _ in range(bootstrap):
            resampled = rng.multinomial(int(shots), freq)
            res.append(thermal_fit_histogram(resampled, n_ions,
                                             shots=shots).params["nbar"])
        sig = float(np.std(res, ddof=1))
        notes["bootstrap"] = bootstrap

    model = histogram_model(nbar_hat, n_ions)
    resid = float(np.linalg.norm(freq - model))
    return FitResult(params={"nbar": nbar_hat}, sigma={"nbar": sig},
                     residual_norm=resid, converged=True, notes=notes)


def cooling_rate_fit(times, nbar, *, floor: float = 1e-3,
                     bootstrap: int = 0, seed: int = 0) -> FitResult:
    """Exponential cooling fit nbar(t) = A exp(-R t) + n_eq in the log domain.

    The least-squares residual is formed on log(nbar), which weights the
    late, nearly-equilibrated part of the dynamics.  Non-positive entries
    are rejected before the transform; the remaining values are floored at
    ``floor`` phonons.  ``bootstrap`` > 0 replaces the linearized
    uncertainties with residual-resampling estimates.
    """
    times = np.asarray(times, dtype=float)
    nbar = np.asarray(nbar, dtype=float)
    keep = nbar > 0.0
    dropped = int(np.count_nonzero(~keep))
    t, y = times[keep], np.log(np.maximum(nbar[keep], floor))
    if t.size < 3:
        raise ValueError("need at least 3 positive nbar samples")

    span = t.max() - t.min()
    amp0 = max(nbar[keep].max() - nbar[keep].min(), floor)
    neq0 = max(nbar[keep].min(), floor)

    def unpack(x):
        return math.exp(x[0]), math.exp(x[1]), x[2] ** 2  # A, R, n_eq

    def model_log(x, tt):
        a, r, neq = unpack(x)
        return np.log(np.maximum(a * np.exp(-r * (tt - times[0])) + neq, floor))

    def objective_for(target):
        def objective(x):
            r = model_log(x, t) - target
            return float(r @ r)
        return objective

    r0 = 2.0 / span
    starts = [[math.log(amp0), math.log(r0 * s), math.sqrt(neq0)]
              for s in (0.2, 1.0, 5.0)]
    best = _simplex(objective_for(y), starts, names="cooling_rate_fit")
    a_hat, r_hat, neq_hat = unpack(best.x)

    names = ["amplitude", "rate", "n_eq"]

    def model_phys(p):
        return np.log(np.maximum(p[0] * np.exp(-p[1] * (t - times[0])) + p[2],
                                 floor))

    sigma, resid = _linearized_sigma(model_phys, [a_hat, r_hat, neq_hat], y,
                                     names)
    notes = {"dropped_points": dropped} if dropped else {}
    if bootstrap > 0:
        def refit(yb):
            res = minimize(objective_for(yb), best.x, method="Nelder-Mead",
                           options={"fatol": 1e-12, "xatol": 1e-8})
            return list(unpack(res.x))

        sigma = _bootstrap_sigma(model_phys, refit, [a_hat, r_hat, neq_hat],
                                 y, names, bootstrap, seed)
        notes["bootstrap"] = bootstrap
    return FitResult(params={"amplitude": a_hat, "rate": r_hat,
                             "n_eq": neq_hat},
                     sigma=sigma, residual_norm=resid,
                     converged=bool(best.success), notes=notes)


def heating_rate_fit(times, nbar, *, bootstrap: int = 0,
                     seed: int = 0) -> FitResult:
    """Ordinary least-squares line nbar(t) = rate * t + offset."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(nbar, dtype=float)
    if t.size < 3:
        raise ValueError("need at least 3 samples for a heating-rate fit")
    sxx = float(np.sum((t - t.mean()) ** 2))
    if sxx == 0.0:
        raise NumericalError("rank-deficient design: all wait times equal")

    def ols(yy):
        slope = float(np.sum((t - t.mean()) * (yy - yy.mean())) / sxx)
        return slope, float(yy.mean() - slope * t.mean())

    slope, intercept = ols(y)
    resid = y - (slope * t + intercept)
    s2 = float(resid @ resid) / max(t.size - 2, 1)
    sigma = {"rate": math.sqrt(s2 / sxx),
             "offset": math.sqrt(s2 * (1.0 / t.size + t.mean() ** 2 / sxx))}
    notes = {}
    if bootstrap > 0:
        sigma = _bootstrap_sigma(lambda p: p[0] * t + p[1],
                                 lambda yb: list(ols(yb)),
                                 [slope, intercept], y, ["rate", "offset"],
                                 bootstrap, seed)
        notes["bootstrap"] = bootstrap
    return FitResult(params={"rate": slope, "offset": intercept},
                     sigma=sigma, residual_norm=float(np.linalg.norm(resid)),
                     converged=True, notes=notes)
