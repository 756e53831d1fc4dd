"""Command-line front end.

Verbs: modes | cooling-range | dynamics | spectrum | rap | fit.  Each verb
reads a validated config file, runs one workflow and writes CSV bundles
with provenance metadata.  Same config + same seed produces byte-identical
output files.

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 physics-regime
error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .chain import compute_modes, eta_scalar
from .collective import (SweepProfile, histogram_sampler, rap_fock_fidelities,
                         rap_transfer, sideband_spectrum)
from .config import ExperimentConfig, load_config
from .constants import TWO_PI
from .csvio import read_data, write_csv
from .errors import (ConfigError, EitCoolError, NumericalError,
                     PhysicsRegimeError)
from .fits import (ThermalDistribution, cooling_rate_fit, heating_rate_fit,
                   thermal_fit_histogram, thermal_fit_rabi)
from .lindblad import LambdaSystem, simulate_eit_cooling
from .rates import (cooling_rate, light_shift, multimode_cooling_scan,
                    rate_coefficients, steady_state_nbar)


def _pmap(fn, items, threads: int):
    """Order-preserving map, optionally fanned out to a thread pool."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _metadata(cfg: ExperimentConfig, command: str, seed: int) -> dict:
    return {"generator": f"eitcool {__version__}", "command": command,
            "config_hash": cfg.config_hash, "seed": seed}


def _print_resolved(cfg: ExperimentConfig) -> None:
    trap = cfg.trap()
    print(f"trap: {trap.ion_count} ions, {trap.ion_mass_amu:g} u, "
          f"f_axial={trap.omega_axial / TWO_PI / 1e6:.6g} MHz, "
          f"f_radial=({trap.omega_radial_1 / TWO_PI / 1e6:.6g}, "
          f"{trap.omega_radial_2 / TWO_PI / 1e6:.6g}) MHz")
    if cfg.has("beams"):
        beams = cfg.beams()
        print(f"beams: rabi_sigma={beams.omega_sigma / TWO_PI / 1e6:.6g} MHz, "
              f"rabi_pi={beams.omega_pi / TWO_PI / 1e6:.6g} MHz, "
              f"detuning={beams.delta / TWO_PI / 1e6:.6g} MHz, "
              f"linewidth={beams.gamma / TWO_PI / 1e6:.6g} MHz")
        print(f"derived light shift: {light_shift(beams) / TWO_PI / 1e6:.6g} MHz")
    if cfg.has("geometry"):
        modeset = compute_modes(cfg.trap(), cfg.geometry())
        print("modes (branch index f_MHz eta):")
        for branch in ("axial", "radial_1", "radial_2"):
            for i, m in enumerate(modeset.branch(branch)):
                print(f"  {branch} {i} {m.frequency_hz / 1e6:.6f} "
                      f"{m.eta_com_equivalent:.6f}")


def cmd_modes(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> None:
    modeset = compute_modes(cfg.trap(), cfg.geometry())
    n = cfg.trap().ion_count
    cols: dict = {"branch": [], "mode_index": [], "freq_hz": []}
    for i in range(n):
        cols[f"b_{i + 1}"] = []
    for i in range(n):
        cols[f"eta_{i + 1}"] = []
    for branch in ("axial", "radial_1", "radial_2"):
        for idx, mode in enumerate(modeset.branch(branch)):
            cols["branch"].append(branch)
            cols["mode_index"].append(idx)
            cols["freq_hz"].append(mode.frequency_hz)
            for i in range(n):
                cols[f"b_{i + 1}"].append(mode.participation[i])
                cols[f"eta_{i + 1}"].append(mode.lamb_dicke[i])
    write_csv(out / "modes.csv", cols, _metadata(cfg, "modes", seed))
    for branch in ("axial", "radial_1", "radial_2"):
        f = modeset.frequencies(branch) / TWO_PI / 1e6
        print(f"{branch}: {len(f)} modes, {f.min():.4f} - {f.max():.4f} MHz")


def cmd_cooling_range(cfg: ExperimentConfig, out: Path, seed: int,
                      threads: int) -> None:
    sec = cfg.section("cooling_range")
    beams = cfg.beams()
    trap = cfg.trap()
    dk = cfg.geometry().delta_k
    omegas = TWO_PI * np.linspace(sec["omega_min"], sec["omega_max"],
                                  sec["points"])

    def point(w: float):
        rc = rate_coefficients(beams, w)
        eta = eta_scalar(dk, sec["branch"], trap.ion_mass, w)
        if rc.a_minus > rc.a_plus:
            return (rc.a_plus, rc.a_minus, steady_state_nbar(rc),
                    cooling_rate(eta, rc), "ok")
        return (rc.a_plus, rc.a_minus, float("nan"),
                cooling_rate(eta, rc), "heating")

    rows = _pmap(point, omegas, threads)
    write_csv(out / "cooling_range.csv",
              {"omega_hz": omegas / TWO_PI,
               "a_plus": [r[0] for r in rows],
               "a_minus": [r[1] for r in rows],
               "nbar_ss": [r[2] for r in rows],
               "rate_per_s": [r[3] for r in rows],
               "status": [r[4] for r in rows]},
              _metadata(cfg, "cooling-range", seed))
    n_ok = sum(1 for r in rows if r[4] == "ok")
    print(f"cooling-range: {len(rows)} points, {n_ok} in the cooling regime")


def cmd_dynamics(cfg: ExperimentConfig, out: Path, seed: int,
                 threads: int) -> None:
    sec = cfg.section("dynamics")
    if sec["engine"] == "rate":
        traj = multimode_cooling_scan(
            cfg.trap(), cfg.geometry(), cfg.beams(), sec["duration"],
            nbar0=sec["initial_nbar"], heating_rate=sec["heating_rate"],
            samples=sec["samples"])
        n_modes, n_t = traj.nbar.shape
        write_csv(out / "dynamics_rate.csv",
                  {"t_s": np.tile(traj.times, n_modes),
                   "mode_id": [traj.mode_labels[i]
                               for i in range(n_modes) for _ in range(n_t)],
                   "nbar": traj.nbar.reshape(-1)},
                  _metadata(cfg, "dynamics", seed))
        cooled = sum(1 for s in traj.status if s == "ok")
        print(f"dynamics(rate): {n_modes} modes, {cooled} cooling, "
              f"{n_modes - cooled} heating")
    else:
        modeset = compute_modes(cfg.trap(), cfg.geometry())
        mode = modeset.branch(sec["branch"])[sec["mode_index"]]
        sys_ = LambdaSystem(beams=cfg.beams(), fock_cutoff=sec["fock_cutoff"],
                            eta_total=mode.eta_com_equivalent,
                            mode_frequency=mode.frequency)
        res = simulate_eit_cooling(sys_, sec["duration"],
                                   nbar0=sec["initial_nbar"],
                                   samples=sec["samples"])
        write_csv(out / "dynamics_lindblad.csv",
                  {"t_s": res.times, "nbar": res.nbar, "pe": res.pe,
                   "scatter_integral": res.scatter_integral},
                  _metadata(cfg, "dynamics", seed))
        print(f"dynamics(lindblad): mode {sec['branch']}[{sec['mode_index']}] "
              f"at {mode.frequency_hz / 1e6:.4f} MHz, final nbar "
              f"{res.nbar[-1]:.4g}")


def cmd_spectrum(cfg: ExperimentConfig, out: Path, seed: int,
                 threads: int) -> None:
    sec = cfg.section("spectrum")
    modeset = compute_modes(cfg.trap(), cfg.geometry())
    mode = modeset.branch(sec["branch"])[sec["mode_index"]]
    eta_vec = sec["eta"] * np.abs(mode.participation)
    dets = TWO_PI * np.linspace(-sec["span"] / 2.0, sec["span"] / 2.0,
                                sec["points"])
    sides = ("red", "blue") if sec["side"] == "both" else (sec["side"],)
    for side in sides:
        res = sideband_spectrum(cfg.trap().ion_count, eta_vec, sec["nbar"],
                                TWO_PI * sec["rabi"], sec["pulse"], dets,
                                side)
        write_csv(out / f"spectrum_{side}.csv",
                  {"detuning_hz": res.detunings / TWO_PI,
                   "mean_excited_fraction": res.mean_excited_fraction},
                  _metadata(cfg, "spectrum", seed))
        print(f"spectrum({side}): peak excited fraction "
              f"{res.mean_excited_fraction.max():.4f}")


def cmd_rap(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> None:
    sec = cfg.section("rap")
    modeset = compute_modes(cfg.trap(), cfg.geometry())
    mode = modeset.branch(sec["branch"])[sec["mode_index"]]
    n_ions = cfg.trap().ion_count
    eta_vec = sec["eta"] * np.abs(mode.participation)
    sweep = SweepProfile(duration=sec["duration"], span_hz=sec["span"],
                         peak_rabi_hz=sec["peak_rabi"],
                         truncation=sec["truncation"])
    weights = ThermalDistribution(sec["nbar"]).weights(1e-4)
    hist = rap_transfer(n_ions, eta_vec, sweep, weights / weights.sum(),
                        sec["start_state"])
    if sec["shots"] > 0:
        hist = histogram_sampler(hist.probabilities, sec["shots"], seed)
    write_csv(out / "rap_histogram.csv",
              {"k_excited": np.arange(n_ions + 1),
               "probability": hist.probabilities},
              _metadata(cfg, "rap", seed))
    print(f"rap: mean excited ions {hist.mean:.4f} (start {sec['start_state']})")
    if sec["fidelity_max_n"] > 0:
        ns = np.arange(sec["fidelity_max_n"] + 1)
        fid = rap_fock_fidelities(n_ions, eta_vec, sweep, ns)
        write_csv(out / "rap_fidelity.csv", {"n": ns, "fidelity": fid},
                  _metadata(cfg, "rap", seed))
        print(f"rap: mapping fidelity min {fid.min():.4f} over n <= "
              f"{sec['fidelity_max_n']}")


def cmd_fit(cfg: ExperimentConfig | None, out: Path, seed: int, threads: int,
            data_file: str = "", model: str = "") -> None:
    options = cfg.section("fit") if cfg is not None and cfg.has("fit") else {}
    model = model or options.get("model")
    if not model:
        raise ConfigError("fit: no model given (use --model or a [fit] section)")
    names, data = read_data(data_file)
    x, y = data[:, 0], data[:, 1]
    if model == "cooling":
        res = cooling_rate_fit(x, y)
    elif model == "heating":
        res = heating_rate_fit(x, y)
    elif model == "histogram":
        res = thermal_fit_histogram(y, len(y) - 1)
    elif model == "rabi":
        if "rabi" not in options:
            raise ConfigError("fit: rabi model needs 'rabi' and 'eta' in [fit]")
        res = thermal_fit_rabi(x, y, options["eta"],
                               TWO_PI * options["rabi"], options["side"])
    else:  # pragma: no cover - argparse/choice guard
        raise ConfigError(f"unknown fit model {model!r}")
    print(f"fit model: {model}  ({data_file}, columns {names[0]},{names[1]})")
    for key, value in res.params.items():
        sig = res.sigma.get(key, float("nan"))
        print(f"  {key} = {value:.6g} +- {sig:.3g}")
    print(f"  residual_norm = {res.residual_norm:.4g}")
    print(f"  converged = {res.converged}")
    for key, value in res.notes.items():
        print(f"  note: {key} = {value}")


_COMMANDS = {
    "modes": cmd_modes,
    "cooling-range": cmd_cooling_range,
    "dynamics": cmd_dynamics,
    "spectrum": cmd_spectrum,
    "rap": cmd_rap,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitcool",
        description="Simulation and analysis workflows for EIT cooling of "
                    "ion strings")
    parser.add_argument("--config", help="experiment config file (TOML with units)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override the config output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid sweeps")
    parser.add_argument("--dry-run", action="store_true",
                        help="print resolved physical parameters and exit")
    parser.add_argument("--version", action="version",
                        version=f"eitcool {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sub.add_parser(name, help=f"run the {name} workflow")
    fit = sub.add_parser("fit", help="fit a model to a two-column data file")
    fit.add_argument("data", help="CSV file: '#' metadata, one header line, data")
    fit.add_argument("--model",
                     choices=("cooling", "heating", "histogram", "rabi"),
                     default="", help="fit model (or set [fit] in the config)")
    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    cfg = None
    if args.config:
        cfg = load_config(args.config)
    elif args.command != "fit":
        raise ConfigError("--config is required for this command")

    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    out = Path(args.out if args.out else (cfg.output_dir if cfg else "out"))

    if args.dry_run:
        if cfg is None:
            raise ConfigError("--dry-run needs a config file")
        _print_resolved(cfg)
        return 0

    if args.command == "fit":
        cmd_fit(cfg, out, seed, args.threads, data_file=args.data,
                model=args.model)
    else:
        _COMMANDS[args.command](cfg, out, seed, args.threads)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except PhysicsRegimeError as exc:
        print(f"physics-regime error: {exc}", file=sys.stderr)
        return 4
    except EitCoolError as exc:  # pragma: no cover - catch-all guard
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
