"""Experiment configuration files: TOML with explicit unit suffixes.

Every physical quantity in a config file is a string carrying its unit,
e.g. ``omega_axial = "0.50 MHz"`` or ``duration = "4 ms"``; bare numbers
are accepted only for dimensionless fields (counts, fractions, unit
vectors, seeds).  Frequencies are ordinary cycles/s in the file and are
converted to angular frequencies at this boundary.  Unknown keys are
rejected with the offending key path and, where possible, line number.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .chain import BeamGeometry, TrapConfig
from .constants import TWO_PI
from .errors import ConfigError
from .rates import EITBeams, inverse_light_shift

_FREQ = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9}
_LENGTH = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_MASS = {"u": 1.0, "amu": 1.0}  # stored in atomic mass units
_UNITS = {"frequency": _FREQ, "time": _TIME, "length": _LENGTH, "mass": _MASS}


def parse_quantity(text, kind: str, key: str = "") -> float:
    """Parse '0.50 MHz' style strings into SI-ish base units.

    Frequencies come back in plain cycles/s (Hz), times in s, lengths in m,
    masses in atomic mass units.
    """
    if not isinstance(text, str):
        raise ConfigError(
            f"{key or 'value'} must be a quoted string with an explicit unit, "
            f"got {text!r}")
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([A-Za-zµ]+)\s*", text)
    if not m:
        raise ConfigError(f"{key or 'value'}: cannot parse quantity {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ConfigError(f"{key or 'value'}: bad number in {text!r}") from None
    units = _UNITS[kind]
    unit = m.group(2)
    if unit not in units:
        raise ConfigError(
            f"{key or 'value'}: unit {unit!r} is not a {kind} unit "
            f"(expected one of {sorted(units)})")
    return value * units[unit]


# --- schema -----------------------------------------------------------------
# leaf entry: (kind, required, default); kind is a python type, a quantity
# dimension name, 'vec3', or ('choice', options)

_SCHEMA = {
    "seed": (int, False, 0),
    "output_dir": (str, False, "out"),
    "trap": {
        "ion_count": (int, True, None),
        "ion_mass": ("mass", True, None),
        "omega_axial": ("frequency", True, None),
        "omega_radial_1": ("frequency", True, None),
        "omega_radial_2": ("frequency", True, None),
    },
    "geometry": {
        "wavelength": ("length", True, None),
        "unit_k_sigma": ("vec3", True, None),
        "unit_k_pi": ("vec3", True, None),
    },
    "beams": {
        "rabi_sigma": ("frequency", False, None),
        "light_shift": ("frequency", False, None),
        "rabi_pi": ("frequency", True, None),
        "detuning": ("frequency", True, None),
        "detuning_pi": ("frequency", False, None),
        "linewidth": ("frequency", True, None),
        "branching_to_dressed": (float, False, 2.0 / 3.0),
    },
    "cooling_range": {
        "omega_min": ("frequency", True, None),
        "omega_max": ("frequency", True, None),
        "points": (int, False, 201),
        "branch": (("choice", ("axial", "radial_1", "radial_2")), False,
                   "radial_1"),
    },
    "dynamics": {
        "engine": (("choice", ("rate", "lindblad")), False, "rate"),
        "duration": ("time", True, None),
        "samples": (int, False, 200),
        "initial_nbar": (float, False, 5.0),
        "heating_rate": (float, False, 0.0),
        "branch": (("choice", ("axial", "radial_1", "radial_2")), False,
                   "radial_1"),
        "mode_index": (int, False, 0),
        "fock_cutoff": (int, False, 12),
    },
    "spectrum": {
        "branch": (("choice", ("axial", "radial_1", "radial_2")), False,
                   "radial_1"),
        "mode_index": (int, False, 0),
        "eta": (float, True, None),
        "rabi": ("frequency", True, None),
        "pulse": ("time", True, None),
        "span": ("frequency", True, None),
        "points": (int, False, 81),
        "nbar": (float, True, None),
        "side": (("choice", ("red", "blue", "both")), False, "both"),
    },
    "rap": {
        "branch": (("choice", ("axial", "radial_1", "radial_2")), False,
                   "radial_1"),
        "mode_index": (int, False, 0),
        "eta": (float, True, None),
        "span": ("frequency", True, None),
        "duration": ("time", True, None),
        "peak_rabi": ("frequency", True, None),
        "truncation": (float, False, 0.05),
        "start_state": (("choice", ("ground", "metastable")), False, "ground"),
        "nbar": (float, True, None),
        "shots": (int, False, 0),
        "fidelity_max_n": (int, False, 0),
    },
    "fit": {
        "model": (("choice", ("cooling", "heating", "histogram", "rabi")),
                  True, None),
        "eta": (float, False, 0.1),
        "rabi": ("frequency", False, None),
        "side": (("choice", ("red", "blue")), False, "blue"),
        "ion_count": (int, False, 1),
    },
}

_QUANTITY_KINDS = ("frequency", "time", "length", "mass")


def _find_line(raw: str, key: str) -> str:
    pattern = re.compile(rf"^\s*(\[+)?\s*\"?{re.escape(key)}\"?\s*[\]=.]")
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if pattern.match(line):
            return f" (line {lineno})"
    return ""


def _validate(node: dict, schema: dict, raw: str, path: str = "") -> dict:
    out = {}
    for key, value in node.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {here!r}{_find_line(raw, key)}")
        entry = schema[key]
        if isinstance(entry, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a table{_find_line(raw, key)}")
            out[key] = _validate(value, entry, raw, here)
            continue
        kind, _required, _default = entry
        if kind in _QUANTITY_KINDS:
            out[key] = parse_quantity(value, kind, here)
        elif kind == "vec3":
            if (not isinstance(value, list) or len(value) != 3
                    or not all(isinstance(v, (int, float)) for v in value)):
                raise ConfigError(f"{here} must be a list of three numbers"
                                  f"{_find_line(raw, key)}")
            out[key] = tuple(float(v) for v in value)
        elif isinstance(kind, tuple) and kind[0] == "choice":
            if value not in kind[1]:
                raise ConfigError(f"{here} must be one of {kind[1]}, got "
                                  f"{value!r}{_find_line(raw, key)}")
            out[key] = value
        elif kind is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{here} must be an integer"
                                  f"{_find_line(raw, key)}")
            out[key] = value
        elif kind is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{here} must be a number"
                                  f"{_find_line(raw, key)}")
            out[key] = float(value)
        elif kind is str:
            if not isinstance(value, str):
                raise ConfigError(f"{here} must be a string"
                                  f"{_find_line(raw, key)}")
            out[key] = value
        else:  # pragma: no cover - schema bug
            raise AssertionError(f"bad schema entry for {here}")
    # required keys and defaults
    for key, entry in schema.items():
        if isinstance(entry, dict):
            continue
        kind, required, default = entry
        if key not in out:
            if required:
                raise ConfigError(f"missing required key "
                                  f"{(path + '.' if path else '') + key!r}")
            if default is not None:
                out[key] = default
    return out


@dataclass
class ExperimentConfig:
    """Validated configuration plus provenance of the source file."""

    data: dict
    path: Path | None = None
    config_hash: str = ""
    seed: int = 0
    output_dir: str = "out"
    _cache: dict = field(default_factory=dict, repr=False)

    def section(self, name: str) -> dict:
        if name not in self.data:
            raise ConfigError(f"config has no [{name}] section, required by "
                              "this command")
        return self.data[name]

    def has(self, name: str) -> bool:
        return name in self.data

    def trap(self) -> TrapConfig:
        if "trap" not in self._cache:
            t = self.section("trap")
            self._cache["trap"] = TrapConfig(
                ion_count=t["ion_count"],
                ion_mass_amu=t["ion_mass"],
                omega_axial=TWO_PI * t["omega_axial"],
                omega_radial_1=TWO_PI * t["omega_radial_1"],
                omega_radial_2=TWO_PI * t["omega_radial_2"])
        return self._cache["trap"]

    def geometry(self) -> BeamGeometry:
        if "geometry" not in self._cache:
            g = self.section("geometry")
            try:
                self._cache["geometry"] = BeamGeometry(
                    wavelength=g["wavelength"],
                    unit_k_sigma=g["unit_k_sigma"],
                    unit_k_pi=g["unit_k_pi"])
            except ValueError as exc:
                raise ConfigError(f"geometry: {exc}") from exc
        return self._cache["geometry"]

    def beams(self) -> EITBeams:
        if "beams" not in self._cache:
            b = self.section("beams")
            delta = TWO_PI * b["detuning"]
            if ("rabi_sigma" in b) == ("light_shift" in b):
                raise ConfigError(
                    "beams: give exactly one of 'rabi_sigma' or 'light_shift'")
            if "rabi_sigma" in b:
                omega_sigma = TWO_PI * b["rabi_sigma"]
            else:
                omega_sigma = inverse_light_shift(TWO_PI * b["light_shift"],
                                                  delta)
            bg = b["branching_to_dressed"]
            try:
                self._cache["beams"] = EITBeams(
                    omega_sigma=omega_sigma,
                    omega_pi=TWO_PI * b["rabi_pi"],
                    delta=delta,
                    delta_pi=TWO_PI * b.get("detuning_pi", b["detuning"]),
                    gamma=TWO_PI * b["linewidth"],
                    branching=(bg, 1.0 - bg))
            except ValueError as exc:
                raise ConfigError(f"beams: {exc}") from exc
        return self._cache["beams"]


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    raw = raw_bytes.decode("utf-8", errors="replace")
    try:
        parsed = tomllib.loads(raw)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    data = _validate(parsed, _SCHEMA, raw)
    return ExperimentConfig(
        data=data, path=path,
        config_hash=hashlib.sha256(raw_bytes).hexdigest()[:16],
        seed=data.get("seed", 0),
        output_dir=data.get("output_dir", "out"))
