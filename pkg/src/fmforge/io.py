"""JSON/CSV/JSONL serialisation, config loading and run manifests.

Floats go through :mod:`json`, which writes the shortest decimal that reads
back to the same IEEE-754 double, so pulses round-trip bit-exactly.
"""
import csv
import hashlib
import json
import os
import platform
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata

import numpy as np

from .modes import ModeStructure, TrapConfig
from .optimizer import ObjectiveSpec
from .pulses import ContinuousPulse, DiscretePulse

SCHEMA_VERSION = 1
TWO_PI = 2 * np.pi
FREQ_UNITS = {"rad_per_s": 1.0, "Hz_times_2pi": TWO_PI, "kHz_times_2pi": TWO_PI * 1e3}
DEFAULT_FREQ_UNIT = "kHz_times_2pi"


class ConfigError(ValueError):
    """Invalid or unreadable configuration; the message names the field."""


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj):
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# -- pulses -------------------------------------------------------------------

def pulse_to_dict(pulse):
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": pulse.kind,
        "tau_s": float(pulse.duration),
        "segment_freqs_rad_s": [float(v) for v in pulse.params],
        "symmetric": bool(pulse.symmetric),
        "omega_rad_s": None if pulse.omega is None else float(pulse.omega),
        "meta": _to_jsonable(dict(pulse.meta)),
    }
    if pulse.kind == "continuous":
        out["substeps"] = int(pulse.substeps)
    return out


def pulse_from_dict(data, where="pulse"):
    _check_version(data, where)
    kind = _require(data, "kind", where)
    common = dict(duration=float(_require(data, "tau_s", where)),
                  symmetric=bool(data.get("symmetric", False)),
                  omega=data.get("omega_rad_s"), meta=dict(data.get("meta") or {}))
    freqs = np.array(_require(data, "segment_freqs_rad_s", where), dtype=float)
    try:
        if kind == "discrete":
            return DiscretePulse(freqs, **common)
        if kind == "continuous":
            return ContinuousPulse(freqs, substeps=int(_require(data, "substeps", where)), **common)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: expected 'discrete' or 'continuous', got {kind!r}")


def save_pulse(path, pulse):
    write_json(path, pulse_to_dict(pulse))


def load_pulse(path):
    return pulse_from_dict(read_json(path), str(path))


# -- modes --------------------------------------------------------------------

def modes_to_dict(modes):
    return {
        "schema_version": SCHEMA_VERSION,
        "n_modes": modes.n_modes,
        "mode_freqs_rad_s": modes.mode_freqs,
        "mode_vectors": modes.mode_vectors,
        "lamb_dicke": modes.lamb_dicke,
        "positions": modes.positions,
    }


def modes_from_dict(data, where="modes"):
    _check_version(data, where)
    freqs = np.array(_require(data, "mode_freqs_rad_s", where), dtype=float)
    vectors = np.array(_require(data, "mode_vectors", where), dtype=float)
    eta = np.array(_require(data, "lamb_dicke", where), dtype=float)
    pos = data.get("positions")
    if eta.shape != (len(freqs), vectors.shape[1]) or vectors.shape[0] != len(freqs):
        raise ConfigError(f"{where}: inconsistent mode array shapes")
    return ModeStructure(freqs, vectors, eta, None if pos is None else np.array(pos, dtype=float))


def save_modes(path, modes):
    write_json(path, modes_to_dict(modes))


def load_modes(path):
    return modes_from_dict(read_json(path), str(path))


# -- config -------------------------------------------------------------------

def _check_version(data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{where}.schema_version: unsupported version {version!r}")


def _require(data, key, where):
    if key not in data:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return data[key]


def freq_scale(config, where="config"):
    unit = config.get("freq_unit", DEFAULT_FREQ_UNIT)
    if unit not in FREQ_UNITS:
        raise ConfigError(f"{where}.freq_unit: unknown unit {unit!r}; choose from {sorted(FREQ_UNITS)}")
    return FREQ_UNITS[unit]


_TRAP_FREQS = ("axial_freq", "transverse_freq")


def trap_from_dict(data, scale, where="trap"):
    unknown = set(data) - {f.name for f in fields(TrapConfig)}
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    kw = dict(data)
    for key in _TRAP_FREQS:
        if kw.get(key) is not None:
            kw[key] = float(kw[key]) * scale
    try:
        return TrapConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ObjectiveSpec fields given in the config frequency unit
_SPEC_FREQS = ("uncertainty", "learning_rate", "window_margin", "initial_jitter")


def spec_from_dict(data, scale, where="optimizer"):
    unknown = set(data) - {f.name for f in fields(ObjectiveSpec)}
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    kw = dict(data)
    for key in _SPEC_FREQS:
        if kw.get(key) is not None:
            kw[key] = float(kw[key]) * scale
    try:
        return ObjectiveSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def spec_to_dict(spec, scale=FREQ_UNITS[DEFAULT_FREQ_UNIT]):
    out = asdict(spec)
    for key in _SPEC_FREQS:
        out[key] = out[key] / scale
    return out


def load_config(path):
    config = read_json(path)
    _check_version(config, str(path))
    return config


def config_hash(config):
    """sha256 of the canonical JSON form; stable across platforms."""
    text = json.dumps(_to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def parse_pair(text, n_ions=None):
    """``"1,2"`` (1-based, as on the command line) -> ``(0, 1)``."""
    try:
        a, b = (int(v) for v in str(text).split(","))
    except ValueError:
        raise ConfigError(f"pair: expected two comma-separated ion numbers, got {text!r}") from None
    if a == b or min(a, b) < 1 or (n_ions is not None and max(a, b) > n_ions):
        raise ConfigError(f"pair: invalid ion numbers {text!r}")
    return a - 1, b - 1


# -- tables -------------------------------------------------------------------

def write_landscape_csv(path, landscape):
    rows = landscape.rows()
    lines = ["eps1_rad_s,eps2_rad_s,error"]
    lines += [f"{repr(float(a))},{repr(float(b))},{repr(float(c))}" for a, b, c in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def read_landscape_csv(path, threshold=None):
    """Inverse of :func:`write_landscape_csv`; rows must be eps2-fastest."""
    from .evaluation import DEFAULT_THRESHOLD, Landscape

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        data = np.array([[float(r["eps1_rad_s"]), float(r["eps2_rad_s"]), float(r["error"])]
                         for r in reader])
    n1 = len(np.unique(data[:, 0]))
    n2 = len(data) // max(n1, 1)
    if n1 * n2 != len(data):
        raise ConfigError(f"{path}: rows do not form a full grid")
    grid = data.reshape(n1, n2, 3)
    return Landscape(grid[:, 0, 0], grid[0, :, 1], grid[:, :, 2],
                     DEFAULT_THRESHOLD if threshold is None else threshold)


def write_table_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in rows]
    atomic_write(path, "\n".join(lines) + "\n")


def write_curve_jsonl(path, curve):
    lines = [json.dumps(_to_jsonable(row), sort_keys=True) for row in curve]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_curve_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- manifests ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    config_hash: str
    seeds: dict
    inputs: dict
    outputs: dict
    timings: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    version: str = field(default_factory=tool_version)
    schema_version: int = SCHEMA_VERSION
    created_unix: float = field(default_factory=time.time)
    python: str = field(default_factory=platform.python_version)

    def write(self, path):
        write_json(path, asdict(self))


def manifest_path(out_path):
    return os.fspath(out_path) + ".manifest.json"
