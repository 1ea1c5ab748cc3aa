"""Flat ``section.key = value`` run configuration.

Values are JSON literals (numbers, double-quoted strings, booleans, arrays).
A ``[section]`` header prefixes the keys that follow it. ``#`` starts a
comment outside of strings.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .drive import Beat, LineshapePumps, Step, TablePumps, detunings_for
from .harness import RunSettings
from .model import NoiseFieldConfig, ParameterError, SystemParams

SECTION_ORDER = ("system", "drive", "pump", "noise3", "noise4", "run", "dsp", "validation",
                 "sweep", "output")

# key -> (type, default); a default of ... means "required when relevant"
SCHEMA = {
    "system.gamma22": (float, 1.0),
    "system.gamma33": (float, 1.0),
    "system.omega": (float, None),
    "system.delta_omega": (float, None),
    "system.coherence_source": (float, 1.0),
    "drive.schedule": (("step", "beat"), ...),
    "drive.t_m": (float, None),
    "drive.omega1": (float, None),
    "drive.omega2": (float, None),
    "drive.delta_w": (float, None),
    "pump.mode": (("table", "lineshape"), "lineshape"),
    "pump.profile": (("lorentzian", "gaussian"), "lorentzian"),
    "pump.w33_weak": (float, None),
    "pump.w33_strong": (float, None),
    "pump.w44_weak": (float, None),
    "pump.w44_strong": (float, None),
    "noise3.w_max": (float, 0.0),
    "noise3.bandwidth": (float, ...),
    "noise3.detuning": (float, None),
    "noise4.w_max": (float, 0.0),
    "noise4.bandwidth": (float, ...),
    "noise4.detuning": (float, None),
    "run.trajectories": (int, 64),
    "run.horizon_periods": (float, 256.0),
    "run.burn_in_periods": (float, 5.0),
    "run.seed": (int, 0),
    "run.workers": (int, 1),
    "run.bisect_tol": (float, 1e-9),
    "dsp.bins_per_period": (int, 32),
    "dsp.threshold_fraction": (float, 0.1),
    "dsp.segment_length": (int, 1024),
    "dsp.overlap": (float, 0.5),
    "dsp.window": (("hann", "rectangular"), "hann"),
    "dsp.guard_bins": (int, 2),
    "dsp.background_window": (int, 20),
    "dsp.n_harmonics": (int, 5),
    "validation.factor": (float, 3.0),
    "sweep.multipliers": (list, None),
    "sweep.min_multiplier": (float, None),
    "sweep.max_multiplier": (float, None),
    "sweep.points": (int, None),
    "output.dir": (str, None),
}


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key:
            where.append(f"key {key!r}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    settings: RunSettings
    sweep_values: tuple | None
    out_dir: str | None
    resolved: dict

    def serialize(self) -> str:
        return serialize_config(self.resolved)


def _strip_comment(line: str) -> str:
    in_str = False
    escaped = False
    for i, ch in enumerate(line):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return line[:i]
    return line


def _coerce(key, kind, value, line):
    if isinstance(kind, tuple):
        if not isinstance(value, str) or value not in kind:
            raise ConfigError(f"expected one of {list(kind)}, got {value!r}", key, line)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key, line)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key, line)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key, line)
        return value
    if kind is list:
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"expected a list of numbers, got {value!r}", key, line)
        return [float(v) for v in value]
    raise AssertionError(kind)


def read_raw(text: str) -> tuple[dict, dict]:
    """Parse text into ``{key: value}`` plus ``{key: line_number}``."""
    values, lines = {}, {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTION_ORDER:
                raise ConfigError(f"unknown section {section!r}", line=lineno)
            continue
        key, sep, value_text = line.partition("=")
        if not sep:
            raise ConfigError("expected 'key = value'", line=lineno)
        key = key.strip()
        if section and "." not in key:
            key = f"{section}.{key}"
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, lineno)
        if key in values:
            raise ConfigError("duplicate key", key, lineno)
        try:
            value = json.loads(value_text.strip())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse value {value_text.strip()!r}: {exc.msg}",
                              key, lineno) from None
        values[key] = _coerce(key, SCHEMA[key][0], value, lineno)
        lines[key] = lineno
    return values, lines


def parse_config(text: str) -> RunConfig:
    """Resolve a configuration text into parameters and run settings."""
    values, lines = read_raw(text)

    def get(key):
        if key in values:
            return values[key]
        default = SCHEMA[key][1]
        if default is ...:
            raise ConfigError(f"{key.split('.', 1)[1]} required", key)
        return default

    def need(key):
        v = get(key)
        if v is None:
            raise ConfigError(f"{key.split('.', 1)[1]} required", key)
        return v

    resolved = {}

    def put(key, value):
        resolved[key] = value
        return value

    schedule_kind = get("drive.schedule")
    put("drive.schedule", schedule_kind)
    try:
        if schedule_kind == "step":
            schedule = Step(put("drive.t_m", need("drive.t_m")))
            omega = put("system.omega", need("system.omega"))
            delta_omega = put("system.delta_omega", need("system.delta_omega"))
        else:
            schedule = Beat(put("drive.omega1", need("drive.omega1")),
                            put("drive.omega2", need("drive.omega2")),
                            put("drive.delta_w", need("drive.delta_w")))
            omega = put("system.omega", get("system.omega") or schedule.omega1)
            delta_omega = put("system.delta_omega",
                              values.get("system.delta_omega", schedule.omega2))
        mode = put("pump.mode", get("pump.mode"))
        if mode == "table":
            pumps = TablePumps(*(put(k, need(k)) for k in (
                "pump.w33_weak", "pump.w33_strong", "pump.w44_weak", "pump.w44_strong")))
        else:
            pumps = LineshapePumps(put("pump.profile", get("pump.profile")))
        d31, d41 = detunings_for(omega, delta_omega) if omega > delta_omega >= 0 else (0.0, 0.0)
        noises = []
        for name, det in (("noise3", d31), ("noise4", d41)):
            w = put(f"{name}.w_max", get(f"{name}.w_max"))
            bw = put(f"{name}.bandwidth", get(f"{name}.bandwidth"))
            dt = get(f"{name}.detuning")
            noises.append(NoiseFieldConfig(w, bw, put(f"{name}.detuning", det if dt is None else dt)))
        for key in ("system.gamma22", "system.gamma33", "system.coherence_source"):
            put(key, get(key))
        params = SystemParams(
            gamma22=resolved["system.gamma22"], gamma33=resolved["system.gamma33"],
            omega=omega, delta_omega=delta_omega, noise3=noises[0], noise4=noises[1],
            schedule=schedule, pumps=pumps,
            coherence_source=resolved["system.coherence_source"])
    except (ParameterError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"constraint violation: {exc}") from None

    settings_map = {
        "trajectories": "run.trajectories", "horizon_periods": "run.horizon_periods",
        "burn_in_periods": "run.burn_in_periods", "seed": "run.seed", "workers": "run.workers",
        "bisect_tol": "run.bisect_tol", "bins_per_period": "dsp.bins_per_period",
        "threshold_fraction": "dsp.threshold_fraction", "segment_length": "dsp.segment_length",
        "overlap": "dsp.overlap", "window": "dsp.window", "guard_bins": "dsp.guard_bins",
        "background_window": "dsp.background_window", "n_harmonics": "dsp.n_harmonics",
        "validation_factor": "validation.factor",
    }
    kwargs = {field: put(key, get(key)) for field, key in settings_map.items()}
    try:
        settings = RunSettings(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"constraint violation: {exc}") from None
    seg = settings.segment_length
    if seg < 2 or seg & (seg - 1):
        raise ConfigError("segment_length must be a power of two", "dsp.segment_length",
                          lines.get("dsp.segment_length"))
    if not 0 < settings.threshold_fraction < 1:
        raise ConfigError("threshold_fraction must lie in (0, 1)", "dsp.threshold_fraction",
                          lines.get("dsp.threshold_fraction"))

    sweep_values = None
    if "sweep.multipliers" in values:
        sweep_values = tuple(put("sweep.multipliers", values["sweep.multipliers"]))
    elif any(k in values for k in ("sweep.min_multiplier", "sweep.max_multiplier", "sweep.points")):
        lo = put("sweep.min_multiplier", need("sweep.min_multiplier"))
        hi = put("sweep.max_multiplier", need("sweep.max_multiplier"))
        n = put("sweep.points", need("sweep.points"))
        if not (0 < lo < hi) or n < 2:
            raise ConfigError("need 0 < min_multiplier < max_multiplier and points >= 2",
                              "sweep.points", lines.get("sweep.points"))
        sweep_values = tuple(float(v) for v in log_spaced(lo, hi, n))
    if sweep_values is not None:
        if any(b <= a for a, b in zip(sweep_values, sweep_values[1:])) or min(sweep_values) <= 0:
            raise ConfigError("sweep values must be positive and strictly increasing",
                              "sweep.multipliers", lines.get("sweep.multipliers"))

    out_dir = values.get("output.dir")
    if out_dir is not None:
        put("output.dir", out_dir)
    return RunConfig(params, settings, sweep_values, out_dir, resolved)


def log_spaced(lo, hi, n):
    a, b = math.log10(lo), math.log10(hi)
    return [10 ** (a + (b - a) * i / (n - 1)) for i in range(n)]


def serialize_config(resolved: dict) -> str:
    """Inverse of :func:`parse_config` on its resolved echo."""
    out = []
    for section in SECTION_ORDER:
        keys = [k for k in SCHEMA if k.startswith(section + ".") and k in resolved]
        for key in keys:
            out.append(f"{key} = {json.dumps(resolved[key])}")
    return "\n".join(out) + "\n"


def preset_path(name: str) -> Path:
    return Path(str(resources.files("qsr") / "presets" / name))


def load_config(path_or_name) -> RunConfig:
    """Load a config file, falling back to a shipped preset of the same name."""
    path = Path(path_or_name)
    if not path.exists():
        candidate = preset_path(path.name)
        if path.parent == Path(".") and candidate.exists():
            path = candidate
        else:
            raise FileNotFoundError(f"config file not found: {path_or_name}")
    return parse_config(path.read_text(encoding="utf-8"))
