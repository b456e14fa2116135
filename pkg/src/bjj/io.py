"""File formats and run configuration.

CSV files are UTF-8 with LF line endings, one header row (``t,phi`` or
``t,n``) and every number written with 17 significant digits, so a
write/read/write cycle is byte-identical.

A run configuration is one JSON document. Any field can be overridden from
the command line with a flag mirroring its path (``--time.n-points 500``),
and ``BJJ_SEED`` overrides ``noise.seed``. Precedence: file < environment <
flags.

Energy-like parameters accept either ``X`` (rad/s) or ``X_hz`` (Hz, times
2*pi on load); times accept ``X`` (s) or ``X_ms``. ``tau: null`` means no
damping.
"""

from __future__ import annotations

import copy
import csv
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import PendulumParams
from .errors import ConfigError
from .numeric import InitialState, TmbhParams

__all__ = [
    "write_series",
    "read_series",
    "format_series",
    "load_config",
    "apply_overrides",
    "parse_overrides",
    "RunConfig",
    "build_config",
    "tmbh_from_dict",
    "pendulum_from_dict",
    "pendulum_to_dict",
    "tmbh_to_dict",
    "dump_json",
    "MODES",
    "MODELS",
    "merge",
]

MODES = ("simulate", "fit", "convert", "synth", "validate", "compare")
MODELS = ("tmbh-numeric", "pendulum-numeric", "analytic")
TWO_PI = 2.0 * math.pi


# -- CSV -------------------------------------------------------------------------

def format_series(t, y, name) -> str:
    buf = _io.StringIO()
    buf.write(f"t,{name}\n")
    for a, b in zip(np.asarray(t, dtype=float), np.asarray(y, dtype=float)):
        buf.write(f"{a:.17g},{b:.17g}\n")
    return buf.getvalue()


def write_series(path, t, y, name):
    """Write a two-column CSV ``t,<name>``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise ValueError("t and values differ in length")
    Path(path).write_bytes(format_series(t, y, name).encode("utf-8"))


def read_series(path, name=None):
    """Read a two-column CSV; returns ``(t, values, column_name)``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or len(rows[0]) != 2 or rows[0][0] != "t":
        raise ConfigError(f"{path}: expected a 't,<name>' header")
    col = rows[0][1]
    if name is not None and col != name:
        raise ConfigError(f"{path}: expected column {name!r}, found {col!r}")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    data = data.reshape(-1, 2)
    return data[:, 0], data[:, 1], col


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dump_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_bytes(text.encode("utf-8"))


# -- configuration ---------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def parse_overrides(args) -> list:
    """``['--a.b-c', '3', '--x=y']`` -> ``[(['a', 'b_c'], 3), (['x'], 'y')]``.

    Values are parsed as JSON when possible, else kept as strings.
    """
    out = []
    args = list(args)
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--") or len(arg) == 2:
            raise ConfigError(f"unexpected argument {arg!r}")
        key = arg[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
        else:
            if i + 1 >= len(args):
                raise ConfigError(f"flag {arg} needs a value")
            raw = args[i + 1]
            i += 1
        i += 1
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        path = [part.replace("-", "_") for part in key.split(".")]
        if any(not p for p in path):
            raise ConfigError(f"malformed flag {arg!r}")
        out.append((path, value))
    return out


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for path, value in overrides:
        node = cfg
        for part in path[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"cannot override {'.'.join(path)}: {part} is not an object")
            node = nxt
        key = path[-1]
        base = key[:-3] if key.endswith(("_ms", "_hz")) else key
        for variant in (base, base + "_ms", base + "_hz"):
            node.pop(variant, None)  # a flag replaces any unit variant of its key
        node[key] = value
    return cfg


def _energy(d, name, default=None):
    """Angular frequency from ``name`` (rad/s) or ``name_hz`` (Hz)."""
    if f"{name}_hz" in d and name in d:
        raise ConfigError(f"give either {name} or {name}_hz, not both")
    if f"{name}_hz" in d:
        return TWO_PI * float(d[f"{name}_hz"])
    if name in d:
        return float(d[name])
    if default is None:
        raise ConfigError(f"missing parameter {name}")
    return default


def _time(d, name, default):
    """Seconds from ``name`` (s) or ``name_ms`` (ms); ``null`` means infinity."""
    if f"{name}_ms" in d and name in d:
        raise ConfigError(f"give either {name} or {name}_ms, not both")
    if f"{name}_ms" in d:
        v = d[f"{name}_ms"]
        return math.inf if v is None else 1e-3 * float(v)
    if name in d:
        v = d[name]
        return math.inf if v is None else float(v)
    return default


def tmbh_from_dict(d: dict) -> TmbhParams:
    try:
        J = _energy(d, "J")
        N = float(d["N"])
        eps = _energy(d, "epsilon", 0.0)
        eta = float(d.get("eta", 0.0))
        if "Lambda" in d:
            if "U" in d or "U_hz" in d:
                raise ConfigError("give either U or Lambda, not both")
            return TmbhParams.from_lambda(J, float(d["Lambda"]), N, epsilon=eps, eta=eta)
        return TmbhParams(J=J, U=_energy(d, "U"), N=N, epsilon=eps, eta=eta)
    except KeyError as exc:
        raise ConfigError(f"missing TMBH parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad TMBH parameters: {exc}") from exc


def pendulum_from_dict(d: dict) -> PendulumParams:
    try:
        tau2 = _time(d, "tau2", None)
        return PendulumParams(
            k0=float(d["k0"]),
            omega0=float(d["omega0"]),
            N0=float(d["N0"]),
            tau=_time(d, "tau", math.inf),
            tau2=None if tau2 is None or math.isinf(tau2) else tau2,
            delta_phi=float(d.get("delta_phi", 0.0)),
            delta_n=float(d.get("delta_n", 0.0)),
            sigma0=int(d.get("sigma0", 1)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing pendulum parameter {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad pendulum parameters: {exc}") from exc


def pendulum_to_dict(P: PendulumParams) -> dict:
    """Report units: omega0 in rad/s, tau in ms."""
    return {
        "k0": P.k0,
        "omega0": P.omega0,
        "N0": P.N0,
        "tau_ms": None if math.isinf(P.tau) else 1e3 * P.tau,
        "tau2_ms": None if P.tau2 is None else 1e3 * P.tau2,
        "delta_phi": P.delta_phi,
        "delta_n": P.delta_n,
        "sigma0": P.sigma0,
    }


def tmbh_to_dict(p: TmbhParams) -> dict:
    """Report units: J, U, epsilon in Hz."""
    return {
        "J_hz": p.J / TWO_PI,
        "U_hz": p.U / TWO_PI,
        "epsilon_hz": p.epsilon / TWO_PI,
        "Lambda": p.Lambda,
        "N": p.N,
        "eta": p.eta,
    }


@dataclass
class RunConfig:
    mode: str
    model: str = "analytic"
    tmbh: TmbhParams | None = None
    pendulum: PendulumParams | None = None
    initial: list = field(default_factory=list)
    t_end: float = 0.0
    n_points: int = 0
    sigma_phi: float = 0.0
    sigma_n: float = 0.0
    seed: int = 0
    output: Path = Path(".")
    phase_path: Path | None = None
    imbalance_path: Path | None = None
    N_atoms: float | None = None
    N_sigma: float = 0.0
    raw: dict = field(default_factory=dict)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_points)


def _initial_states(raw) -> list:
    if raw is None:
        return []
    items = raw if isinstance(raw, list) else [raw]
    states = []
    for item in items:
        if not isinstance(item, dict) or "n0" not in item or "phi0" not in item:
            raise ConfigError("initial states need n0 and phi0")
        try:
            states.append(InitialState(float(item["n0"]), float(item["phi0"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad initial state: {exc}") from exc
    return states


def build_config(mode: str, raw: dict) -> RunConfig:
    """Validate a merged configuration dict (see :func:`merge`) for ``mode``."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if raw.get("mode", mode) != mode:
        raise ConfigError(f"config is for mode {raw['mode']!r}, not {mode!r}")
    model = raw.get("model", "analytic")
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    tmbh = tmbh_from_dict(params["tmbh"]) if "tmbh" in params else None
    pend = pendulum_from_dict(params["pendulum"]) if "pendulum" in params else None
    if model == "tmbh-numeric" and mode == "simulate" and tmbh is None:
        raise ConfigError("model tmbh-numeric needs a params.tmbh block")

    time_cfg = raw.get("time", {})
    t_end = _time(time_cfg, "t_end", 0.0)
    n_points = time_cfg.get("n_points", 0)
    if mode in ("simulate", "synth", "compare"):
        if not (isinstance(n_points, int) and n_points >= 2):
            raise ConfigError("time.n_points must be an integer >= 2")
        if not (t_end > 0 and math.isfinite(t_end)):
            raise ConfigError("time.t_end must be > 0")

    noise = raw.get("noise", {})
    try:
        sigma_phi = float(noise.get("sigma_phi", 0.0))
        sigma_n = float(noise.get("sigma_n", 0.0))
        seed = int(noise.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad noise block: {exc}") from exc
    if sigma_phi < 0 or sigma_n < 0:
        raise ConfigError("noise levels must be >= 0")
    if not 0 <= seed < 2**64:
        raise ConfigError("noise.seed must be a 64-bit unsigned integer")

    paths = raw.get("paths", {})
    output = Path(paths.get("output", "."))
    fit_cfg = raw.get("fit", {})
    return RunConfig(
        mode=mode,
        model=model,
        tmbh=tmbh,
        pendulum=pend,
        initial=_initial_states(raw.get("initial")),
        t_end=t_end,
        n_points=int(n_points) if isinstance(n_points, int) else 0,
        sigma_phi=sigma_phi,
        sigma_n=sigma_n,
        seed=seed,
        output=output,
        phase_path=Path(paths["phase"]) if "phase" in paths else None,
        imbalance_path=Path(paths["imbalance"]) if "imbalance" in paths else None,
        N_atoms=fit_cfg.get("N_atoms"),
        N_sigma=float(fit_cfg.get("N_sigma", 0.0)),
        raw=raw,
    )


def merge(file_cfg: dict, flags, env=None) -> dict:
    """File config, then ``BJJ_SEED``, then command-line flags."""
    env = os.environ if env is None else env
    cfg = copy.deepcopy(file_cfg)
    if env.get("BJJ_SEED") not in (None, ""):
        try:
            seed = int(env["BJJ_SEED"], 0)
        except ValueError as exc:
            raise ConfigError(f"BJJ_SEED is not an integer: {env['BJJ_SEED']!r}") from exc
        cfg.setdefault("noise", {})["seed"] = seed
    return apply_overrides(cfg, parse_overrides(flags))


