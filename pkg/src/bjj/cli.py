"""Command-line front end: ``bjj simulate|synth|fit|convert|validate|compare``.

Every command takes ``--config FILE`` plus optional overrides such as
``--time.n-points 500``. Exit codes: 0 success, 2 configuration or parse
error, 3 numerical failure, 4 degenerate parameter conversion.
"""

from __future__ import annotations

import math
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from .analytic import (
    PendulumParams,
    classify_regime,
    evaluate_piecewise,
    phase_velocity,
    plasma_frequency,
    rigidity_check,
    separatrix_crossing_time,
)
from .errors import ConfigError, DegeneracyError, DomainError, IntegrationError, SingularityError
from .estimation import DataSet, FitOptions, fit, fit_multistart
from .io import (
    RunConfig,
    build_config,
    dump_json,
    load_config,
    merge,
    pendulum_from_dict,
    pendulum_to_dict,
    read_series,
    tmbh_to_dict,
    write_series,
)
from .numeric import alpha_invariant, integrate_pendulum, integrate_tmbh
from .parammap import initial_state_of, to_pendulum, to_tmbh

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 2, 3, 4
TWO_PI = 2.0 * math.pi


# -- model evaluation ------------------------------------------------------------

def analytic_series(P: PendulumParams, t):
    """Heuristic model on ``t``; the equilibrium ``k0 = 0`` is constant."""
    t = np.asarray(t, dtype=float)
    if P.k0 == 0:
        return np.zeros_like(t), np.full_like(t, P.delta_n)
    phi, n = evaluate_piecewise(t, P)
    return np.asarray(phi, dtype=float), np.asarray(n, dtype=float)


def _pendulum_for(cfg: RunConfig, state=None) -> PendulumParams:
    if cfg.pendulum is not None:
        return cfg.pendulum
    if cfg.tmbh is None:
        raise ConfigError("need a params.pendulum or params.tmbh block")
    if state is None:
        raise ConfigError("params.tmbh needs an initial state")
    return to_pendulum(cfg.tmbh, state)


def _states(cfg: RunConfig):
    """Initial states to run; a pendulum-only config yields ``[None]``."""
    if cfg.initial:
        return cfg.initial
    if cfg.tmbh is not None and cfg.pendulum is None:
        raise ConfigError("params.tmbh needs at least one initial state")
    return [None]


def numeric_series(cfg: RunConfig, model, state, grid):
    """Numerical trajectory for one initial state; returns ``(phi, n)``."""
    if model == "tmbh-numeric":
        if cfg.tmbh is None or state is None:
            raise ConfigError("tmbh-numeric needs params.tmbh and an initial state")
        tr = integrate_tmbh(cfg.tmbh, state, grid)
        return tr.phi, tr.n
    if cfg.tmbh is not None and state is not None and cfg.pendulum is None:
        p = cfg.tmbh
        lam_sum = p.Lambda + state.lam
        omega0 = plasma_frequency(p.J, p.Lambda, state.phi0)
        tau = math.inf if p.eta == 0 else p.N / (p.J * p.eta * lam_sum)
        dphi0 = p.epsilon + 2.0 * p.J * lam_sum * state.n0
        tr = integrate_pendulum(omega0, tau, (state.phi0, dphi0), grid, context=p)
        return tr.phi, tr.n
    P = _pendulum_for(cfg, state)
    if P.k0 == 0:
        return np.zeros_like(grid), np.full_like(grid, P.delta_n)
    s0 = initial_state_of(P)
    tr = integrate_pendulum(P.omega0, P.tau, (s0.phi0, float(phase_velocity(0.0, P))), grid)
    n = P.N0 / (2.0 * P.omega * P.k0) * tr.dphi + P.delta_n
    return tr.phi, n


def _series_names(count, i):
    return ("phase.csv", "imbalance.csv") if count == 1 else (f"phase_{i}.csv", f"imbalance_{i}.csv")


# -- commands as plain functions (used by the click layer and by tests) ----------

def run_simulate(cfg: RunConfig) -> dict:
    grid = cfg.grid
    states = _states(cfg)
    summary = {"model": cfg.model, "states": []}
    for i, state in enumerate(states):
        if cfg.model == "analytic":
            P = _pendulum_for(cfg, state)
            phi, n = analytic_series(P, grid)
        else:
            phi, n = numeric_series(cfg, cfg.model, state, grid)
        f_phi, f_n = _series_names(len(states), i)
        write_series(cfg.output / f_phi, grid, phi, "phi")
        write_series(cfg.output / f_n, grid, n, "n")
        entry = {"phase_file": f_phi, "imbalance_file": f_n}
        if state is not None:
            entry["initial"] = {"n0": state.n0, "phi0": state.phi0}
            if cfg.tmbh is not None:
                entry["alpha"] = alpha_invariant((state.n0, state.phi0), cfg.tmbh.Lambda)
        summary["states"].append(entry)
    dump_json(cfg.output / "simulate.json", summary)
    return summary


def run_compare(cfg: RunConfig) -> dict:
    grid = cfg.grid
    states = _states(cfg)
    if len(states) != 1:
        raise ConfigError("compare needs exactly one initial state")
    state = states[0]
    numeric_model = "pendulum-numeric" if cfg.model == "analytic" else cfg.model
    P = _pendulum_for(cfg, state)
    phi_a, n_a = analytic_series(P, grid)
    phi_n, n_n = numeric_series(cfg, numeric_model, state, grid)
    lines = ["t,phi_analytic,phi_numeric,n_analytic,n_numeric"]
    for row in zip(grid, phi_a, phi_n, n_a, n_n):
        lines.append(",".join(f"{v:.17g}" for v in row))
    (cfg.output / "compare.csv").write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    summary = {
        "numeric_model": numeric_model,
        "max_abs_dphi": float(np.max(np.abs(phi_a - phi_n))),
        "max_abs_dn": float(np.max(np.abs(n_a - n_n))),
    }
    dump_json(cfg.output / "compare.json", summary)
    return summary


def run_synth(cfg: RunConfig) -> dict:
    """Analytic model plus Gaussian noise.

    The generator is PCG64 (128-bit state) seeded through numpy's
    SeedSequence; phase noise is drawn first, then imbalance noise.
    """
    states = _states(cfg)
    if len(states) != 1:
        raise ConfigError("synth needs exactly one parameter set")
    P = _pendulum_for(cfg, states[0])
    grid = cfg.grid
    phi, n = analytic_series(P, grid)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    phi = phi + cfg.sigma_phi * rng.standard_normal(grid.size)
    n = n + cfg.sigma_n * rng.standard_normal(grid.size)
    write_series(cfg.output / "phase.csv", grid, phi, "phi")
    write_series(cfg.output / "imbalance.csv", grid, n, "n")
    return {"seed": cfg.seed, "points": int(grid.size)}


def _sigma_block(report, name, scale=1.0):
    return {"value": scale * getattr(report.params, name), "sigma": scale * report.param_sigmas[name]}


def fit_report_dict(report) -> dict:
    """JSON form of a fit report: omega0 in rad/s, tau in ms, J and epsilon in Hz."""
    pend = {
        "k0": _sigma_block(report, "k0"),
        "omega0": _sigma_block(report, "omega0"),
        "N0": _sigma_block(report, "N0"),
        "tau_ms": _sigma_block(report, "tau", 1e3),
        "delta_phi": _sigma_block(report, "delta_phi"),
        "delta_n": _sigma_block(report, "delta_n"),
        "sigma0": report.params.sigma0,
    }
    if "tau2" in report.labels:
        pend["tau2_ms"] = {"value": 1e3 * report.params.t2, "sigma": 1e3 * report.param_sigmas["tau2"]}
    d = report.derived
    derived = {
        "Lambda": {"value": d["Lambda"][0], "sigma": d["Lambda"][1]},
        "J_hz": {"value": d["J"][0] / TWO_PI, "sigma": d["J"][1] / TWO_PI},
        "epsilon_hz": {"value": d["epsilon"][0] / TWO_PI, "sigma": d["epsilon"][1] / TWO_PI},
        "eta": {"value": d["eta"][0], "sigma": d["eta"][1]},
        "N": {"value": d["N"][0], "sigma": d["N"][1]},
    }
    return {
        "pendulum": pend,
        "tmbh": derived,
        "labels": list(report.labels),
        "correlation": report.correlation,
        "covariance": report.covariance,
        "mse": report.mse,
        "weights": report.weights,
        "diagnostics": report.diagnostics,
    }


def run_fit(cfg: RunConfig) -> dict:
    if cfg.pendulum is None:
        raise ConfigError("fit needs a params.pendulum block as the starting guess")
    if cfg.N_atoms is None:
        raise ConfigError("fit needs fit.N_atoms")
    phase_path = cfg.phase_path or cfg.output / "phase.csv"
    imb_path = cfg.imbalance_path or cfg.output / "imbalance.csv"
    tp, yp, _ = read_series(phase_path, "phi")
    tn, yn, _ = read_series(imb_path, "n")
    fit_cfg = cfg.raw.get("fit", {})
    try:
        data = DataSet(tp, yp, tn, yn, weights=fit_cfg.get("weights"),
                       N_atoms=float(cfg.N_atoms), N_sigma=cfg.N_sigma)
    except ValueError as exc:
        raise ConfigError(f"bad data: {exc}") from exc
    opts = FitOptions(fit_tau2=bool(fit_cfg.get("fit_tau2", False)))
    starts = fit_cfg.get("starts", [])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if starts:
            base = pendulum_to_dict(cfg.pendulum)
            base = {k: v for k, v in base.items() if v is not None}
            guesses = [cfg.pendulum] + [pendulum_from_dict({**base, **s}) for s in starts]
            report = fit_multistart(data, guesses, opts)
        else:
            report = fit(data, cfg.pendulum, opts)
    out = fit_report_dict(report)
    dump_json(cfg.output / "report.json", out)
    return out


def run_convert(cfg: RunConfig) -> dict:
    if (cfg.pendulum is None) == (cfg.tmbh is None):
        raise ConfigError("convert needs exactly one of params.pendulum, params.tmbh")
    if len(cfg.initial) > 1:
        raise ConfigError("convert takes at most one initial state")
    s0 = cfg.initial[0] if cfg.initial else None
    if cfg.pendulum is not None:
        N = cfg.raw["params"]["pendulum"].get("N")
        if N is None:
            raise ConfigError("converting to TMBH needs params.pendulum.N (atom number)")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            p, method = to_tmbh(cfg.pendulum, float(N), s0)
        out = {"method": method, "tmbh": tmbh_to_dict(p),
               "warnings": [str(w.message) for w in caught]}
    else:
        if s0 is None:
            raise ConfigError("converting to pendulum parameters needs an initial state")
        P = to_pendulum(cfg.tmbh, s0)
        out = {"method": "tmbh-to-pendulum", "pendulum": pendulum_to_dict(P)}
    dump_json(cfg.output / "convert.json", out)
    return out


def run_validate(cfg: RunConfig) -> dict:
    states = _states(cfg)
    if len(states) != 1:
        raise ConfigError("validate needs exactly one parameter set")
    P = _pendulum_for(cfg, states[0])
    regime = classify_regime(P.k0)
    delta, ok = rigidity_check(P, regime)
    out = {"regime": regime.value, "k": P.k0, "delta": delta, "ok": bool(ok),
           "separatrix_crossing_ms": None}
    if P.k0 > 1 and P.damped:
        out["separatrix_crossing_ms"] = 1e3 * separatrix_crossing_time(P.k0, P.tau)
    dump_json(cfg.output / "validate.json", out)
    return out


RUNNERS = {
    "simulate": run_simulate,
    "compare": run_compare,
    "synth": run_synth,
    "fit": run_fit,
    "convert": run_convert,
    "validate": run_validate,
}


# -- click layer -----------------------------------------------------------------

def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, DegeneracyError):
        return EXIT_DEGENERATE
    if isinstance(exc, (SingularityError, IntegrationError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, DomainError, ValueError, KeyError, TypeError, OSError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def execute(mode, config_path, flags, env=None) -> int:
    """Load, merge and run one command; returns the exit code."""
    try:
        raw = load_config(config_path) if config_path else {}
        cfg = build_config(mode, merge(raw, flags, env))
        cfg.output.mkdir(parents=True, exist_ok=True)
        RUNNERS[mode](cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to the exit-code contract
        code = exit_code_for(exc)
        click.echo(f"bjj {mode}: error: {exc}", err=True)
        return code
    return EXIT_OK


_CTX = {"ignore_unknown_options": True, "allow_extra_args": True}


def _command(mode, help_text):
    @click.command(name=mode, help=help_text, context_settings=_CTX)
    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="JSON run configuration.")
    @click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
    def cmd(config_path, overrides):
        sys.exit(execute(mode, config_path, overrides))

    return cmd


@click.group(help=__doc__)
def main():
    pass


for _mode, _help in [
    ("simulate", "Integrate or evaluate a model; write phase/imbalance CSVs."),
    ("compare", "Analytic vs numeric trajectories side by side."),
    ("synth", "Noisy synthetic data from the analytic model."),
    ("fit", "Fit the damped heuristic model to phase/imbalance CSVs."),
    ("convert", "Convert between pendulum and TMBH parameters."),
    ("validate", "Regime and rigid-pendulum validity check."),
]:
    main.add_command(_command(_mode, _help))


if __name__ == "__main__":  # pragma: no cover
    main()
