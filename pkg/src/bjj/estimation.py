"""Least-squares fits of phase and imbalance time series.

The heuristic damped model is fitted in its six observable parameters
(k0, omega0, N0, tau, delta_phi, delta_n) with a plain Levenberg-Marquardt
loop. Uncertainties follow the usual recipe: ``MSE = R / (N_data - nu)``,
``C = (J^T J)^-1 MSE``, correlations ``C_ij / sqrt(C_ii C_jj)`` and linear
error propagation ``sigma_f^2 = g^T C g`` for derived quantities.

A direct fit of the damped mean-field equations is also provided; it exists
to compare parameter correlations between the two descriptions.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import (
    PendulumParams,
    Regime,
    classify_regime,
    n_damped,
    phi_piecewise,
    rigidity_check,
)
from .errors import BJJError, DomainError
from .numeric import InitialState, TmbhParams, integrate_tmbh

__all__ = [
    "DataSet",
    "FitOptions",
    "FitReport",
    "DirectFitReport",
    "RankDeficientWarning",
    "FIT_PARAMS",
    "TMBH_FIT_PARAMS",
    "residuals",
    "default_weights",
    "levenberg_marquardt",
    "fit",
    "fit_multistart",
    "fit_tmbh_direct",
    "covariance",
    "correlation",
    "propagate_error",
    "derived_tmbh",
]

FIT_PARAMS = ("k0", "omega0", "N0", "tau", "delta_phi", "delta_n")
TMBH_FIT_PARAMS = ("J", "eta", "Lambda", "epsilon", "n0", "phi0")


class RankDeficientWarning(UserWarning):
    """J^T J is singular; a pseudo-inverse was used for the covariance."""


@dataclass
class DataSet:
    """Phase and imbalance samples, possibly on different time grids.

    ``weights`` maps ``"phase"``/``"imbalance"`` to the scale each series'
    residuals are divided by; missing entries default to the noise level
    estimated from the series tail (see :func:`default_weights`).
    """

    phase_t: np.ndarray
    phase: np.ndarray
    imbalance_t: np.ndarray
    imbalance: np.ndarray
    weights: dict | None = None
    N_atoms: float = 1000.0
    N_sigma: float = 0.0

    def __post_init__(self):
        for name in ("phase_t", "phase", "imbalance_t", "imbalance"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if self.phase_t.shape != self.phase.shape:
            raise ValueError("phase times and values differ in length")
        if self.imbalance_t.shape != self.imbalance.shape:
            raise ValueError("imbalance times and values differ in length")
        if self.phase.size + self.imbalance.size == 0:
            raise ValueError("at least one series must be non-empty")
        if not (np.all(np.isfinite(self.phase_t)) and np.all(np.isfinite(self.imbalance_t))):
            raise ValueError("sample times must be finite")
        if np.any(np.abs(self.imbalance) >= 1):
            raise ValueError("imbalance samples must satisfy |n| < 1")

    @property
    def n_data(self) -> int:
        return self.phase.size + self.imbalance.size


def _tail_noise(t, y, frac=0.25):
    """Scatter of the last ``frac`` of a series around a straight line."""
    if y.size < 4:
        return 1.0
    order = np.argsort(t, kind="stable")
    count = max(4, int(math.ceil(frac * y.size)))
    tt, yy = t[order][-count:], y[order][-count:]
    if np.ptp(tt) == 0:
        resid = yy - yy.mean()
        dof = count - 1
    else:
        coef = np.polyfit(tt - tt.mean(), yy, 1)
        resid = yy - np.polyval(coef, tt - tt.mean())
        dof = count - 2
    s = math.sqrt(float(resid @ resid) / dof)
    return s if s > 0 else 1.0


def default_weights(d: DataSet) -> dict:
    """Per-series residual scale: explicit weights, else detrended-tail noise."""
    given = d.weights or {}
    return {
        "phase": float(given.get("phase", _tail_noise(d.phase_t, d.phase))),
        "imbalance": float(given.get("imbalance", _tail_noise(d.imbalance_t, d.imbalance))),
    }


def residuals(P: PendulumParams, d: DataSet, weights: dict | None = None) -> np.ndarray:
    """Weighted residuals ``(model - data) / w``, phase block first.

    If the model cannot be evaluated the affected block is ``+inf``.
    """
    w = default_weights(d) if weights is None else weights
    blocks = []
    if d.phase.size:
        try:
            model = np.asarray(phi_piecewise(d.phase_t, P), dtype=float)
        except (BJJError, FloatingPointError):
            model = np.full(d.phase.shape, np.inf)
        blocks.append((model - d.phase) / w["phase"])
    if d.imbalance.size:
        try:
            model = np.asarray(n_damped(d.imbalance_t, P), dtype=float)
        except (BJJError, FloatingPointError):
            model = np.full(d.imbalance.shape, np.inf)
        blocks.append((model - d.imbalance) / w["imbalance"])
    r = np.concatenate(blocks)
    r[~np.isfinite(r)] = np.inf
    return r


# -- generic Levenberg-Marquardt ------------------------------------------------

@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 500
    ftol: float = 1e-10  # stop when the relative cost decrease falls below this
    xtol: float = 1e-10  # or when an accepted step is this small relative to x
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e16
    fd_step: float = 1e-6
    fit_tau2: bool = False


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    jac: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool


def _fd_jacobian(fun, x, r0, step):
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = step * (abs(x[i]) if x[i] != 0 else 1.0)
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fun(xp) - r0) / h
    return jac


def levenberg_marquardt(fun, x0, opts: FitOptions = FitOptions()) -> LMResult:
    """Minimise ``|fun(x)|^2``.

    Marquardt damping ``(J^T J + lam diag(J^T J)) dx = -J^T r`` with a
    forward-difference Jacobian. ``lam`` starts at ``opts.lambda0``, is
    multiplied by ``lambda_up`` after a rejected step and divided by
    ``lambda_down`` after an accepted one. Converged when an accepted step
    lowers the cost by less than ``ftol`` relative or moves ``x`` by less
    than ``xtol`` relative, when the cost is zero,
    or when no step can lower it any more (``lam > lambda_max``).
    Non-convergence within ``max_iter`` is reported, not raised.
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    cost = float(r @ r)
    if not math.isfinite(cost):
        return LMResult(x, cost, np.full((r.size, x.size), np.nan), r, 0, False)
    lam = opts.lambda0
    converged = False
    it = 0
    jac = None
    while it < opts.max_iter:
        it += 1
        if cost == 0.0:
            converged = True
            break
        jac = _fd_jacobian(fun, x, r, opts.fd_step)
        if not np.all(np.isfinite(jac)):
            jac = np.nan_to_num(jac, nan=0.0, posinf=0.0, neginf=0.0)
        A = jac.T @ jac
        g = jac.T @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam <= opts.lambda_max:
            dx = np.linalg.lstsq(A + lam * np.diag(diag), -g, rcond=None)[0]
            x_new = x + dx
            r_new = fun(x_new)
            cost_new = float(r_new @ r_new)
            if math.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= opts.lambda_up
        if not accepted:
            converged = True  # stalled at a minimum
            break
        rel = (cost - cost_new) / cost
        small_step = np.linalg.norm(dx) <= opts.xtol * (np.linalg.norm(x) + opts.xtol)
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / opts.lambda_down, 1e-15)
        if rel < opts.ftol or small_step:
            converged = True
            break
    jac = _fd_jacobian(fun, x, r, opts.fd_step)
    return LMResult(x, cost, jac, r, it, converged)


# -- covariance, correlation, propagation --------------------------------------

def _rank_deficient(A) -> bool:
    if not np.all(np.isfinite(A)):
        return True
    s = np.linalg.svd(A, compute_uv=False)
    return s.size == 0 or s[-1] <= s[0] * A.shape[0] * np.finfo(float).eps


def covariance(jacobian, R, n_data, nu):
    """``C = (J^T J)^-1 * R / (n_data - nu)``.

    A singular ``J^T J`` falls back to the pseudo-inverse and emits a
    :class:`RankDeficientWarning`.
    """
    if not n_data > nu:
        raise DomainError("need more data points than fit parameters")
    jacobian = np.asarray(jacobian, dtype=float)
    mse = R / (n_data - nu)
    A = jacobian.T @ jacobian
    if _rank_deficient(A):
        warnings.warn("J^T J is singular; using the pseudo-inverse", RankDeficientWarning,
                      stacklevel=2)
        inv = np.linalg.pinv(A)
    else:
        inv = np.linalg.inv(A)
    C = inv * mse
    return 0.5 * (C + C.T)


def correlation(C):
    """``C_ij / sqrt(C_ii C_jj)`` with an exact unit diagonal."""
    C = np.asarray(C, dtype=float)
    d = np.diag(C)
    if np.any(d <= 0):
        raise DomainError("covariance diagonal must be > 0")
    s = np.sqrt(d)
    out = C / np.outer(s, s)
    out = np.clip(0.5 * (out + out.T), -1.0, 1.0)
    np.fill_diagonal(out, 1.0)
    return out


def propagate_error(grad, C):
    """First-order uncertainty ``sqrt(g^T C g)`` of a derived quantity."""
    g = np.asarray(grad, dtype=float)
    C = np.asarray(C, dtype=float)
    q = float(g @ C @ g)
    scale = float(np.abs(g) @ np.abs(C) @ np.abs(g))
    if q < -1e-12 * scale:
        raise DomainError("negative variance: covariance is not positive semidefinite")
    return math.sqrt(max(q, 0.0))


# -- heuristic-model fit ---------------------------------------------------------

_LOG, _LOGIT, _LIN = 0, 1, 2


def _transforms(names):
    kinds = {"k0": _LOG, "omega0": _LOG, "N0": _LOGIT, "tau": _LOG, "tau2": _LOG,
             "delta_phi": _LIN, "delta_n": _LIN}
    return [kinds[n] for n in names]


def _to_internal(values, kinds):
    out = []
    for v, k in zip(values, kinds):
        if k == _LOG:
            out.append(math.log(v))
        elif k == _LOGIT:
            v = min(max(v, 1e-12), 1.0 - 1e-12)
            out.append(math.log(v / (1.0 - v)))
        else:
            out.append(v)
    return np.array(out)


def _to_natural(x, kinds):
    out = np.empty_like(x)
    for i, k in enumerate(kinds):
        if k == _LOG:
            out[i] = math.exp(x[i])
        elif k == _LOGIT:
            out[i] = 1.0 / (1.0 + math.exp(-x[i]))
        else:
            out[i] = x[i]
    return out


def _chain(nat, kinds):
    """d natural / d internal, per parameter."""
    d = np.ones_like(nat)
    for i, k in enumerate(kinds):
        if k == _LOG:
            d[i] = nat[i]
        elif k == _LOGIT:
            d[i] = nat[i] * (1.0 - nat[i])
    return d


def _build(values, names, guess):
    kw = dict(zip(names, (float(v) for v in values)))
    try:
        return guess.replace(**kw)
    except DomainError:
        return None


@dataclass
class FitReport:
    params: PendulumParams
    param_sigmas: dict
    covariance: np.ndarray
    correlation: np.ndarray
    mse: float
    derived: dict
    diagnostics: dict
    labels: tuple = FIT_PARAMS
    weights: dict = field(default_factory=dict)

    @property
    def tmbh(self) -> TmbhParams:
        d = self.derived
        return TmbhParams.from_lambda(d["J"][0], d["Lambda"][0], d["N"][0],
                                      epsilon=d["epsilon"][0], eta=d["eta"][0])


def _derived_values(x, sigma0, N):
    """J, Lambda, epsilon, eta from (k0, omega0, N0, tau, delta_phi, delta_n)."""
    k0, w0, N0, tau, dphi, dn = x[:6]
    P = PendulumParams(k0=k0, omega0=w0, N0=N0, tau=tau, delta_phi=dphi, delta_n=dn,
                       sigma0=sigma0)
    lam = math.cos(float(phi_piecewise(0.0, P)))
    return {
        "J": w0 * N0 / (4.0 * k0),
        "Lambda": 4.0 * k0 * k0 / (N0 * N0) - lam,
        "epsilon": -2.0 * w0 * k0 / N0 * dn,
        "eta": N * N0 / (k0 * tau * w0),
    }


def derived_tmbh(P: PendulumParams, C, N, N_sigma=0.0) -> dict:
    """TMBH parameters of ``P`` (simplified map) with propagated errors.

    ``C`` is the 6x6 covariance over ``FIT_PARAMS``. The atom-number
    uncertainty enters eta only. Returns ``name -> (value, sigma)``.
    """
    x = np.array([getattr(P, n) for n in FIT_PARAMS], dtype=float)
    base = _derived_values(x, P.sigma0, N)
    grads = {k: np.zeros(6) for k in base}
    for i in range(6):
        h = 1e-6 * (abs(x[i]) if x[i] != 0 else 1.0)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fp = _derived_values(xp, P.sigma0, N)
        fm = _derived_values(xm, P.sigma0, N)
        for k in base:
            grads[k][i] = (fp[k] - fm[k]) / (2.0 * h)
    out = {}
    for k, v in base.items():
        try:
            var = propagate_error(grads[k], C) ** 2
        except DomainError:
            var = math.nan
        if k == "eta":
            var += (v / N * N_sigma) ** 2
        out[k] = (float(v), math.sqrt(var))
    out["N"] = (float(N), float(N_sigma))
    return out


def fit(d: DataSet, guess: PendulumParams, opts: FitOptions = FitOptions()) -> FitReport:
    """Fit the heuristic damped model to ``d`` starting from ``guess``.

    ``sigma0`` (and ``tau2`` unless ``opts.fit_tau2``) stay fixed at the guess.
    Positive parameters are fitted on a log scale and N0 on a logit scale;
    the reported covariance is mapped back to natural units.
    """
    names = FIT_PARAMS + (("tau2",) if opts.fit_tau2 else ())
    nu = len(names)
    if d.n_data < nu + 1 or d.n_data < 7:
        raise DomainError("not enough data points for the fit")
    if opts.fit_tau2 and guess.tau2 is None:
        guess = guess.replace(tau2=guess.tau)
    weights = default_weights(d)
    kinds = _transforms(names)
    bad = np.full(d.n_data, np.inf)

    def fun(x):
        P = _build(_to_natural(x, kinds), names, guess)
        return bad if P is None else residuals(P, d, weights)

    x0 = _to_internal([getattr(guess, n) if n != "tau2" else guess.t2 for n in names], kinds)
    res = levenberg_marquardt(fun, x0, opts)
    nat = _to_natural(res.x, kinds)
    P = _build(nat, names, guess)
    if P is None:  # pragma: no cover - LM never accepts an invalid point
        raise DomainError("fit ended on invalid parameters")
    jac_nat = res.jac / _chain(nat, kinds)[None, :]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficientWarning)
        C = covariance(jac_nat, res.cost, d.n_data, nu)
    singular = any(issubclass(w.category, RankDeficientWarning) for w in caught)
    if singular:
        warnings.warn("fit covariance from a singular J^T J", RankDeficientWarning, stacklevel=2)
    var = np.diag(C)
    # a parameter pinned at a bound has no defined spread; report NaN for it
    defined = var > 0
    sig = np.where(defined, np.sqrt(np.where(defined, var, 1.0)), np.nan)
    corr = np.full_like(C, np.nan)
    if np.any(defined):
        idx = np.flatnonzero(defined)
        corr[np.ix_(idx, idx)] = correlation(C[np.ix_(idx, idx)])
    derived = derived_tmbh(P, C[:6, :6], d.N_atoms, d.N_sigma)
    regime = classify_regime(P.k0)
    try:
        delta, ok = rigidity_check(P, regime)
    except DomainError:
        delta, ok = math.nan, False
    diagnostics = {
        "iterations": res.iterations,
        "converged": bool(res.converged),
        "singular": singular,
        "cost": res.cost,
        "n_data": d.n_data,
        "regime": regime.value,
        "rigidity_delta": delta,
        "rigidity_ok": bool(ok),
    }
    return FitReport(
        params=P,
        param_sigmas=dict(zip(names, (float(s) for s in sig))),
        covariance=C,
        correlation=corr,
        mse=res.cost / (d.n_data - nu),
        derived=derived,
        diagnostics=diagnostics,
        labels=names,
        weights=weights,
    )


def fit_multistart(d: DataSet, guesses, opts: FitOptions = FitOptions(), max_workers=None) -> FitReport:
    """Run :func:`fit` from several guesses concurrently; keep the lowest MSE.

    Ties are broken by the fitted parameter values in ``FIT_PARAMS`` order, so
    the result does not depend on scheduling.
    """
    guesses = list(guesses)
    if not guesses:
        raise ValueError("no starting guesses")
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        reports = list(pool.map(lambda g: fit(d, g, opts), guesses))

    def key(rep):
        mse = rep.mse if math.isfinite(rep.mse) else math.inf
        return (mse,) + tuple(getattr(rep.params, n) for n in FIT_PARAMS)

    return min(reports, key=key)


# -- direct mean-field fit -------------------------------------------------------

@dataclass
class DirectFitReport:
    params: dict
    param_sigmas: dict
    covariance: np.ndarray
    correlation: np.ndarray
    mse: float
    iterations: int
    converged: bool
    labels: tuple = TMBH_FIT_PARAMS


def fit_tmbh_direct(d: DataSet, guess: TmbhParams, s0: InitialState,
                    opts: FitOptions = FitOptions(), weights: dict | None = None) -> DirectFitReport:
    """Fit the damped mean-field equations in (J, eta, Lambda, epsilon, n0, phi0).

    N is held at ``guess.N``. Used to compare parameter correlations with
    the heuristic fit; every model evaluation is a full ODE solve (LSODA).
    """
    w = default_weights(d) if weights is None else weights
    grid = np.union1d(np.union1d(d.phase_t, d.imbalance_t), [0.0])
    i_phase = np.searchsorted(grid, d.phase_t)
    i_imb = np.searchsorted(grid, d.imbalance_t)
    bad = np.full(d.n_data, np.inf)
    N = guess.N

    def fun(x):
        J, eta, Lam, eps, n0, phi0 = x
        try:
            p = TmbhParams.from_lambda(J, Lam, N, epsilon=eps, eta=eta)
            tr = integrate_tmbh(p, InitialState(n0, phi0), grid, method="LSODA")
        except (BJJError, ValueError):
            return bad
        return np.concatenate([(tr.phi[i_phase] - d.phase) / w["phase"],
                               (tr.n[i_imb] - d.imbalance) / w["imbalance"]])

    x0 = np.array([guess.J, guess.eta, guess.Lambda, guess.epsilon, s0.n0, s0.phi0])
    res = levenberg_marquardt(fun, x0, opts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        C = covariance(res.jac, res.cost, d.n_data, 6)
    return DirectFitReport(
        params=dict(zip(TMBH_FIT_PARAMS, (float(v) for v in res.x))),
        param_sigmas=dict(zip(TMBH_FIT_PARAMS, (float(s) for s in np.sqrt(np.clip(np.diag(C), 0, None))))),
        covariance=C,
        correlation=correlation(C),
        mse=res.cost / (d.n_data - 6),
        iterations=res.iterations,
        converged=bool(res.converged),
    )


def regime_of(report: FitReport) -> Regime:
    return classify_regime(report.params.k0)
