"""Acceptance criteria 1 to 9, one test each.

Every test records a one-line verdict that the terminal summary prints as
``CRITERION n: PASS|FAIL | details``; the same line goes to stdout.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from bjj.analytic import (
    PendulumParams,
    energy_ratio_k,
    evaluate_piecewise,
    mean_imbalance,
    n_undamped,
    phi_piecewise,
    phi_undamped,
    separatrix_crossing_time,
)
from bjj.cli import EXIT_OK, execute
from bjj.elliptic import complete_K, jacobi_am, jacobi_sn_cn_dn
from bjj.estimation import FIT_PARAMS, DataSet, FitOptions, fit, fit_tmbh_direct, propagate_error
from bjj.numeric import (
    InitialState,
    TmbhParams,
    alpha_invariant,
    integrate_pendulum,
    integrate_tmbh,
    pendulum_energy,
)
from bjj.parammap import initial_state_of, to_pendulum, to_tmbh_simplified, viscosity_eta

from conftest import ACCEPTANCE

TWO_PI = 2 * math.pi
REF_FIT = PendulumParams(k0=0.57, omega0=2623.0, N0=0.12, tau=8.9e-3, delta_phi=-2.0, delta_n=-0.03)


def record(n, ok, text):
    ACCEPTANCE[n] = (bool(ok), text)
    print(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {text}")


def crossings(t, y, upward=True):
    """Linearly interpolated sign changes of ``y``."""
    s = np.sign(y)
    idx = np.where((s[:-1] < 0) & (s[1:] >= 0))[0] if upward else np.where(s[:-1] * s[1:] < 0)[0]
    return t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])


def test_criterion_1_elliptic_identities():
    t0 = time.perf_counter()
    u = np.linspace(-10, 10, 1000)
    worst = 0.0
    for m in (0.1, 0.5, 0.9, 1.0, 1.5, 4.0):
        sn, cn, dn = jacobi_sn_cn_dn(u, m)
        worst = max(worst, np.max(np.abs(sn**2 + cn**2 - 1)), np.max(np.abs(dn**2 + m * sn**2 - 1)))
    h = 1e-6
    worst_d = 0.0
    for m in (0.1, 0.5, 0.9, 1.0, 1.5, 4.0):
        fd = (np.asarray(jacobi_am(u + h, m)) - np.asarray(jacobi_am(u - h, m))) / (2 * h)
        worst_d = max(worst_d, np.max(np.abs(fd - jacobi_sn_cn_dn(u, m)[2])))
    dt = time.perf_counter() - t0
    ok = worst < 1e-12 and worst_d < 1e-6 and dt < 1.0
    record(1, ok, f"identity residual {worst:.2e} (<1e-12), am' vs dn {worst_d:.2e} (<1e-6), {dt:.2f} s")
    assert ok


def test_criterion_2_oracle_equivalence():
    t0 = time.perf_counter()
    w0 = 40.0
    worst = 0.0
    worst_T = 0.0
    for k0 in (0.1, 0.5, 0.9, 1.5, 3.0):
        P = PendulumParams(k0=k0, omega0=w0, N0=0.2)
        if k0 < 1:
            T = 4 * complete_K(k0**2) / w0
        else:
            T = 2 * complete_K(k0**-2) / (k0 * w0)
        t = np.linspace(0, 10 * T, 4001)
        tr = integrate_pendulum(w0, math.inf, (0.0, 2 * k0 * w0), t)
        worst = max(worst, np.max(np.abs(np.asarray(phi_undamped(t, P)) - tr.phi)))
        # measured period of the analytic solution
        if k0 < 1:
            f = lambda x: float(phi_undamped(x, P))  # noqa: E731
            # upward zeros at 0 and T; bracket the second one
            measured = brentq(f, 0.75 * T, 1.25 * T, xtol=1e-15, rtol=1e-15)
        else:
            # the imbalance peaks where the running phase crosses 0 mod 2 pi
            f = lambda x: float(phi_undamped(x, P)) - 2 * math.pi  # noqa: E731
            measured = brentq(f, 0.5 * T, 1.5 * T, xtol=1e-15, rtol=1e-15)
            n = np.asarray(n_undamped(np.array([0.0, measured]), P))
            assert abs(n[1] - n[0]) < 1e-12
        worst_T = max(worst_T, abs(measured / T - 1))
    dt = time.perf_counter() - t0
    ok = worst < 1e-6 and worst_T < 1e-8 and dt < 5.0
    record(2, ok, f"max |phi_an - phi_num| {worst:.2e} rad (<1e-6), period rel err {worst_T:.2e} (<1e-8), "
                  f"{dt:.2f} s")
    assert ok


def test_criterion_3_conservation():
    t0 = time.perf_counter()
    p = TmbhParams.from_lambda(J=TWO_PI * 50, Lambda=40, N=5000)
    drift = 0.0
    for s0 in (InitialState(0, 0.45 * math.pi), InitialState(0.15, -math.pi), InitialState(0.4, 0.3)):
        tr = integrate_tmbh(p, s0, np.linspace(0, 0.02, 2001))
        a = alpha_invariant((tr.n, tr.phi), 40)
        drift = max(drift, np.max(np.abs(a - a[0])))
    e_drift = 0.0
    for state in ((0.5, 0.0), (2.8, 0.0), (0.0, 25.0)):
        tr = integrate_pendulum(10.0, math.inf, state, np.linspace(0, 10, 2001))
        E = pendulum_energy(tr.phi, tr.dphi, 10.0)
        e_drift = max(e_drift, np.max(np.abs(E / E[0] - 1)))
    alphas = [alpha_invariant((n0, -math.pi), 40) for n0 in (0.15, 0.4, 0.6)]
    # the reference 4.116 truncates 4.11652
    reference_ok = (abs(alphas[0] - 1.439) < 5e-4 and abs(alphas[1] - 4.116) < 1e-3
                 and abs(alphas[2] - 8.00) < 5e-3)
    dt = time.perf_counter() - t0
    ok = drift < 1e-8 and e_drift < 1e-8 and reference_ok and dt < 5.0
    record(3, ok, f"alpha drift {drift:.1e}, energy drift {e_drift:.1e} (<1e-8), "
                  f"alpha = {alphas[0]:.4f}, {alphas[1]:.4f}, {alphas[2]:.4f}, {dt:.2f} s")
    assert ok


def _mqst_mean_error(n0):
    p = TmbhParams.from_lambda(J=TWO_PI * 50, Lambda=40, N=5000)
    s0 = InitialState(n0, -math.pi)
    P = to_pendulum(p, s0)
    t = np.linspace(0, 0.05, 50001)
    tr = integrate_tmbh(p, s0, t)
    predicted = mean_imbalance(P.N0, P.k0) * P.sigma0 + P.delta_n
    return abs(predicted / np.mean(tr.n) - 1)


def test_criterion_4_pendulum_vs_tmbh():
    t0 = time.perf_counter()
    p = TmbhParams(J=TWO_PI * 50, U=TWO_PI * 0.8, N=5000)
    amp_err = 0.0
    freq_err = {}
    t = np.linspace(0, 0.05, 50001)
    for f, alpha in ((0.1, -0.95), (0.8, 0.81)):
        s0 = InitialState(0.0, f * math.pi)
        assert round(alpha_invariant((0.0, s0.phi0), p.Lambda), 2) == alpha
        P = to_pendulum(p, s0)
        T = 4 * complete_K(P.k0**2) / P.omega0
        # turning point a quarter period after the zero crossing
        t_zero = -P.delta_phi / (P.k0 * P.omega0)
        peak = abs(float(phi_undamped(t_zero + T / 4, P)))
        amp_err = max(amp_err, abs(peak - 2 * math.asin(P.k0)))
        tr = integrate_tmbh(p, s0, t)
        T_num = float(np.mean(np.diff(crossings(t, tr.phi))))
        freq_err[alpha] = abs(T_num / T - 1)
    mqst = {n0: _mqst_mean_error(n0) for n0 in (0.4, 0.6)}
    dt = time.perf_counter() - t0
    ok = (amp_err < 1e-12 and freq_err[-0.95] < 0.02 and freq_err[0.81] < 0.05
          and all(e < 0.02 for e in mqst.values()) and dt < 10.0)
    record(4, ok, f"amplitude err {amp_err:.1e}; freq err {freq_err[-0.95]:.2%} (alpha=-0.95, <2%), "
                  f"{freq_err[0.81]:.2%} (alpha=0.81, <5%); MQST mean err "
                  f"{mqst[0.4]:.2%} (alpha=4.1), {mqst[0.6]:.2%} (alpha=8) (<2%); {dt:.2f} s")
    assert ok


@pytest.mark.xfail(strict=True, reason="alpha=1.44 lies close to the separatrix; the rigid-pendulum "
                                       "mean imbalance is 6% off")
def test_criterion_4_near_separatrix_mean_imbalance():
    assert _mqst_mean_error(0.15) < 0.02


def test_criterion_5_detuning_structure():
    t0 = time.perf_counter()
    J, Lam, N = TWO_PI * 20, 100.0, 5000
    sym = 0.0
    argmin_err = 0.0
    zero_at_flat = 0.0
    for n0 in (-0.2, 0.0, 0.2):
        for f in (-1, -0.5, 0, 0.5, 1):
            s0 = InitialState(n0, f * math.pi)
            eps_L = -2 * J * (Lam + s0.lam) * n0

            def k(eps):
                return energy_ratio_k(s0, TmbhParams.from_lambda(J, Lam, N, epsilon=eps))

            for d in (1.0, 50.0, 500.0, 5000.0):
                sym = max(sym, abs(k(eps_L + d) - k(eps_L - d)))
            res = minimize_scalar(k, bracket=(eps_L - 1000, eps_L + 1000), tol=1e-12)
            argmin_err = max(argmin_err, abs(res.x - eps_L) / (J * Lam))
            if f == 0:
                zero_at_flat = max(zero_at_flat, k(eps_L))
    dt = time.perf_counter() - t0
    ok = sym < 1e-10 and argmin_err < 1e-6 and zero_at_flat == 0.0 and dt < 1.0
    record(5, ok, f"asymmetry {sym:.1e} (<1e-10), argmin offset {argmin_err:.1e} J Lambda, "
                  f"k(eps_L) at phi0=0: {zero_at_flat}, {dt:.2f} s")
    assert ok


def test_criterion_6_damped_behaviour():
    t0 = time.perf_counter()
    trap = TmbhParams(J=TWO_PI * 100, U=TWO_PI * 0.8, N=5000, eta=120)
    # harmonic regime: per-period envelope of the numeric damped phase
    s0 = InitialState(0.0, 0.1 * math.pi)
    P = to_pendulum(trap, s0)
    t = np.linspace(0, 4 * P.tau, 40001)
    tr = integrate_tmbh(trap, s0, t)
    T = TWO_PI / P.omega
    nb = int(t[-1] / T)
    env = np.array([np.max(np.abs(tr.phi[(t >= i * T) & (t < (i + 1) * T)])) for i in range(nb)])
    tau_fit = -1 / np.polyfit((np.arange(nb) + 0.5) * T, np.log(env), 1)[0]
    tau_err = abs(tau_fit / P.tau - 1)
    # separatrix crossing of the self-trapped states
    cross = []
    for n0 in (0.15, 0.45, 0.6):
        s = InitialState(n0, -math.pi)
        Q = to_pendulum(trap, s)
        tc = separatrix_crossing_time(Q.k0, Q.tau)
        tt = np.linspace(0, 3 * tc + 0.01, 60001)
        num = integrate_tmbh(trap, s, tt)
        zc = crossings(tt, num.n, upward=False)
        half_period = zc[1] - zc[0]  # spacing of the first oscillations after the crossing
        cross.append((n0, abs(zc[0] - tc), half_period))
    cross_ok = all(diff <= half for _, diff, half in cross)
    # long-time limits, with detuning
    q = TmbhParams(J=trap.J, U=trap.U, N=trap.N, eta=trap.eta, epsilon=50.0)
    lim = 0.0
    for s in (InitialState(0.0, 0.45 * math.pi), InitialState(0.45, -math.pi)):
        Q = to_pendulum(q, s)
        phi, n = evaluate_piecewise(np.array([30 * Q.tau]), Q)
        lim = max(lim, abs(phi[0]), abs(n[0] - Q.delta_n))
    dt = time.perf_counter() - t0
    ok = tau_err < 0.05 and cross_ok and lim < 1e-6 and dt < 10.0
    detail = ", ".join(f"n0={a}: |dt|={1e3 * b:.3f} ms vs {1e3 * c:.3f} ms" for a, b, c in cross)
    record(6, ok, f"envelope tau err {tau_err:.2%} (<5%); crossing {detail}; "
                  f"long-time residual {lim:.1e}; {dt:.2f} s")
    assert ok


def test_criterion_7_reference_fit_conversion():
    t0 = time.perf_counter()
    p = to_tmbh_simplified(REF_FIT, 3500, approx_lambda=True)
    J_hz = p.J / TWO_PI
    eta = viscosity_eta(REF_FIT, 3500)
    C = np.array([[13.0**2, -0.06, -0.1], [-0.06, 0.06**2, 0.0003], [-0.1, 0.0003, 0.03**2]])
    sJ = propagate_error(np.array([22.0 / 2623, 22.0 / 0.12, -22.0 / 0.57]), C)
    dt = time.perf_counter() - t0
    ok = (abs(J_hz - 22.0) <= 0.5 and abs(p.Lambda - 89.3) < 0.05 and abs(p.Lambda - 92) <= 87
          and abs(eta - 31.6) < 0.05 and abs(eta - 32) <= 7 and abs(sJ - 10.9) < 0.05
          and round(sJ) == 11 and dt < 1.0)
    record(7, ok, f"J = {J_hz:.2f} Hz, Lambda = {p.Lambda:.2f}, eta = {eta:.2f}, "
                  f"sigma_J = {sJ:.2f} Hz, {dt:.3f} s")
    assert ok


def _ref_fit_data(seed, t):
    rng = np.random.default_rng(seed)
    phi = np.asarray(phi_piecewise(t, REF_FIT)) + rng.normal(0, 0.15, t.size)
    n = np.asarray(evaluate_piecewise(t, REF_FIT)[1]) + rng.normal(0, 0.2, t.size)
    return DataSet(t, phi, t, n, N_atoms=3500, N_sigma=300)


def test_criterion_8_fit_recovery():
    t0 = time.perf_counter()
    t = np.linspace(0, 25e-3, 100)
    guess = REF_FIT.replace(k0=0.6, omega0=2700.0, N0=0.1, tau=10e-3, delta_phi=-1.8, delta_n=-0.02)
    good = 0
    unit_diag = True
    pinned = 0
    first = None
    for seed in range(100):
        d = _ref_fit_data(seed, t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            r = fit(d, guess)
        if first is None:
            first = (d, r)
        # parameters pinned at a bound have NaN sigma and count as not recovered
        defined = np.array([np.isfinite(r.param_sigmas[k]) for k in FIT_PARAMS])
        pinned += not defined.all()
        unit_diag &= bool(np.array_equal(np.diag(r.correlation)[defined], np.ones(defined.sum())))
        good += all(abs(getattr(r.params, k) - getattr(REF_FIT, k)) <= 3 * r.param_sigmas[k]
                    for k in FIT_PARAMS)
    d, r = first
    direct = fit_tmbh_direct(d, to_tmbh_simplified(REF_FIT, 3500), initial_state_of(REF_FIT),
                             FitOptions(), weights=r.weights)

    def off(c):
        return float(np.max(np.abs(c - np.diag(np.diag(c)))))

    heur, tmbh = off(r.correlation), off(direct.correlation)
    dt = time.perf_counter() - t0
    ok = good >= 95 and unit_diag and heur < tmbh and dt < 300
    record(8, ok, f"{good}/100 runs within 3 sigma (>=95), {pinned} with a parameter pinned "
                  f"at a bound; unit diagonal {unit_diag}; max |corr| "
                  f"heuristic {heur:.3f} < direct TMBH {tmbh:.5f}; {dt:.1f} s")
    assert ok


def test_criterion_9_determinism(tmp_path):
    cfg = {"params": {"pendulum": {"k0": 0.57, "omega0": 2623, "N0": 0.12, "tau_ms": 8.9,
                                   "delta_phi": -2.0, "delta_n": -0.03}},
           "time": {"t_end_ms": 25, "n_points": 100},
           "noise": {"sigma_phi": 0.15, "sigma_n": 0.2, "seed": 20240601},
           "fit": {"N_atoms": 3500, "N_sigma": 300}}
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        path = tmp_path / f"{run}.json"
        path.write_text(json.dumps({**cfg, "paths": {"output": str(out)}}))
        assert execute("synth", str(path), [], {}) == EXIT_OK
        assert execute("fit", str(path), [], {}) == EXIT_OK
        outputs.append({f: (out / f).read_bytes() for f in ("phase.csv", "imbalance.csv", "report.json")})
    same = outputs[0] == outputs[1]
    record(9, same, "synth+fit twice with a fixed seed: phase.csv, imbalance.csv, report.json "
                    f"{'byte-identical' if same else 'differ'}")
    assert same
