"""Closed-form pendulum solutions for the junction.

Phase and imbalance are written with Jacobi elliptic functions of parameter
``m = k**-2``: ``0 < k < 1`` gives Josephson oscillations (``m > 1``),
``k > 1`` gives self-trapping with a running phase (``m < 1``), ``k == 1`` is
the separatrix. Damping is introduced heuristically by letting ``k`` decay
as ``exp(-t/tau)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .elliptic import inv_sn, jacobi_am, jacobi_sn_cn_dn
from .errors import DomainError, GuardBandError
from .numeric import InitialState, TmbhParams

__all__ = [
    "PendulumParams",
    "Regime",
    "GUARD_FRACTION",
    "RIGIDITY_THRESHOLD",
    "BRANCH_SWITCH_K",
    "plasma_frequency",
    "damped_frequency",
    "initial_phase_velocity",
    "energy_ratio_k",
    "dephasing",
    "phi_undamped",
    "n_undamped",
    "mean_imbalance",
    "phi_damped",
    "phi_damped_large",
    "separatrix_crossing_time",
    "phi_piecewise",
    "phase_velocity",
    "n_damped",
    "evaluate_piecewise",
    "classify_regime",
    "rigidity_check",
]

GUARD_FRACTION = 0.02
RIGIDITY_THRESHOLD = 0.05
BRANCH_SWITCH_K = 0.5
SEPARATRIX_TOL = 1e-9


@dataclass(frozen=True)
class PendulumParams:
    """Observable parameters of the pendulum model.

    omega0 in rad/s, tau and tau2 in seconds (``math.inf`` for no damping).
    ``tau2`` is the frequency-recovery time of the two-timescale solution and
    defaults to ``tau``.
    """

    k0: float
    omega0: float
    N0: float
    tau: float = math.inf
    tau2: float | None = None
    delta_phi: float = 0.0
    delta_n: float = 0.0
    sigma0: int = 1

    def __post_init__(self):
        if not self.k0 >= 0:
            raise DomainError(f"k0 must be >= 0, got {self.k0}")
        if not self.omega0 > 0:
            raise DomainError(f"omega0 must be > 0, got {self.omega0}")
        if not self.N0 >= 0:
            raise DomainError(f"N0 must be >= 0, got {self.N0}")
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if self.tau2 is not None and not self.tau2 > 0:
            raise DomainError(f"tau2 must be > 0, got {self.tau2}")
        if self.sigma0 not in (-1, 1):
            raise DomainError(f"sigma0 must be +1 or -1, got {self.sigma0}")

    @property
    def omega(self) -> float:
        """Damped oscillation frequency sqrt(omega0^2 - 1/tau^2)."""
        return damped_frequency(self.omega0, self.tau)

    @property
    def t2(self) -> float:
        return self.tau if self.tau2 is None else self.tau2

    @property
    def damped(self) -> bool:
        return not math.isinf(self.tau)

    def replace(self, **changes) -> "PendulumParams":
        return replace(self, **changes)


class Regime(enum.Enum):
    EQUILIBRIUM = "Equilibrium"
    JOSEPHSON_OSCILLATION = "JosephsonOscillation"
    SEPARATRIX = "Separatrix"
    SELF_TRAPPED = "SelfTrapped"


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# -- parameters of the motion -------------------------------------------------

def plasma_frequency(J, Lambda, phi0=0.0):
    """Small-oscillation frequency ``2 J sqrt(Lambda + cos phi0)`` (rad/s)."""
    s = Lambda + math.cos(phi0)
    if not s > 0:
        raise DomainError("Lambda + cos(phi0) must be > 0 (inverted pendulum)")
    return 2.0 * J * math.sqrt(s)


def damped_frequency(omega0, tau):
    """``sqrt(omega0^2 - 1/tau^2)``; ``omega0`` itself when ``tau`` is infinite."""
    if math.isinf(tau):
        return float(omega0)
    if not omega0 * tau > 1.0:
        raise DomainError(f"overdamped: omega0*tau = {omega0 * tau:.6g} <= 1")
    return math.sqrt(omega0 * omega0 - 1.0 / (tau * tau))


def initial_phase_velocity(s0: InitialState, p: TmbhParams):
    """dphi/dt at t=0: ``epsilon + 2 J (Lambda + cos phi0) n0``."""
    return p.epsilon + 2.0 * p.J * (p.Lambda + s0.lam) * s0.n0


def energy_ratio_k(s0: InitialState, p: TmbhParams, tau=math.inf):
    """Rescaled energy ``k0 = sqrt(dphi0^2 + 4 w^2 sin^2(phi0/2)) / (2 w)``.

    ``w`` is the damped frequency, equal to the plasma frequency when ``tau``
    is infinite.
    """
    omega = damped_frequency(plasma_frequency(p.J, p.Lambda, s0.phi0), tau)
    dphi0 = initial_phase_velocity(s0, p)
    s = math.sin(0.5 * s0.phi0)
    return math.sqrt(dphi0 * dphi0 + 4.0 * omega * omega * s * s) / (2.0 * omega)


def dephasing(phi0, k):
    """Elliptic-argument offset ``inv_sn(sin(phi0/2) | k^-2)``."""
    x = math.sin(0.5 * phi0)
    if k == 0:
        if abs(x) > 1e-15:
            raise DomainError("k = 0 only admits phi0 = 0")
        return 0.0
    if k < 1 and abs(x) > k * (1.0 + 1e-12):
        raise DomainError(f"|sin(phi0/2)| = {abs(x):.6g} exceeds the oscillation bound k = {k:.6g}")
    return inv_sn(x, k**-2)


def separatrix_crossing_time(k0, tau):
    """Time ``tau ln k0`` at which a decaying self-trapped state hits the separatrix."""
    if not k0 > 1:
        raise DomainError("separatrix crossing needs k0 > 1 (self-trapped start)")
    if math.isinf(tau):
        raise DomainError("no crossing without damping")
    return tau * math.log(k0)


def mean_imbalance(N0, k):
    """Offset ``nbar``: 0 for ``k <= 1``, ``N0 (sqrt(1 - k^-2) + 1) / 2`` above."""
    if k <= 1:
        return 0.0
    return 0.5 * N0 * (math.sqrt(1.0 - k**-2) + 1.0)


# -- undamped solutions --------------------------------------------------------

def _undamped_arg(t, P):
    return P.k0 * P.omega0 * np.asarray(t, dtype=float) + P.delta_phi


def _need_k(P):
    if not P.k0 > 0:
        raise DomainError("k0 must be > 0 (k0 = 0 is the equilibrium point)")


def phi_undamped(t, P: PendulumParams):
    """``2 sigma0 am(k0 omega0 t + dphi | k0^-2)``."""
    _need_k(P)
    return _out(2.0 * P.sigma0 * jacobi_am(_undamped_arg(t, P), P.k0**-2))


def n_undamped(t, P: PendulumParams):
    """``sigma0 N0 dn(k0 omega0 t + dphi | k0^-2) + delta_n - nbar``."""
    _need_k(P)
    _, _, dn = jacobi_sn_cn_dn(_undamped_arg(t, P), P.k0**-2)
    return _out(P.sigma0 * P.N0 * np.asarray(dn) + P.delta_n - mean_imbalance(P.N0, P.k0))


# -- damped heuristics ---------------------------------------------------------

def _decay(t, tau):
    return np.exp(-np.asarray(t, dtype=float) / tau)


def _phi_eq42(t, P):
    """Raw single-timescale damped phase, no guard check."""
    t = np.asarray(t, dtype=float)
    e = _decay(t, P.tau)
    arg = (P.k0 * P.omega * t + P.delta_phi) * e
    with np.errstate(over="ignore"):
        m = P.k0**-2 * np.exp(2.0 * t / P.tau)
    dead = ~np.isfinite(m) | (e == 0)
    if np.any(dead):
        out = np.zeros(t.shape)
        live = ~dead
        out[live] = 2.0 * P.sigma0 * jacobi_am(arg[live], m[live])
        return out
    return 2.0 * P.sigma0 * np.asarray(jacobi_am(arg, m))


def _phi_eq44(t, P):
    """Raw two-timescale damped phase. Assumes k0 exp(-t/tau) <= 1."""
    t = np.asarray(t, dtype=float)
    k_env = P.k0 * _decay(t, P.tau)
    k_freq = P.k0 * _decay(t, P.t2)
    out = np.zeros(t.shape)
    live = k_freq > 0
    if np.any(live):
        arg = (P.k0 * P.omega * t[live] + P.delta_phi) * _decay(t[live], P.t2)
        sn, _, _ = jacobi_sn_cn_dn(arg, k_freq[live] ** -2)
        env = np.arcsin(np.minimum(k_env[live], 1.0))
        out[live] = 2.0 * P.sigma0 * env / k_freq[live] * np.asarray(sn)
    return out


def phi_damped(t, P: PendulumParams, guard=None):
    """Single-timescale damped phase
    ``2 sigma0 am((w k0 t + dphi) e^{-t/tau} | k0^-2 e^{2t/tau})``.

    For a self-trapped start (``k0 > 1``) the formula is unphysical near the
    separatrix-crossing time ``tau ln k0``; evaluating within ``guard``
    seconds of it (default ``GUARD_FRACTION * tau``) raises
    :class:`GuardBandError`. Use :func:`evaluate_piecewise` to cross it.
    """
    _need_k(P)
    t = np.asarray(t, dtype=float)
    if P.damped and P.k0 > 1:
        g = GUARD_FRACTION * P.tau if guard is None else guard
        tc = separatrix_crossing_time(P.k0, P.tau)
        if np.any(np.abs(t - tc) < g):
            raise GuardBandError(f"t within {g:.3g} s of the separatrix crossing at {tc:.6g} s")
    return _out(_phi_eq42(t, P))


def phi_damped_large(t, P: PendulumParams):
    """Two-timescale phase for large oscillations after a separatrix crossing.

    Envelope ``2 arcsin(k0 e^{-t/tau})`` times ``sn`` normalised by its bound
    ``k0 e^{-t/tau2}``.
    """
    _need_k(P)
    t = np.asarray(t, dtype=float)
    if np.any(P.k0 * _decay(t, P.tau) > 1.0 + 1e-12):
        raise DomainError("phi_damped_large needs k0 exp(-t/tau) <= 1")
    return _out(_phi_eq44(t, P))


_EQ42, _BRIDGE, _EQ44 = 0, 1, 2


def _branches(t, P, g):
    """Active formula per time point, plus the band edges (or None)."""
    branch = np.full(t.shape, _EQ42, dtype=int)
    if not (P.damped and P.k0 > 1):
        return branch, None
    tc = separatrix_crossing_time(P.k0, P.tau)
    lo, hi = tc - g, tc + g
    k_env = P.k0 * _decay(t, P.tau)
    branch[(t >= lo) & (t <= hi)] = _BRIDGE
    branch[(t > hi) & (k_env >= BRANCH_SWITCH_K)] = _EQ44
    return branch, (lo, hi)


def _bridge_line(P, edges):
    lo, hi = edges
    y_lo = float(_phi_eq42(np.array(lo), P))
    y_hi = float(_phi_eq44(np.array(hi), P))
    return y_lo, (y_hi - y_lo) / (hi - lo)


def _eval_branch(t, P, code, line, edges):
    if code == _EQ42:
        return _phi_eq42(t, P)
    if code == _EQ44:
        return _phi_eq44(t, P)
    y_lo, slope = line
    return y_lo + slope * (t - edges[0])


def phi_piecewise(t, P: PendulumParams, guard=None):
    """Phase from the damped heuristics, stitched across the separatrix.

    Before ``t_c - guard`` the single-timescale formula; a linear bridge over
    ``[t_c - guard, t_c + guard]``; the two-timescale formula afterwards until
    ``k0 exp(-t/tau)`` drops below ``BRANCH_SWITCH_K``, then the
    single-timescale formula again. Without a crossing (``k0 <= 1`` or no
    damping) it is :func:`phi_damped` everywhere.
    """
    _need_k(P)
    t = np.asarray(t, dtype=float)
    g = GUARD_FRACTION * P.tau if guard is None else guard
    if P.damped and not g > 0:
        raise DomainError("guard must be > 0")
    branch, edges = _branches(t, P, g)
    line = _bridge_line(P, edges) if edges is not None else None
    out = np.empty(t.shape)
    for code in (_EQ42, _BRIDGE, _EQ44):
        sel = branch == code
        if np.any(sel):
            out[sel] = _eval_branch(t[sel], P, code, line, edges)
    return _out(out)


def phase_velocity(t, P: PendulumParams, guard=None):
    """dphi/dt of :func:`phi_piecewise` by a 5-point central difference.

    The stencil stays on the branch active at ``t``; step ``1e-4 / omega``.
    """
    _need_k(P)
    t = np.asarray(t, dtype=float)
    g = GUARD_FRACTION * P.tau if guard is None else guard
    h = 1e-4 / P.omega
    branch, edges = _branches(t, P, g)
    line = _bridge_line(P, edges) if edges is not None else None
    out = np.empty(t.shape)
    for code in (_EQ42, _BRIDGE, _EQ44):
        sel = branch == code
        if not np.any(sel):
            continue
        if code == _BRIDGE:
            out[sel] = line[1]
            continue
        ts = t[sel]
        f = [_eval_branch(ts + j * h, P, code, line, edges) for j in (-2, -1, 1, 2)]
        out[sel] = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h)
    return _out(out)


def n_damped(t, P: PendulumParams, guard=None):
    """Imbalance ``N0 / (2 w k0) dphi/dt + delta_n``."""
    dphi = np.asarray(phase_velocity(t, P, guard))
    return _out(P.N0 / (2.0 * P.omega * P.k0) * dphi + P.delta_n)


def evaluate_piecewise(t, P: PendulumParams, guard=None):
    """Return ``(phi, n)`` of the damped heuristic model at times ``t``."""
    return phi_piecewise(t, P, guard), n_damped(t, P, guard)


# -- classification and validity -----------------------------------------------

def classify_regime(k) -> Regime:
    if k < 0:
        raise DomainError("k must be >= 0")
    if k == 0:
        return Regime.EQUILIBRIUM
    if abs(k - 1.0) <= SEPARATRIX_TOL:
        return Regime.SEPARATRIX
    return Regime.JOSEPHSON_OSCILLATION if k < 1 else Regime.SELF_TRAPPED


def rigidity_check(P: PendulumParams, regime: Regime | None = None):
    """Maximal relative change of the pendulum length ``sqrt(1 - n^2)``.

    Returns ``(delta, ok)`` with ``ok`` when ``|delta| <= RIGIDITY_THRESHOLD``.
    The self-trapped formula is used for ``Regime.SELF_TRAPPED``, the
    oscillating one otherwise.
    """
    if P.N0 + abs(P.delta_n) > 1.0:
        raise DomainError("N0 + |delta_n| must be <= 1")
    if regime is None:
        regime = classify_regime(P.k0)
    top = math.sqrt(1.0 - (P.N0 + P.delta_n) ** 2)
    if regime is Regime.SELF_TRAPPED:
        low = P.N0 * math.sqrt(1.0 - P.k0**-2) + P.delta_n
    else:
        low = P.delta_n
    delta = top - math.sqrt(1.0 - low * low)
    return delta, abs(delta) <= RIGIDITY_THRESHOLD
