"""Mean-field two-mode Bose-Hubbard dynamics and the rigid pendulum, integrated
numerically.

Units: every energy is stored as an angular frequency E/hbar in rad/s and
time is in seconds. Divide by 2*pi only when printing "Hz" values.

These integrators are the reference against which the closed-form solutions
in :mod:`bjj.analytic` are checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import odeint, solve_ivp

from .errors import DomainError, IntegrationError, SingularityError

__all__ = [
    "TmbhParams",
    "InitialState",
    "Trajectory",
    "tmbh_rhs",
    "integrate_tmbh",
    "alpha_invariant",
    "pendulum_energy",
    "integrate_pendulum",
    "RTOL",
    "ATOL",
]

RTOL = 1e-10
ATOL = 1e-12
_N_LIMIT = 1.0 - 1e-12
MAX_EVALS = 2_000_000  # right-hand-side evaluations before an integration is abandoned


@dataclass(frozen=True)
class TmbhParams:
    """Physical parameters of the junction.

    J, U and epsilon are angular frequencies (rad/s); N is the atom number and
    eta the dimensionless viscosity. ``Lambda = N U / (2 J)`` is derived.
    """

    J: float
    U: float
    N: float
    epsilon: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if not self.J > 0:
            raise DomainError(f"J must be > 0, got {self.J}")
        if not self.U >= 0:
            raise DomainError(f"U must be >= 0, got {self.U}")
        if not self.N >= 2:
            raise DomainError(f"N must be >= 2, got {self.N}")
        if not self.eta >= 0:
            raise DomainError(f"eta must be >= 0, got {self.eta}")
        if not math.isfinite(self.epsilon):
            raise DomainError("epsilon must be finite")

    @property
    def Lambda(self) -> float:
        return self.N * self.U / (2.0 * self.J)

    @classmethod
    def from_lambda(cls, J, Lambda, N, epsilon=0.0, eta=0.0) -> "TmbhParams":
        return cls(J=J, U=2.0 * J * Lambda / N, N=N, epsilon=epsilon, eta=eta)


@dataclass(frozen=True)
class InitialState:
    n0: float
    phi0: float

    def __post_init__(self):
        if not abs(self.n0) < 1.0:
            raise DomainError(f"|n0| must be < 1, got {self.n0}")

    @property
    def lam(self) -> float:
        """lambda = cos(phi0), the correction to Lambda in the plasma frequency."""
        return math.cos(self.phi0)


@dataclass
class Trajectory:
    times: np.ndarray
    phi: np.ndarray
    n: np.ndarray
    source: str
    dphi: np.ndarray | None = field(default=None, repr=False)

    SOURCES = ("numeric-tmbh", "numeric-pendulum", "analytic")

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.n = np.asarray(self.n, dtype=float)
        if not (self.times.shape == self.phi.shape == self.n.shape):
            raise ValueError("times, phi and n must have equal lengths")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.source not in self.SOURCES:
            raise ValueError(f"unknown trajectory source {self.source!r}")


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a non-empty 1-d array")
    if grid[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def tmbh_rhs(state, p: TmbhParams):
    """Right-hand side of the (damped, detuned) mean-field equations.

    Returns ``(dn/dt, dphi/dt)``. The viscous term multiplies the full
    ``dphi/dt``, detuning included.
    """
    n, phi = state
    if abs(n) >= _N_LIMIT:
        raise SingularityError("pendulum length collapsed: |n| reached 1")
    root = math.sqrt(1.0 - n * n)
    dphi = p.epsilon + 2.0 * p.J * (p.Lambda * n + n * math.cos(phi) / root)
    dn = -2.0 * p.J * root * math.sin(phi) - (p.eta / p.N) * dphi
    return dn, dphi


def _solve(fun, y0, grid, rtol, atol, what):
    if grid.size == 1:
        return np.array(y0, dtype=float)[:, None]
    evals = 0

    def counted(t, y):
        nonlocal evals
        evals += 1
        if evals > MAX_EVALS:
            raise IntegrationError(f"{what} integration stalled after {MAX_EVALS} evaluations "
                                   f"at t = {t:.6g} s (stiff or singular dynamics)")
        return fun(t, y)

    sol = solve_ivp(counted, (grid[0], grid[-1]), y0, method="RK45", t_eval=grid,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"{what} integration failed: {sol.message}")
    return sol.y


def integrate_tmbh(p: TmbhParams, s0: InitialState, grid, *, rtol=RTOL, atol=ATOL,
                   method="RK45") -> Trajectory:
    """Integrate the mean-field equations from ``s0`` and sample on ``grid``.

    ``method="RK45"`` (default) is Dormand-Prince 4(5) with dense output.
    ``method="LSODA"`` uses the compiled ODEPACK driver, about ten times
    faster, for inner loops such as fitting. Both are deterministic for
    fixed inputs.
    """
    grid = _check_grid(grid)
    y0 = [s0.n0, s0.phi0]
    if method == "LSODA":
        if grid.size == 1:
            return Trajectory(grid, [s0.phi0], [s0.n0], "numeric-tmbh")
        ys, info = odeint(lambda y, _t: tmbh_rhs(y, p), y0, grid, rtol=rtol, atol=atol,
                          full_output=True, mxstep=100000)
        if info["message"] != "Integration successful.":
            raise IntegrationError(f"TMBH integration failed: {info['message']}")
        return Trajectory(grid, ys[:, 1], ys[:, 0], "numeric-tmbh")
    if method != "RK45":
        raise ValueError(f"unknown method {method!r}")

    def fun(_t, y):
        return tmbh_rhs(y, p)

    y = _solve(fun, y0, grid, rtol, atol, "TMBH")
    return Trajectory(grid, y[1], y[0], "numeric-tmbh")


def alpha_invariant(state, Lambda):
    """Conserved quantity of the undamped symmetric junction,
    ``(Lambda/2) n^2 - sqrt(1 - n^2) cos(phi)``. Accepts arrays."""
    n, phi = state
    n = np.asarray(n, dtype=float)
    out = 0.5 * Lambda * n * n - np.sqrt(1.0 - n * n) * np.cos(phi)
    return float(out) if np.ndim(out) == 0 else out


def pendulum_energy(phi, dphi, omega0):
    """Pendulum energy ``dphi^2 + 4 omega0^2 sin^2(phi/2)`` in rad^2/s^2."""
    out = np.asarray(dphi) ** 2 + 4.0 * omega0**2 * np.sin(0.5 * np.asarray(phi)) ** 2
    return float(out) if np.ndim(out) == 0 else out


def integrate_pendulum(omega0, tau, s0, grid, context: TmbhParams | None = None,
                       *, rtol=RTOL, atol=ATOL) -> Trajectory:
    """Integrate ``phi'' + (2/tau) phi' + omega0^2 sin(phi) = 0``.

    ``s0`` is ``(phi0, dphi0)``; ``tau=math.inf`` switches damping off. When a
    TMBH ``context`` is given, the imbalance track is filled with
    ``n = (dphi - epsilon) / (2 J (Lambda + cos phi0))``; otherwise it is NaN.
    The phase velocity is always returned in ``Trajectory.dphi``.
    """
    if not omega0 > 0:
        raise DomainError("omega0 must be > 0")
    if not tau > 0:
        raise DomainError("tau must be > 0 (or math.inf)")
    grid = _check_grid(grid)
    phi0, dphi0 = s0
    w2 = omega0 * omega0
    gamma = 0.0 if math.isinf(tau) else 2.0 / tau

    def fun(_t, y):
        return (y[1], -gamma * y[1] - w2 * math.sin(y[0]))

    y = _solve(fun, [phi0, dphi0], grid, rtol, atol, "pendulum")
    phi, dphi = y[0], y[1]
    if context is None:
        n = np.full_like(phi, np.nan)
    else:
        n = (dphi - context.epsilon) / (2.0 * context.J * (context.Lambda + math.cos(phi0)))
    return Trajectory(grid, phi, n, "numeric-pendulum", dphi=dphi)
