"""Conversions between pendulum parameters and TMBH parameters.

Pendulum parameters (k0, omega0, N0, tau, delta_phi, delta_n) are what a fit
to phase and imbalance data measures; TMBH parameters (J, U, epsilon, eta)
are what the mean-field model needs. All frequencies in rad/s.
"""

from __future__ import annotations

import math
import warnings

from .analytic import (
    PendulumParams,
    damped_frequency,
    dephasing,
    phase_velocity,
    phi_piecewise,
)
from .errors import DegeneracyError, DomainError
from .numeric import InitialState, TmbhParams

__all__ = [
    "to_tmbh_general",
    "to_tmbh_simplified",
    "to_tmbh",
    "to_pendulum",
    "viscosity_eta",
    "corrected_frequency",
    "damped_frequency",
    "initial_state_of",
    "DegenerateMapWarning",
]


class DegenerateMapWarning(UserWarning):
    """The general map was degenerate and the simplified one was used instead."""


def initial_state_of(P: PendulumParams) -> InitialState:
    """Phase and imbalance of the heuristic model at ``t = 0``."""
    phi0 = float(phi_piecewise(0.0, P))
    n0 = P.N0 / (2.0 * P.omega * P.k0) * float(phase_velocity(0.0, P)) + P.delta_n
    return InitialState(n0=n0, phi0=phi0)


def _from_lambda_sum(omega0, lam_sum, lam, delta_n, tau, N):
    """Assemble TMBH parameters from omega0 and ``Lambda + lambda``."""
    J = omega0 / (2.0 * math.sqrt(lam_sum))
    Lambda = lam_sum - lam
    if Lambda < 0:
        raise DomainError(f"map gives Lambda = {Lambda:.6g} < 0")
    epsilon = -2.0 * J * lam_sum * delta_n
    eta = 0.0 if math.isinf(tau) else N / (tau * J * lam_sum)
    return TmbhParams.from_lambda(J, Lambda, N, epsilon=epsilon, eta=eta)


def to_tmbh_general(P: PendulumParams, s0: InitialState, N) -> TmbhParams:
    """TMBH parameters from the pendulum parameters and the initial state.

    Uses ``Lambda + lambda = 4 sin^2(phi0/2) / |N0^2 - r^2 (n0 - delta_n)^2|``
    with ``r = omega0 / omega`` (``r = 1`` undamped), then
    ``J = omega0 / (2 sqrt(Lambda + lambda))``, ``epsilon = -2 J (Lambda +
    lambda) delta_n`` and ``eta = N / (tau J (Lambda + lambda))``. The map
    does not use k0 or delta_phi.
    """
    s = abs(math.sin(0.5 * s0.phi0))
    r = P.omega0 / P.omega
    gap = abs(P.N0**2 - (r * (s0.n0 - P.delta_n)) ** 2)
    if s < 1e-12:
        raise DegeneracyError("general map is degenerate for phi0 = 0; "
                              "use the simplified map or refit")
    if gap < 1e-14:
        raise DegeneracyError("general map is degenerate for N0 = |n0 - delta_n|; refit")
    lam_sum = 4.0 * s * s / gap
    return _from_lambda_sum(P.omega0, lam_sum, s0.lam, P.delta_n, P.tau, N)


def to_tmbh_simplified(P: PendulumParams, N, *, phi0=None, approx_lambda=False) -> TmbhParams:
    """Small-detuning map ``J = omega0 N0 / (4 k0)``, ``Lambda = 4 k0^2 / N0^2 -
    lambda``, ``epsilon = -(2 omega0 k0 / N0) delta_n``.

    ``lambda = cos(phi0)`` with ``phi0`` taken from the argument, or from the
    model itself at ``t = 0`` when omitted. ``approx_lambda=True`` sets
    ``lambda = 1``.
    """
    if not (P.k0 > 0 and P.N0 > 0):
        raise DegeneracyError("simplified map needs k0 > 0 and N0 > 0")
    if approx_lambda:
        lam = 1.0
    else:
        lam = math.cos(float(phi_piecewise(0.0, P)) if phi0 is None else phi0)
    lam_sum = 4.0 * P.k0**2 / P.N0**2
    return _from_lambda_sum(P.omega0, lam_sum, lam, P.delta_n, P.tau, N)


def to_tmbh(P: PendulumParams, N, s0: InitialState | None = None):
    """General map when the initial state allows it, simplified otherwise.

    Returns ``(params, method)`` with ``method`` in ``{"general", "simplified"}``.
    Only the ``phi0 = 0`` degeneracy falls back (with a warning); other
    degeneracies propagate.
    """
    if s0 is None:
        return to_tmbh_simplified(P, N), "simplified"
    if abs(math.sin(0.5 * s0.phi0)) < 1e-12:
        warnings.warn("phi0 = 0 makes the general map degenerate; using the simplified map",
                      DegenerateMapWarning, stacklevel=2)
        return to_tmbh_simplified(P, N, phi0=s0.phi0), "simplified"
    return to_tmbh_general(P, s0, N), "general"


def viscosity_eta(P: PendulumParams, N):
    """``eta = N N0 / (k0 tau omega0)``; zero without damping."""
    if math.isinf(P.tau):
        return 0.0
    return N * P.N0 / (P.k0 * P.tau * P.omega0)


def corrected_frequency(omega0, Phi0):
    """First-order anharmonic frequency ``omega0 (1 - Phi0^2 / 16)``."""
    if Phi0 < 0:
        raise DomainError("phase amplitude must be >= 0")
    return omega0 * (1.0 - Phi0 * Phi0 / 16.0)


def to_pendulum(p: TmbhParams, s0: InitialState, tau=None, *, approx_lambda=False) -> PendulumParams:
    """Pendulum parameters of the trajectory starting at ``s0``.

    ``tau`` defaults to the decay time implied by the viscosity,
    ``tau = N / (J eta (Lambda + lambda))`` (infinite for ``eta = 0``).
    """
    lam = 1.0 if approx_lambda else s0.lam
    lam_sum = p.Lambda + lam
    if not lam_sum > 0:
        raise DomainError("Lambda + lambda must be > 0")
    omega0 = 2.0 * p.J * math.sqrt(lam_sum)
    if tau is None:
        tau = math.inf if p.eta == 0 else p.N / (p.J * p.eta * lam_sum)
    omega = damped_frequency(omega0, tau)
    dphi0 = p.epsilon + 2.0 * p.J * lam_sum * s0.n0
    k0 = math.hypot(dphi0, 2.0 * omega * math.sin(0.5 * s0.phi0)) / (2.0 * omega)
    N0 = 2.0 * k0 / math.sqrt(lam_sum)
    if N0 > 1.0:
        raise DomainError(f"N0 = {N0:.6g} > 1: state beyond the pendulum model (k0 too large)")
    delta_n = -p.epsilon / (2.0 * p.J * lam_sum) + 0.0  # no signed zero
    diff = s0.n0 - delta_n
    sigma0 = -1 if diff < 0 else 1
    # evaluate on the mirrored state (phi, n - delta_n) -> (-phi, -(n - delta_n))
    # when sigma0 = -1 so that the model returns phi0 at t = 0
    dphi = dephasing(sigma0 * s0.phi0, k0) if k0 > 0 else 0.0
    return PendulumParams(k0=k0, omega0=omega0, N0=N0, tau=tau, delta_phi=dphi,
                          delta_n=delta_n, sigma0=sigma0)
