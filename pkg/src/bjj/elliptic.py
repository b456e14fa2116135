"""Jacobi elliptic functions and the first-kind elliptic integral.

All functions take the *parameter* ``m`` as second argument, following
Abramowitz & Stegun (and Mathematica): ``sn(u|m)`` with ``m = k**2`` where
``k`` is the modulus. Mixing up parameter and modulus is the classic bug
with these functions, so note that scipy's ``ellipj(u, m)`` uses the same
convention while many textbooks use the modulus.

Values ``m > 1`` are supported through the reciprocal-modulus
transformation, and ``m == 1`` through the hyperbolic closed forms. Negative
``m`` is rejected.

The core is the arithmetic-geometric mean (descending Landen / Gauss
transformation), which converges quadratically and gives results to a few
ulps for moderate arguments.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError

__all__ = [
    "complete_K",
    "incomplete_F",
    "jacobi_am",
    "jacobi_sn_cn_dn",
    "inv_sn",
]

_EPS = np.finfo(float).eps
_MAX_AGM_STEPS = 64
# slack allowed on branch boundaries (|x| <= 1/sqrt(m) and friends)
_BOUNDARY_RTOL = 1e-12


def _out(x):
    """Return a Python float for 0-d results, the array otherwise."""
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_m(m):
    m = np.asarray(m, dtype=float)
    if np.any(m < 0) or np.any(np.isnan(m)):
        raise DomainError("elliptic parameter m must be >= 0")
    return m


def _agm_ladder(m):
    """AGM ladder for 0 <= m < 1 (elementwise).

    Returns the lists ``a_n`` and ``c_n`` with ``a_0 = 1``, ``b_0 = sqrt(1-m)``,
    ``c_0 = sqrt(m)``, iterated until every ``c_n`` is negligible.
    """
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    c = np.sqrt(m)
    a_seq, c_seq = [a], [c]
    for _ in range(_MAX_AGM_STEPS):
        if np.all(np.abs(c) <= _EPS * a):
            break
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    return a_seq, c_seq


def _am_below_one(u, m):
    """Jacobi amplitude for 0 <= m < 1 by the AGM descent (A&S 16.4).

    The result is continuous and unbounded in ``u``: ``am(u + 2K) = am(u) + pi``.
    """
    a_seq, c_seq = _agm_ladder(m)
    n = len(a_seq) - 1
    phi = (2.0**n) * a_seq[n] * u
    for j in range(n, 0, -1):
        ratio = c_seq[j] / a_seq[j]
        phi = 0.5 * (phi + np.arcsin(ratio * np.sin(phi)))
    return phi


def _sn_cn_dn_below_one(u, m):
    phi = _am_below_one(u, m)
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - m * sn * sn)
    return sn, cn, dn, phi


def complete_K(m):
    """Complete elliptic integral of the first kind, ``K(m)``, for ``0 <= m < 1``.

    ``K(m) = pi / (2 * AGM(1, sqrt(1 - m)))``. Raises :class:`DomainError` for
    ``m >= 1``, where the integral diverges logarithmically.
    """
    m = _check_m(m)
    if np.any(m >= 1.0):
        raise DomainError("K diverges at m=1 (and is not real beyond)")
    a, b = np.ones_like(m), np.sqrt(1.0 - m)
    for _ in range(_MAX_AGM_STEPS):
        if np.all(np.abs(a - b) <= _EPS * a):
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return _out(0.5 * math.pi / a)


def _F_below_one(phi, m):
    # Gauss transformation: phi_{n+1} = phi_n + atan((b_n/a_n) tan phi_n) on the
    # continuous branch, written as 2*phi_n + correction so that no branch
    # bookkeeping is needed; F = phi_N / (2^N a_N).
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    phi = np.array(phi, dtype=float, copy=True)
    n = 0
    for _ in range(_MAX_AGM_STEPS):
        if np.all(np.abs(a - b) <= _EPS * a):
            break
        s, c = np.sin(phi), np.cos(phi)
        phi = 2.0 * phi + np.arctan((b - a) * s * c / (a * c * c + b * s * s))
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        n += 1
    return phi / ((2.0**n) * a)


def incomplete_F(phi, m):
    """Incomplete elliptic integral of the first kind ``F(phi|m)``.

    ``F(phi|m) = integral_0^phi dtheta / sqrt(1 - m sin^2 theta)``.

    For ``m < 1`` any real ``phi`` is accepted. For ``m >= 1`` the integrand is
    only real while ``m sin^2 theta <= 1``, so ``|phi|`` must not exceed
    ``arcsin(1/sqrt(m))`` (strictly below ``pi/2`` at ``m == 1``).
    """
    m = _check_m(m)
    phi, m = np.broadcast_arrays(np.asarray(phi, dtype=float), m)
    out = np.empty(phi.shape)

    lo = m < 1.0
    if np.any(lo):
        out[lo] = _F_below_one(phi[lo], m[lo])

    one = m == 1.0
    if np.any(one):
        p = phi[one]
        if np.any(np.abs(p) >= 0.5 * math.pi):
            raise DomainError("F(phi|1) diverges at |phi| = pi/2")
        out[one] = np.arcsinh(np.tan(p))

    hi = m > 1.0
    if np.any(hi):
        p, mm = phi[hi], m[hi]
        x = np.sqrt(mm) * np.sin(p)
        if np.any(np.abs(p) > 0.5 * math.pi) or np.any(np.abs(x) > 1.0 + _BOUNDARY_RTOL):
            raise DomainError("F(phi|m) with m > 1 requires |sin(phi)| <= 1/sqrt(m)")
        beta = np.arcsin(np.clip(x, -1.0, 1.0))
        out[hi] = _F_below_one(beta, 1.0 / mm) / np.sqrt(mm)
    return _out(out)


def jacobi_sn_cn_dn(u, m):
    """Return ``(sn, cn, dn)`` at ``(u|m)``.

    For ``m > 1``:
    ``sn(u|m) = sn(sqrt(m) u | 1/m) / sqrt(m)``,
    ``cn(u|m) = dn(sqrt(m) u | 1/m)``, ``dn(u|m) = cn(sqrt(m) u | 1/m)``.
    """
    m = _check_m(m)
    u, m = np.broadcast_arrays(np.asarray(u, dtype=float), m)
    sn = np.empty(u.shape)
    cn = np.empty(u.shape)
    dn = np.empty(u.shape)

    lo = m < 1.0
    if np.any(lo):
        sn[lo], cn[lo], dn[lo], _ = _sn_cn_dn_below_one(u[lo], m[lo])

    one = m == 1.0
    if np.any(one):
        sn[one] = np.tanh(u[one])
        sech = 1.0 / np.cosh(u[one])
        cn[one] = sech
        dn[one] = sech

    hi = m > 1.0
    if np.any(hi):
        root = np.sqrt(m[hi])
        s, c, d, _ = _sn_cn_dn_below_one(root * u[hi], 1.0 / m[hi])
        sn[hi] = s / root
        cn[hi] = d
        dn[hi] = c
    return _out(sn), _out(cn), _out(dn)


def jacobi_am(u, m):
    """Jacobi amplitude ``am(u|m)``.

    For ``m < 1`` it increases without bound (``am(K|m) = pi/2``); at ``m == 1``
    it is the Gudermannian; for ``m > 1`` it is periodic and bounded by
    ``arcsin(1/sqrt(m))``, with ``cos(am) = cn(u|m) > 0``.
    """
    m = _check_m(m)
    u, m = np.broadcast_arrays(np.asarray(u, dtype=float), m)
    out = np.empty(u.shape)

    lo = m < 1.0
    if np.any(lo):
        out[lo] = _am_below_one(u[lo], m[lo])

    one = m == 1.0
    if np.any(one):
        out[one] = 2.0 * np.arctan(np.tanh(0.5 * u[one]))

    hi = m > 1.0
    if np.any(hi):
        root = np.sqrt(m[hi])
        s, _, d, _ = _sn_cn_dn_below_one(root * u[hi], 1.0 / m[hi])
        # cn(u|m) = d > 0, so atan2 stays on the principal branch
        out[hi] = np.arctan2(s / root, d)
    return _out(out)


def inv_sn(x, m):
    """Principal inverse of ``sn(.|m)``: the ``u`` with ``sn(u|m) = x``.

    The result lies in ``[-K(m), K(m)]`` for ``m < 1`` and in
    ``[-K(1/m)/sqrt(m), K(1/m)/sqrt(m)]`` for ``m > 1``. Requires ``|x| <= 1``
    (``< 1`` at ``m == 1``) and ``|x| <= 1/sqrt(m)`` when ``m > 1``.
    """
    m = _check_m(m)
    x, m = np.broadcast_arrays(np.asarray(x, dtype=float), m)
    out = np.empty(x.shape)

    lo = m < 1.0
    if np.any(lo):
        xx = x[lo]
        if np.any(np.abs(xx) > 1.0 + _BOUNDARY_RTOL):
            raise DomainError("inv_sn requires |x| <= 1")
        out[lo] = _F_below_one(np.arcsin(np.clip(xx, -1.0, 1.0)), m[lo])

    one = m == 1.0
    if np.any(one):
        xx = x[one]
        if np.any(np.abs(xx) >= 1.0):
            raise DomainError("inv_sn(x|1) diverges at |x| = 1")
        out[one] = np.arctanh(xx)

    hi = m > 1.0
    if np.any(hi):
        root = np.sqrt(m[hi])
        y = root * x[hi]
        if np.any(np.abs(y) > 1.0 + _BOUNDARY_RTOL):
            raise DomainError("inv_sn with m > 1 requires |x| <= 1/sqrt(m)")
        out[hi] = _F_below_one(np.arcsin(np.clip(y, -1.0, 1.0)), 1.0 / m[hi]) / root
    return _out(out)
