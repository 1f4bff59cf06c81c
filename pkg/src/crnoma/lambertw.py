"""Principal branch of the Lambert W function for real arguments.

Halley iteration from a regime-dependent starting guess, safeguarded by a
bracket. Near the branch point the work is done in the shifted variable
``u = W0(z) + 1`` which keeps full relative precision when ``z -> -1/e``.
"""

from __future__ import annotations

import math

import numpy as np

INV_E = math.exp(-1.0)
DOMAIN_SLACK = 1e-12
_MAXITER = 64


class LambertDomainError(ValueError):
    pass


def _series_gap(u: float) -> float:
    # (u - 1) e^u + 1 = sum_{k>=2} (k - 1) u^k / k!, for small |u|
    term = u * u / 2.0
    total = term
    k = 2
    while abs(term) > 1e-18 * abs(total) and k < 40:
        term *= u / (k + 1)
        k += 1
        total += term * (k - 1)
    return total


def _gap(u: float) -> float:
    """(u - 1) e^u + 1 without cancellation."""
    if abs(u) < 0.1:
        return _series_gap(u)
    return u * math.exp(u) - math.expm1(u)


def w0_plus_one(q: float) -> float:
    """Return ``1 + W0((q - 1) / e)`` for ``q >= 0``.

    This is the root ``u >= 0`` of ``(u - 1) e^u + 1 = q``. Passing the offset
    `q` instead of the argument avoids losing the digits of a small `q` to the
    subtraction ``(q - 1) / e + 1 / e``.
    """
    if q < 0:
        raise LambertDomainError(f"offset must be >= 0, got {q}")
    if q == 0:
        return 0.0
    if q > 2.0:
        return lambert_w0((q - 1.0) * INV_E) + 1.0
    # g(u) = (u-1)e^u + 1 is convex increasing on u >= 0 and g(u) >= u^2/2,
    # so Newton from sqrt(2q) approaches the root monotonically from above.
    u = math.sqrt(2.0 * q)
    for _ in range(_MAXITER):
        step = (_gap(u) - q) / (u * math.exp(u))
        u_next = u - step
        if u_next <= 0:
            u_next = u / 2
        if abs(u_next - u) <= 4e-16 * u:
            return u_next
        u = u_next
    return u


def _initial_guess(z: float) -> float:
    if z < -0.25:
        p = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    if z < 3.0:
        return math.log1p(z) * (1.0 - math.log1p(math.log1p(z)) / (2.0 + math.log1p(z)))
    lz = math.log(z)
    return lz - math.log(lz) + math.log(lz) / lz


def lambert_w0(z: float) -> float:
    """Principal branch ``W0(z)``: the solution ``w >= -1`` of ``w e^w = z``.

    Arguments slightly below ``-1/e`` (within 1e-12) are clamped to the branch
    point and return -1.

    Raises
    ------
    LambertDomainError
        If ``z < -1/e - 1e-12`` or `z` is not finite.
    """
    z = float(z)
    if not math.isfinite(z):
        raise LambertDomainError(f"non-finite argument {z}")
    if z < -INV_E - DOMAIN_SLACK:
        raise LambertDomainError(f"W0 undefined below -1/e, got {z}")
    if z <= -INV_E:
        return -1.0
    if z == 0.0:
        return 0.0
    if z < -0.3:
        return w0_plus_one(math.e * z + 1.0) - 1.0

    lo, hi = -1.0, max(1.0, math.log(z) if z > 1 else 1.0)
    w = min(max(_initial_guess(z), lo), hi)
    for _ in range(_MAXITER):
        ew = math.exp(w)
        f = w * ew - z
        if f > 0:
            hi = min(hi, w)
        else:
            lo = max(lo, w)
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        w_next = w - f / denom if denom != 0 else 0.5 * (lo + hi)
        if not lo <= w_next <= hi:
            w_next = 0.5 * (lo + hi)
        if abs(w_next - w) <= 2e-16 * (1.0 + abs(w_next)):
            return w_next
        w = w_next
    return w


lambert_w0_vec = np.vectorize(lambert_w0, otypes=[float])
