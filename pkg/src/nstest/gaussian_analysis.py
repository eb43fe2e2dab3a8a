"""Standard normal special functions, the Gaussian isoperimetric profile,
the level weight ``psi`` and the curvature factor ``c_R(t)``.

All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(x, _INV_SQRT_2PI * np.exp(-0.5 * x * x))


def std_normal_cdf(x):
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(x, special.ndtr(x))


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1).

    Raises
    ------
    ValueError
        If any ``p`` lies outside (0, 1).
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("std_normal_quantile requires p in (0, 1)")
    return _scalar_or_array(p, special.ndtri(p))


def _mirror(s):
    # min(s, 1 - s). The form 1/2 - |s - 1/2| maps s and 1 - s to the same
    # float whenever |s - 1/2| rounds identically, but has absolute error
    # ~1e-17, so tails below 1/16 use s or 1 - s directly.
    m = 0.5 - np.abs(s - 0.5)
    return np.where(m < 0.0625, np.where(s < 0.5, s, 1.0 - s), m)


def _check_unit(s, name):
    if np.any(~((s >= 0.0) & (s <= 1.0))):
        raise ValueError(f"{name} requires s in [0, 1]")


def iso_profile(s):
    """Gaussian isoperimetric profile ``I(s) = phi(Phi^{-1}(s))``.

    Extended continuously by ``I(0) = I(1) = 0``.
    """
    s = np.asarray(s, dtype=float)
    _check_unit(s, "iso_profile")
    y = special.ndtri(_mirror(s))  # -inf at the endpoints
    return _scalar_or_array(s, _INV_SQRT_2PI * np.exp(-0.5 * y * y))


def psi_weight(s):
    """Level weight ``psi(s) = min(s, 1 - s) / I(s)``, with ``psi(0) = psi(1) = 0``.

    Evaluated in the variable ``y = Phi^{-1}(min(s, 1-s))`` where the ratio
    ``Phi(y) / phi(y)`` is the Mills ratio ``sqrt(pi/2) * erfcx(-y / sqrt 2)``.
    This stays accurate down to the smallest representable ``s`` instead of
    forming 0/0.
    """
    s = np.asarray(s, dtype=float)
    _check_unit(s, "psi_weight")
    y = special.ndtri(_mirror(s))
    return _scalar_or_array(s, _SQRT_HALF_PI * special.erfcx(-y / math.sqrt(2.0)))


def _psi_substituted(y):
    # psi(Phi(y)) * phi(y) = min(Phi(y), 1 - Phi(y)) = Phi(-|y|)
    return special.ndtr(-abs(y))


def psi_integral(a: float, b: float, *, epsabs: float = 1e-10) -> float:
    """Integral of :func:`psi_weight` over ``[a, b]``.

    Computed by adaptive quadrature after the change of variables
    ``s = Phi(y)``, which turns the integrand into the smooth, integrable
    function ``Phi(-|y|)`` on ``[Phi^{-1}(a), Phi^{-1}(b)]``.
    """
    if not (0.0 <= a <= b <= 1.0):
        raise ValueError(f"psi_integral requires 0 <= a <= b <= 1, got ({a}, {b})")
    if a == b:
        return 0.0
    lo = -math.inf if a == 0.0 else float(special.ndtri(a))
    hi = math.inf if b == 1.0 else float(special.ndtri(b))
    total = 0.0
    # Split at the kink of |y|.
    for u, v in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
        if u < v:
            val, _ = integrate.quad(_psi_substituted, u, v, epsabs=epsabs, epsrel=0.0, limit=200)
            total += val
    return total


def curvature_factor(R: float, t: float) -> float:
    """Smoothing constant ``c_R(t) = ((exp(2Rt) - 1) / R)^{-1/2}``.

    Equals ``(2t)^{-1/2}`` at ``R = 0``; that limit is used whenever
    ``|R| t < 1e-8``.
    """
    if not t > 0:
        raise ValueError(f"curvature_factor requires t > 0, got {t}")
    if abs(R) * t < 1e-8:
        return (2.0 * t) ** -0.5
    return (math.expm1(2.0 * R * t) / R) ** -0.5
