"""Scalar special functions used by the fitting and testing machinery.

Thin validated wrappers around scipy.special so that every caller goes
through one domain-checked surface.
"""

from __future__ import annotations

import math

from scipy import special as _sp


def _require_positive(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"{name} must be a positive finite number, got {x!r}")
    return x


def log_gamma(x: float) -> float:
    """Natural log of the Gamma function for x > 0."""
    x = _require_positive(x, "x")
    return float(_sp.gammaln(x))


def digamma(x: float) -> float:
    """First derivative of log_gamma for x > 0."""
    x = _require_positive(x, "x")
    return float(_sp.psi(x))


def trigamma(x: float) -> float:
    """Second derivative of log_gamma for x > 0."""
    x = _require_positive(x, "x")
    return float(_sp.polygamma(1, x))


def regularized_gamma_q(s: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(s, x), s > 0, x >= 0."""
    s = _require_positive(s, "s")
    x = float(x)
    if not math.isfinite(x) or x < 0.0:
        raise ValueError(f"x must be a nonnegative finite number, got {x!r}")
    return float(_sp.gammaincc(s, x))


def chi_square_sf(x: float, df: int) -> float:
    """Chi-square survival function P(X > x) with df degrees of freedom."""
    if int(df) != df or df <= 0:
        raise ValueError(f"df must be a positive integer, got {df!r}")
    return regularized_gamma_q(df / 2.0, float(x) / 2.0)
