"""Mixed Gamma-Weibull distribution kernel.

The five-parameter density

    f(x) = p * g1(x | alpha, beta) + (1 - p) * g2(x | k, lam)

with g1 a Gamma density (shape alpha, scale beta) and g2 a Weibull density
(shape k, scale lam).  Every nested family used by the fitting code is this
density with some parameters pinned: exponential (alpha = k = 1, beta = lam),
Gamma (p = 1), Weibull (p = 0), mixed exponential (alpha = k = 1),
mixed exponential-Weibull (alpha = 1) and mixed Gamma-exponential (k = 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.optimize import brentq

from .special import log_gamma


class Family(enum.Enum):
    EXPONENTIAL = "exponential"
    GAMMA = "gamma"
    WEIBULL = "weibull"
    MIXED_EXPONENTIAL = "mixed_exponential"
    MGW = "mgw"
    MGE = "mge"
    MEW = "mew"


class PdfShape(enum.Enum):
    MONOTONE_DECREASING = "monotone_decreasing"
    UNIMODAL = "unimodal"
    OTHER = "other"


@dataclass(frozen=True)
class MgwParams:
    """Parameter vector (p, alpha, beta, k, lam) with domain validation."""

    p: float
    alpha: float
    beta: float
    k: float
    lam: float

    def __post_init__(self) -> None:
        for name in ("p", "alpha", "beta", "k", "lam"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        for name in ("alpha", "beta", "k", "lam"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.p, self.alpha, self.beta, self.k, self.lam)

    def to_dict(self) -> dict[str, float]:
        return {"p": self.p, "alpha": self.alpha, "beta": self.beta,
                "k": self.k, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d: dict) -> "MgwParams":
        return cls(p=d["p"], alpha=d["alpha"], beta=d["beta"],
                   k=d["k"], lam=d["lambda"])


@dataclass(frozen=True)
class Moments:
    mean: float
    variance: float
    cv_stat: float


def _as_positive_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise ValueError("x values must be positive and finite")
    return arr


def gamma_logpdf(x, alpha: float, beta: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return ((alpha - 1.0) * np.log(x) - x / beta
            - (log_gamma(alpha) + alpha * math.log(beta)))


def weibull_logpdf(x, k: float, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.log(x) - math.log(lam)
    return math.log(k) - math.log(lam) + (k - 1.0) * u - np.exp(k * u)


def mgw_logpdf(x, params: MgwParams) -> np.ndarray:
    x = _as_positive_array(x)
    p = params.p
    if p == 1.0:
        return gamma_logpdf(x, params.alpha, params.beta)
    if p == 0.0:
        return weibull_logpdf(x, params.k, params.lam)
    a = math.log(p) + gamma_logpdf(x, params.alpha, params.beta)
    b = math.log1p(-p) + weibull_logpdf(x, params.k, params.lam)
    return np.logaddexp(a, b)


def mgw_pdf(x, params: MgwParams) -> np.ndarray:
    return np.exp(mgw_logpdf(x, params))


def log_likelihood(xs, params: MgwParams) -> float:
    xs = _as_positive_array(xs)
    return float(np.sum(mgw_logpdf(xs, params)))


def mgw_moments(params: MgwParams) -> Moments:
    p, alpha, beta, k, lam = params.as_tuple()
    g1 = math.gamma(1.0 + 1.0 / k)
    g2 = math.gamma(1.0 + 2.0 / k)
    mean = p * alpha * beta + (1.0 - p) * lam * g1
    second = p * alpha * (alpha + 1.0) * beta ** 2 + (1.0 - p) * lam ** 2 * g2
    var = second - mean ** 2
    cv = var / mean ** 2
    return Moments(mean=mean, variance=var, cv_stat=cv)


def gamma_skewness(alpha: float) -> float:
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return 2.0 / math.sqrt(alpha)


def gamma_skewness_to_alpha(gamma_a: float) -> float:
    if gamma_a <= 0.0:
        raise ValueError(f"skewness must be positive, got {gamma_a}")
    return (2.0 / gamma_a) ** 2


def weibull_skewness(k: float) -> float:
    if k <= 0.0:
        raise ValueError(f"k must be positive, got {k}")
    # factored through lgamma so small k cannot overflow the moments
    l1 = math.lgamma(1.0 + 1.0 / k)
    l2 = math.lgamma(1.0 + 2.0 / k)
    l3 = math.lgamma(1.0 + 3.0 / k)
    num = 1.0 - 3.0 * math.exp(l1 + l2 - l3) + 2.0 * math.exp(3.0 * l1 - l3)
    den = (1.0 - math.exp(2.0 * l1 - l2)) ** 1.5
    return math.exp(l3 - 1.5 * l2) * num / den


def _weibull_k_from_skewness(gamma_k: float) -> float:
    """Inverse of weibull_skewness; the skewness is decreasing in k."""
    if gamma_k == 2.0:
        return 1.0
    def h(k: float) -> float:
        return weibull_skewness(k) - gamma_k
    if gamma_k > 2.0:
        hi = 1.0
        lo = 0.5
        while h(lo) < 0.0 and lo > 1e-3:
            lo /= 2.0
    else:
        lo = 1.0
        hi = 3.6
        if h(hi) > 0.0:
            raise ValueError(f"skewness {gamma_k} below the invertible range")
    return float(brentq(h, lo, hi, xtol=1e-14, rtol=8.9e-16))


def weibull_skewness_to_k(gamma_k: float) -> float:
    """Inverse of weibull_skewness on the k in (0, 1] branch (skewness >= 2).

    Values within 1e-9 below 2 are treated as exactly 2 so the k = 1 grid
    point is exact and downstream equality flags stay exact.
    """
    if gamma_k < 2.0 - 1e-9:
        raise ValueError(f"skewness must be >= 2, got {gamma_k}")
    if gamma_k <= 2.0:
        return 1.0
    return _weibull_k_from_skewness(gamma_k)


def _gamma_quantile(q: float, alpha: float, beta: float) -> float:
    return float(_sp.gammaincinv(alpha, q)) * beta


def _weibull_quantile(q: float, k: float, lam: float) -> float:
    return lam * (-math.log1p(-q)) ** (1.0 / k)


def _support_bounds(params: MgwParams, q: float = 1e-6) -> tuple[float, float]:
    p, alpha, beta, k, lam = params.as_tuple()
    los, his = [], []
    if p > 0.0:
        los.append(_gamma_quantile(q, alpha, beta))
        his.append(_gamma_quantile(1.0 - q, alpha, beta))
    if p < 1.0:
        los.append(_weibull_quantile(q, k, lam))
        his.append(_weibull_quantile(1.0 - q, k, lam))
    lo, hi = min(los), max(his)
    if lo <= 0.0 or not math.isfinite(lo):
        lo = hi * 1e-12
    return lo, hi


def classify_pdf_shape(params: MgwParams, n_points: int = 2048,
                       tol: float = 1e-10) -> PdfShape:
    """Classify the density as monotone decreasing, unimodal, or other.

    Numerical scan of the sign of d log f / dx over a geometric grid
    covering both component bulks; derivative magnitudes below tol count
    as flat and carry no shape information.
    """
    lo, hi = _support_bounds(params)
    grid = np.geomspace(lo, hi, n_points)
    lnf = mgw_logpdf(grid, params)
    d = np.diff(lnf) / np.diff(grid)
    signs = np.sign(d) * (np.abs(d) > tol)
    signs = signs[signs != 0.0]
    if signs.size == 0 or np.all(signs < 0):
        return PdfShape.MONOTONE_DECREASING
    changes = np.nonzero(np.diff(signs))[0]
    if signs[0] > 0 and signs[-1] < 0 and changes.size == 1:
        return PdfShape.UNIMODAL
    return PdfShape.OTHER


def sample_mgw(params: MgwParams, n: int, seed: int | None = None) -> np.ndarray:
    """Hierarchical sampling: Bernoulli(p) component labels, then the component."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < params.p
    gam = rng.gamma(params.alpha, params.beta, size=n)
    wei = params.lam * rng.weibull(params.k, size=n)
    return np.where(labels, gam, wei)
