"""Parameter estimation for the five precipitation-amount models.

Estimators:
  - fit_exponential_ml: closed form.
  - fit_gamma_ml / fit_weibull_ml: profile likelihood, one bracketed 1-D root.
  - fit_mixed_exponential_em: EM recursion on (p, beta, lam).
  - mixture_estimate_mgw: moment-constrained grid search; the grid lives in
    skewness space and (beta, lam) are solved from the moment quadratic.
  - fit_mgw_ml: modified EM (inner EM on p, beta, lam; gradient updates on
    alpha, k with an adaptively scaled step) from twelve initial sets.
"""

from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.optimize import brentq

from .distributions import (
    Family,
    MgwParams,
    PdfShape,
    _weibull_k_from_skewness,
    classify_pdf_shape,
    gamma_skewness_to_alpha,
    log_likelihood,
    weibull_skewness_to_k,
)
from .special import digamma, log_gamma, trigamma


class EstimationError(Exception):
    """Base class for estimation failures."""


class NonIdentifiableError(EstimationError):
    """Sample carries no information for the requested fit (e.g. constant data)."""


class CvLessThanOneError(EstimationError):
    """Mixture estimation requires cv_stat >= 1."""

    def __init__(self, cv_stat: float):
        super().__init__(f"cv_stat = {cv_stat:.6g} < 1; mixture estimation undefined")
        self.cv_stat = cv_stat


class NoAdmissibleCandidateError(EstimationError):
    """No converged candidate with a monotone-decreasing or unimodal density."""


class StepLeavesDomainError(EstimationError):
    """Gradient step cannot reach positive (alpha, k) after halving."""


class Method(enum.Enum):
    ML = "ml"
    MIXTURE = "mixture"


class Degeneracy(enum.Enum):
    NONE = "none"
    A = "a"      # mixed-exp EM landed on beta = lam: exponential
    B1 = "b1"    # mixture landed on k = 1: mixed Gamma-exponential
    B2 = "b2"    # mixture landed on alpha = 1: mixed exponential-Weibull
    B3 = "b3"    # mixture landed on alpha = k = 1: mixed exponential
    C = "c"      # MGW ML landed on p in {0, 1}: Weibull or Gamma ML


@dataclass(frozen=True)
class Fit:
    family: Family
    method: Method
    params: MgwParams | None
    log_lik: float
    n: int
    degeneracy: Degeneracy = Degeneracy.NONE
    iterations: int = 0
    converged: bool = True
    mixture_boundary: bool = False


@dataclass(frozen=True)
class FitFailure:
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class MixtureGridSpec:
    """Grid over (p, gamma_alpha, gamma_k); shapes derive from the skewnesses."""

    p_step: float = 0.01
    skew_lo: float = 2.0
    skew_hi: float = 5.0
    skew_step: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.p_step <= 0.5:
            raise ValueError(f"p_step out of range: {self.p_step}")
        if self.skew_lo < 2.0 - 1e-9 or self.skew_hi <= self.skew_lo:
            raise ValueError("skewness range must satisfy 2 <= lo < hi")
        if not 0.0 < self.skew_step <= self.skew_hi - self.skew_lo:
            raise ValueError(f"skew_step out of range: {self.skew_step}")

    def p_values(self) -> np.ndarray:
        count = int(round(1.0 / self.p_step))
        return np.linspace(0.0, 1.0, count + 1)

    def skew_values(self) -> np.ndarray:
        count = int(round((self.skew_hi - self.skew_lo) / self.skew_step))
        return np.linspace(self.skew_lo, self.skew_hi, count + 1)


@dataclass(frozen=True)
class MlConfig:
    score_tol: float = 1e-3
    eps0: float = 0.01
    p_degeneracy_tol: float = 1e-4
    prune_shape_cap: float = 25.0
    prune_var_floor: float = 0.01
    max_inner_iters: int = 10_000
    max_outer_iters: int = 1_000


@dataclass(frozen=True)
class PriorFits:
    """Single-family fits feeding the MGW ML initial sets."""

    gamma: Fit | None
    weibull: Fit | None
    mixed_exp: Fit | None
    mixture: Fit | None


def _clean_sample(xs, min_n: int) -> np.ndarray:
    arr = np.asarray(xs, dtype=float).ravel()
    if arr.size < min_n:
        raise EstimationError(f"need at least {min_n} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise EstimationError("observations must be positive and finite")
    return arr


# ---------------------------------------------------------------------------
# single-family ML fits


def fit_exponential_ml(xs) -> Fit:
    xs = _clean_sample(xs, 1)
    m = float(xs.mean())
    params = MgwParams(p=1.0, alpha=1.0, beta=m, k=1.0, lam=m)
    return Fit(family=Family.EXPONENTIAL, method=Method.ML, params=params,
               log_lik=log_likelihood(xs, params), n=xs.size)


def _expand_bracket(f, lo, hi, grow=4.0, max_expand=60):
    flo, fhi = f(lo), f(hi)
    for _ in range(max_expand):
        if flo == 0.0:
            return lo, lo
        if fhi == 0.0:
            return hi, hi
        if flo * fhi < 0.0:
            return lo, hi
        lo /= grow
        hi *= grow
        flo, fhi = f(lo), f(hi)
    raise EstimationError("failed to bracket the profile-likelihood root")


def fit_gamma_ml(xs) -> Fit:
    xs = _clean_sample(xs, 2)
    m = float(xs.mean())
    mean_ln = float(np.log(xs).mean())
    s = math.log(m) - mean_ln
    if s <= 0.0:
        raise NonIdentifiableError("constant sample: Gamma shape is unidentified")

    def h(a: float) -> float:
        return math.log(a) - digamma(a) - s

    a0 = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    lo, hi = _expand_bracket(h, a0 / 4.0, a0 * 4.0)
    alpha = a0 if lo == hi else float(brentq(h, lo, hi, xtol=1e-12, rtol=8.9e-16))
    for _ in range(4):
        # Newton polish: score_alpha = n * h(alpha), driven to machine noise
        step = h(alpha) / (1.0 / alpha - trigamma(alpha))
        if alpha - step <= 0.0:
            break
        alpha -= step
        if abs(h(alpha)) < 1e-13:
            break
    beta = m / alpha
    params = MgwParams(p=1.0, alpha=alpha, beta=beta, k=1.0, lam=beta)
    return Fit(family=Family.GAMMA, method=Method.ML, params=params,
               log_lik=log_likelihood(xs, params), n=xs.size)


def fit_weibull_ml(xs) -> Fit:
    xs = _clean_sample(xs, 2)
    lnx = np.log(xs)
    mean_ln = float(lnx.mean())
    sd_ln = float(lnx.std())
    if sd_ln == 0.0:
        raise NonIdentifiableError("constant sample: Weibull shape is unidentified")

    def ratios(k: float) -> tuple[float, float]:
        y = k * lnx
        e = np.exp(y - y.max())
        t0 = float(e.sum())
        return float((e * lnx).sum()) / t0, float((e * lnx * lnx).sum()) / t0

    def g(k: float) -> float:
        r1, _ = ratios(k)
        return r1 - mean_ln - 1.0 / k

    k0 = min(max(1.28255 / sd_ln, 0.05), 50.0)
    lo, hi = _expand_bracket(g, k0 / 2.0, k0 * 2.0, grow=2.0)
    k = k0 if lo == hi else float(brentq(g, lo, hi, xtol=1e-12, rtol=8.9e-16))
    for _ in range(4):
        r1, r2 = ratios(k)
        gp = r2 - r1 * r1 + 1.0 / (k * k)
        step = g(k) / gp
        if k - step <= 0.0:
            break
        k -= step
        if abs(g(k)) < 1e-13:
            break
    y = k * lnx
    ymax = float(y.max())
    lam = math.exp((ymax + math.log(float(np.exp(y - ymax).sum()) / xs.size)) / k)
    params = MgwParams(p=0.0, alpha=1.0, beta=lam, k=k, lam=lam)
    return Fit(family=Family.WEIBULL, method=Method.ML, params=params,
               log_lik=log_likelihood(xs, params), n=xs.size)


# ---------------------------------------------------------------------------
# mixed exponential EM


def _mixed_exp_posterior(xs, p, b, l):
    lnw1 = math.log(p) - math.log(b) - xs / b
    lnw2 = math.log1p(-p) - math.log(l) - xs / l
    lnf = np.logaddexp(lnw1, lnw2)
    return np.exp(lnw1 - lnf), float(lnf.sum())


def _mixed_exp_em_step(xs, p, b, l):
    """One EM update of (p, beta, lam) for the two-exponential mixture."""
    w, _ = _mixed_exp_posterior(xs, p, b, l)
    n = xs.size
    pn = float(w.mean())
    if not 0.0 < pn < 1.0:
        return pn, b, l
    bn = float((xs * w).sum()) / (n * pn)
    ln_ = float((xs * (1.0 - w)).sum()) / (n * (1.0 - pn))
    return pn, bn, ln_


def fit_mixed_exponential_em(xs, init: tuple[float, float, float] | None = None,
                             max_iters: int = 10_000) -> Fit:
    """EM fit of p * Exp(beta) + (1-p) * Exp(lam).

    Stops when the log-likelihood gain drops below 1e-10 and the largest
    parameter change below 1e-8.  When the two scales coincide to 1e-6
    relative the mixture has collapsed: the exponential fit is reported
    with degeneracy flag A.
    """
    xs = _clean_sample(xs, 2)
    m = float(xs.mean())
    if init is None:
        p, b, l = 0.5, 1.6 * m, 0.4 * m
    else:
        p, b, l = (float(v) for v in init)
        if not (0.0 < p < 1.0 and b > 0.0 and l > 0.0):
            raise EstimationError(f"invalid EM init {init!r}")
    _, ll = _mixed_exp_posterior(xs, p, b, l)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        pn, bn, ln_ = _mixed_exp_em_step(xs, p, b, l)
        if not 0.0 < pn < 1.0:
            p = min(max(pn, 0.0), 1.0)
            converged = True
            break
        _, ll_new = _mixed_exp_posterior(xs, pn, bn, ln_)
        delta = max(abs(pn - p), abs(bn - b), abs(ln_ - l))
        gain = ll_new - ll
        p, b, l, ll = pn, bn, ln_, ll_new
        if gain < 1e-10 and delta < 1e-8:
            converged = True
            break
    if abs(b - l) <= 1e-6 * max(b, l):
        params = MgwParams(p=1.0, alpha=1.0, beta=m, k=1.0, lam=m)
        return Fit(family=Family.MIXED_EXPONENTIAL, method=Method.ML, params=params,
                   log_lik=log_likelihood(xs, params), n=xs.size,
                   degeneracy=Degeneracy.A, iterations=iterations, converged=converged)
    params = MgwParams(p=p, alpha=1.0, beta=b, k=1.0, lam=l)
    return Fit(family=Family.MIXED_EXPONENTIAL, method=Method.ML, params=params,
               log_lik=log_likelihood(xs, params), n=xs.size,
               iterations=iterations, converged=converged)


# ---------------------------------------------------------------------------
# mixture estimation (moment-constrained grid search)


def _moment_quadratic(p, alpha, rk, cv):
    a = p * alpha * (alpha + 1.0) + p * p * alpha * alpha * rk / (1.0 - p)
    b = -2.0 * p * alpha * rk / (1.0 - p)
    c = rk / (1.0 - p) - 1.0 - cv
    return a, b, c


def beta_star_roots(p: float, alpha: float, k: float, cv: float) -> list[tuple[float, float]]:
    """Feasible normalized (beta*, lambda*) pairs for one (p, alpha, k, cv).

    Solves the moment quadratic for beta*; a root is kept when beta* > 0 and
    beta* < 1 / (p * alpha) so the implied lambda* is positive.  Returns 0,
    1, or 2 pairs ordered by increasing beta*.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p}")
    if alpha <= 0.0 or k <= 0.0 or cv < 0.0:
        raise ValueError("alpha, k must be positive and cv nonnegative")
    g1 = math.gamma(1.0 + 1.0 / k)
    rk = math.gamma(1.0 + 2.0 / k) / (g1 * g1)
    a, b, c = _moment_quadratic(p, alpha, rk, cv)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    q = (-b + math.sqrt(disc)) / 2.0
    out = []
    for root in sorted((c / q if q > 0.0 else -1.0, q / a)):
        if root > 0.0 and p * alpha * root < 1.0:
            lam_star = (1.0 - p * alpha * root) / ((1.0 - p) * g1)
            out.append((root, lam_star))
    return out


@functools.lru_cache(maxsize=8)
def _grid_tables(grid: MixtureGridSpec):
    gammas = grid.skew_values()
    alphas = (2.0 / gammas) ** 2
    ks = np.array([weibull_skewness_to_k(float(g)) for g in gammas])
    g1k = np.array([math.gamma(1.0 + 1.0 / k) for k in ks])
    g2k = np.array([math.gamma(1.0 + 2.0 / k) for k in ks])
    rk = g2k / (g1k * g1k)
    return gammas, alphas, ks, g1k, rk


def _chunked_loglik(xs, lnx, p, al, be, kk, la, chunk_elems=4_000_000):
    """Log-likelihood for many candidates sharing a single p; vectors al..la."""
    n = xs.size
    out = np.empty(al.size)
    step = max(1, chunk_elems // max(n, 1))
    lnp = math.log(p) if p > 0.0 else -math.inf
    ln1p = math.log1p(-p) if p < 1.0 else -math.inf
    for s in range(0, al.size, step):
        e = min(s + step, al.size)
        a, b, k, l = al[s:e, None], be[s:e, None], kk[s:e, None], la[s:e, None]
        lng1 = (a - 1.0) * lnx[None, :] - xs[None, :] / b - (
            _sp.gammaln(a) + a * np.log(b))
        u = lnx[None, :] - np.log(l)
        lng2 = np.log(k) - np.log(l) + (k - 1.0) * u - np.exp(k * u)
        if p == 1.0:
            lnf = lng1
        elif p == 0.0:
            lnf = lng2
        else:
            lnf = np.logaddexp(lnp + lng1, ln1p + lng2)
        out[s:e] = lnf.sum(axis=1)
    return out


def mixture_estimate_mgw(xs, grid: MixtureGridSpec | None = None,
                         ddof: int = 1) -> Fit:
    """Moment-constrained grid search over (p, gamma_alpha, gamma_k).

    Every candidate matches the sample mean and variance exactly; the winner
    maximizes the likelihood.  Ties break toward the smallest (p, gamma_alpha,
    gamma_k) and then the smaller beta* root.  Boundary winners (p in {0, 1})
    are flagged as not usable for likelihood-ratio testing.
    """
    grid = grid or MixtureGridSpec()
    xs = _clean_sample(xs, 2)
    n = xs.size
    mean = float(xs.mean())
    var = float(xs.var(ddof=ddof))
    cv = var / (mean * mean)
    if cv < 1.0:
        raise CvLessThanOneError(cv)
    lnx = np.log(xs)
    gammas, alphas, ks, g1k, rk = _grid_tables(grid)
    n_gk = ks.size

    best_ll = -math.inf
    best = None  # (p, alpha, k, beta, lam)

    def consider(lls, p, al, kk, be, la):
        nonlocal best_ll, best
        if lls.size == 0:
            return
        i = int(np.argmax(lls))
        if lls[i] > best_ll:
            best_ll = float(lls[i])
            best = (p, float(al[i]), float(kk[i]), float(be[i]), float(la[i]))

    # p = 0: pure Weibull; feasible only when some grid k matches the cv exactly
    match = np.abs(rk - (1.0 + cv)) <= 1e-9
    if match.any():
        kk = ks[match]
        la = mean / g1k[match]
        lls = _chunked_loglik(xs, lnx, 0.0, np.ones(kk.size), la.copy(), kk, la)
        consider(lls, 0.0, np.ones(kk.size), kk, la, la)

    # interior p ascending; alpha rows x k columns, both quadratic roots
    al_mat = np.broadcast_to(alphas[:, None], (alphas.size, n_gk))
    k_mat = np.broadcast_to(ks[None, :], (alphas.size, n_gk))
    g1_mat = np.broadcast_to(g1k[None, :], (alphas.size, n_gk))
    for p in (float(v) for v in grid.p_values()[1:-1]):
        a, b, c = _moment_quadratic(p, al_mat, rk[None, :], cv)
        disc = b * b - 4.0 * a * c
        has_real = disc >= 0.0
        q = np.where(has_real, (-b + np.sqrt(np.where(has_real, disc, 0.0))) / 2.0, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            roots = np.stack([np.where(q > 0.0, c / q, -1.0), q / a], axis=-1)
        feas = has_real[..., None] & (roots > 0.0) & (p * al_mat[..., None] * roots < 1.0)
        if not feas.any():
            continue
        root_vals = roots[feas]
        al = np.broadcast_to(al_mat[..., None], feas.shape)[feas]
        kk = np.broadcast_to(k_mat[..., None], feas.shape)[feas]
        g1 = np.broadcast_to(g1_mat[..., None], feas.shape)[feas]
        be = root_vals * mean
        la = (1.0 - p * al * root_vals) / ((1.0 - p) * g1) * mean
        lls = _chunked_loglik(xs, lnx, p, al, kk, be, la)
        consider(lls, p, al, kk, be, la)

    # p = 1: closed-form Gamma moment fit (alpha off-grid, boundary-marked)
    al = np.array([1.0 / cv])
    be = np.array([cv * mean])
    lls = _chunked_loglik(xs, lnx, 1.0, al, be, np.ones(1), be.copy())
    consider(lls, 1.0, al, np.ones(1), be, be)

    if best is None:
        raise EstimationError("no feasible mixture-estimation candidate on the grid")
    p, alpha, k, beta, lam = best
    boundary = p in (0.0, 1.0)
    if boundary:
        degeneracy, family = Degeneracy.NONE, Family.MGW
    elif alpha == 1.0 and k == 1.0:
        degeneracy, family = Degeneracy.B3, Family.MIXED_EXPONENTIAL
    elif k == 1.0:
        degeneracy, family = Degeneracy.B1, Family.MGE
    elif alpha == 1.0:
        degeneracy, family = Degeneracy.B2, Family.MEW
    else:
        degeneracy, family = Degeneracy.NONE, Family.MGW
    params = MgwParams(p=p, alpha=alpha, beta=beta, k=k, lam=lam)
    return Fit(family=family, method=Method.MIXTURE, params=params,
               log_lik=best_ll, n=n, degeneracy=degeneracy,
               mixture_boundary=boundary)


# ---------------------------------------------------------------------------
# MGW maximum likelihood (modified EM)


def _component_weights(xs, lng1, lng2, r1, p):
    """Posterior weights and the p score from the density ratio identity.

    For 0 < p < 1 the mixture identity p*r1 + (1-p)*r2 = 1 gives both w2 and
    the p score from r1 alone, avoiding a second exp pass; the rounding this
    admits is orders below the stopping tolerances.  At the boundaries r2 is
    computed directly because the identity divides by zero.
    """
    if 0.0 < p < 1.0:
        w1u = p * r1
        # posterior weights can overshoot their bounds by an ulp
        w1 = np.minimum(w1u, 1.0)
        w2 = np.maximum(1.0 - w1u, 0.0)
        s1 = (float(r1.sum()) - xs.size) / (1.0 - p)
        return w1, w2, s1
    lnf = lng1 if p == 1.0 else lng2
    with np.errstate(over="ignore"):
        r2 = np.exp(lng2 - lnf)
    s1 = float(np.sum(r1 - r2))
    w1 = np.minimum(r1, 1.0) if p == 1.0 else np.zeros_like(xs)
    w2 = r2 if p == 0.0 else np.zeros_like(xs)
    return w1, w2, s1


def _score_and_hessian(xs, lnx, params: MgwParams):
    """Five score components and the (alpha, k) Hessian block, one data pass."""
    p, alpha, beta, k, lam = params.as_tuple()
    lng1 = (alpha - 1.0) * lnx - xs / beta - (log_gamma(alpha) + alpha * math.log(beta))
    u = lnx - math.log(lam)
    with np.errstate(over="ignore"):
        t = np.exp(k * u)
    lng2 = math.log(k) - math.log(lam) + (k - 1.0) * u - t
    if p == 1.0:
        lnf = lng1
    elif p == 0.0:
        lnf = lng2
    else:
        lnf = np.logaddexp(math.log(p) + lng1, math.log1p(-p) + lng2)
    with np.errstate(over="ignore"):
        r1 = np.exp(lng1 - lnf)
    w1, w2, s1 = _component_weights(xs, lng1, lng2, r1, p)
    # products with (x/lam)^k and its square; 0 * inf from a saturated power
    # under a vanished weight means a true zero contribution
    with np.errstate(over="ignore", invalid="ignore"):
        w2t = w2 * t
        w2tt = w2t * t
    w2t = np.where(np.isfinite(w2t), w2t, 0.0)
    w2tt = np.where(np.isfinite(w2tt), w2tt, 0.0)
    c = lnx - digamma(alpha) - math.log(beta)
    c2 = 1.0 / k + u
    w1c = w1 * c
    w2d = w2 * c2 - u * w2t
    s = np.array([
        s1,
        float(np.sum(w1c)),
        float(np.sum(w1 * (xs - alpha * beta))) / (beta * beta),
        float(np.sum(w2d)),
        (k / lam) * float(np.sum(w2t - w2)),
    ])
    h_aa = float(np.sum(w1 * (c * c - trigamma(alpha)))) - float(np.sum(w1c * w1c))
    w2d2 = w2 * c2 * c2 - 2.0 * c2 * u * w2t + u * u * w2tt
    h_kk = (float(np.sum(w2d2 - w2 / (k * k) - u * u * w2t))
            - float(np.sum(w2d * w2d)))
    h_ak = -float(np.sum(w1c * w2d))
    return s, np.array([[h_aa, h_ak], [h_ak, h_kk]])


def mgw_score(xs, params: MgwParams) -> np.ndarray:
    """Score vector (d/dp, d/dalpha, d/dbeta, d/dk, d/dlam) of the log-likelihood."""
    xs = _clean_sample(xs, 1)
    s, _ = _score_and_hessian(xs, np.log(xs), params)
    return s


def _s1_acceptable(s1: float, p: float, tol: float, p_tol: float) -> bool:
    if abs(s1) < tol:
        return True
    # p cannot move further in the direction the score is pushing
    return (s1 > 0.0 and p > 1.0 - p_tol) or (s1 < 0.0 and p < p_tol)


@dataclass(frozen=True)
class InnerEmResult:
    p: float
    beta: float
    lam: float
    iterations: int
    converged: bool
    log_lik: float


def _em_inner_core(xs, lnx, alpha: float, k: float,
                   start: tuple[float, float, float],
                   cfg: MlConfig) -> InnerEmResult:
    n = xs.size
    p, b, l = (float(v) for v in start)
    # terms fixed while alpha and k are held
    base1 = (alpha - 1.0) * lnx - log_gamma(alpha)
    base2 = math.log(k) + (k - 1.0) * lnx
    y = k * lnx
    # x^k is also fixed, so the power term is a scalar rescale per iteration
    # unless that would overflow
    xk = np.exp(y) if float(y.max()) < 700.0 else None
    iterations = 0
    converged = False
    ll = -math.inf
    while True:
        lng1 = base1 - xs / b - alpha * math.log(b)
        kll = k * math.log(l)
        with np.errstate(over="ignore"):
            if xk is not None and kll > -700.0:
                t = xk * math.exp(-kll)
            else:
                t = np.exp(y - kll)
        lng2 = base2 - kll - t
        if p == 1.0:
            lnf = lng1
        elif p == 0.0:
            lnf = lng2
        else:
            lnf = np.logaddexp(math.log(p) + lng1, math.log1p(-p) + lng2)
        ll = float(lnf.sum())
        with np.errstate(over="ignore"):
            r1 = np.exp(lng1 - lnf)
        w1, w2, s1 = _component_weights(xs, lng1, lng2, r1, p)
        with np.errstate(over="ignore", invalid="ignore"):
            w2t = w2 * t
        w2t = np.where(np.isfinite(w2t), w2t, 0.0)
        sw1 = float(w1.sum())
        sxw1 = float((xs * w1).sum())
        sw2t = float(w2t.sum())
        s3 = (sxw1 - alpha * b * sw1) / (b * b)
        s5 = (k / l) * (sw2t - float(w2.sum()))
        if (_s1_acceptable(s1, p, cfg.score_tol, cfg.p_degeneracy_tol)
                and abs(s3) < cfg.score_tol and abs(s5) < cfg.score_tol):
            converged = True
            break
        if iterations >= cfg.max_inner_iters:
            break
        pn = sw1 / n
        if 0.0 < pn:
            b = sxw1 / (n * alpha * pn)
        if pn < 1.0 and sw2t > 0.0:
            # sum(x^k * w2) equals lam^k * sum(w2t), so the Weibull scale
            # update is a multiplicative correction to the current lam
            l = l * (sw2t / (n * (1.0 - pn))) ** (1.0 / k)
        p = min(max(pn, 0.0), 1.0)
        iterations += 1
    return InnerEmResult(p=p, beta=b, lam=l, iterations=iterations,
                         converged=converged, log_lik=ll)


def mgw_em_inner(xs, alpha: float, k: float,
                 start: tuple[float, float, float],
                 cfg: MlConfig | None = None) -> InnerEmResult:
    """EM on (p, beta, lam) with alpha and k held fixed.

    Stops when the p, beta, lam score components are below score_tol, the
    p component being excused at a degenerate boundary it cannot leave.
    """
    cfg = cfg or MlConfig()
    xs = _clean_sample(xs, 1)
    return _em_inner_core(xs, np.log(xs), alpha, k, start, cfg)


def _step_factor(g: np.ndarray, h: np.ndarray, eps0: float) -> float:
    gg = float(g @ g)
    if gg == 0.0:
        return 0.0
    ghg = float(g @ h @ g)
    if abs(ghg) < 1e-12 * gg:
        return 1.0
    return min(eps0 * abs(gg / ghg), 1.0)


def _apply_step(g: np.ndarray, h: np.ndarray, params: MgwParams,
                eps0: float) -> tuple[float, float]:
    factor = _step_factor(g, h, eps0)
    for _ in range(60):
        a_new = params.alpha + factor * g[0]
        k_new = params.k + factor * g[1]
        if a_new > 0.0 and k_new > 0.0:
            return float(a_new), float(k_new)
        factor /= 2.0
    raise StepLeavesDomainError(
        f"cannot keep (alpha, k) positive from ({params.alpha}, {params.k})")


def mgw_gradient_step(xs, params: MgwParams,
                      cfg: MlConfig | None = None) -> tuple[float, float]:
    """One adaptively scaled ascent update of (alpha, k).

    The step factor is eps0 * |g'g / g'Hg| capped at one; when the curvature
    term is negligible relative to g'g the cap value one is used directly.
    The step is halved until (alpha, k) stays positive, up to 60 times.
    """
    cfg = cfg or MlConfig()
    xs = _clean_sample(xs, 1)
    s, h = _score_and_hessian(xs, np.log(xs), params)
    return _apply_step(s[[1, 3]], h, params, cfg.eps0)


def mgw_initial_sets(xs, prior: PriorFits) -> list[MgwParams]:
    """Initial parameter sets for the MGW ML multistart.

    1-2: the mixed-exp EM fit and its component swap (omitted when that fit
    collapsed to the exponential); 3: equal-weight Gamma-ML + Weibull-ML
    composite; 4: the mixture-estimation fit (omitted at a p boundary or
    when unavailable); 5-12: skewness pairs (1.5, 2, 2.5)^2 minus (2, 2)
    with p = 0.5 and the scales set from the sample mean.
    """
    xs = _clean_sample(xs, 1)
    m = float(xs.mean())
    sets: list[MgwParams] = []
    me = prior.mixed_exp
    if me is not None and me.degeneracy is Degeneracy.NONE and me.params is not None:
        q = me.params
        sets.append(MgwParams(p=q.p, alpha=1.0, beta=q.beta, k=1.0, lam=q.lam))
        sets.append(MgwParams(p=1.0 - q.p, alpha=1.0, beta=q.lam, k=1.0, lam=q.beta))
    if prior.gamma is not None and prior.weibull is not None:
        gp, wp = prior.gamma.params, prior.weibull.params
        sets.append(MgwParams(p=0.5, alpha=gp.alpha, beta=gp.beta, k=wp.k, lam=wp.lam))
    mx = prior.mixture
    if mx is not None and mx.params is not None and not mx.mixture_boundary:
        sets.append(mx.params)
    for ga in (1.5, 2.0, 2.5):
        for gk in (1.5, 2.0, 2.5):
            if ga == 2.0 and gk == 2.0:
                continue
            alpha = gamma_skewness_to_alpha(ga)
            k = _weibull_k_from_skewness(gk)
            lam = m / math.gamma(1.0 + 1.0 / k)
            sets.append(MgwParams(p=0.5, alpha=alpha, beta=m / alpha, k=k, lam=lam))
    return sets


def _pruned(params: MgwParams, cfg: MlConfig) -> bool:
    if params.alpha > cfg.prune_shape_cap:
        if params.alpha * params.beta ** 2 < cfg.prune_var_floor:
            return True
    if params.k > cfg.prune_shape_cap:
        g1 = math.gamma(1.0 + 1.0 / params.k)
        g2 = math.gamma(1.0 + 2.0 / params.k)
        if params.lam ** 2 * (g2 - g1 * g1) < cfg.prune_var_floor:
            return True
    return False


def _score_converged(s: np.ndarray, p: float, cfg: MlConfig) -> bool:
    if not _s1_acceptable(float(s[0]), p, cfg.score_tol, cfg.p_degeneracy_tol):
        return False
    return bool(np.all(np.abs(s[1:]) < cfg.score_tol))


@dataclass(frozen=True)
class _Candidate:
    params: MgwParams
    log_lik: float
    iterations: int


def _run_start(xs, lnx, start: MgwParams, cfg: MlConfig) -> _Candidate | None:
    p, b, l = start.p, start.beta, start.lam
    alpha, k = start.alpha, start.k
    total_inner = 0
    for _ in range(cfg.max_outer_iters):
        inner = _em_inner_core(xs, lnx, alpha, k, (p, b, l), cfg)
        total_inner += inner.iterations
        p, b, l = inner.p, inner.beta, inner.lam
        if not inner.converged:
            return None
        params = MgwParams(p=p, alpha=alpha, beta=b, k=k, lam=l)
        if _pruned(params, cfg):
            return None
        s, h = _score_and_hessian(xs, lnx, params)
        if not np.all(np.isfinite(s[1:])):
            return None
        if _score_converged(s, p, cfg):
            return _Candidate(params=params, log_lik=inner.log_lik,
                              iterations=total_inner)
        try:
            alpha, k = _apply_step(s[[1, 3]], h, params, cfg.eps0)
        except StepLeavesDomainError:
            return None
    return None


def fit_mgw_ml(xs, cfg: MlConfig | None = None, prior: PriorFits | None = None,
               grid: MixtureGridSpec | None = None, ddof: int = 1,
               workers: int = 1) -> Fit:
    """Multistart modified-EM maximum likelihood for the full five-parameter model.

    The winner is the highest-likelihood converged candidate whose density is
    monotone decreasing or unimodal.  A winner with p beyond p_degeneracy_tol
    of a boundary is reported as the Gamma or Weibull ML fit it degenerated
    to, with flag C.  workers > 1 runs the starts on a thread pool; the
    winner is reduced in start order either way, so results are identical.
    """
    cfg = cfg or MlConfig()
    xs = _clean_sample(xs, 3)
    if prior is None:
        prior = compute_prior_fits(xs, grid=grid, ddof=ddof)
    starts = mgw_initial_sets(xs, prior)
    if not starts:
        raise NoAdmissibleCandidateError("no usable initial sets")
    lnx = np.log(xs)
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            candidates = list(pool.map(
                lambda st: _run_start(xs, lnx, st, cfg), starts))
    else:
        candidates = [_run_start(xs, lnx, st, cfg) for st in starts]
    best: _Candidate | None = None
    for cand in candidates:
        if cand is None:
            continue
        if classify_pdf_shape(cand.params) not in (
                PdfShape.MONOTONE_DECREASING, PdfShape.UNIMODAL):
            continue
        if best is None or cand.log_lik > best.log_lik:
            best = cand
    if best is None:
        raise NoAdmissibleCandidateError(
            "no converged candidate with an admissible density shape")
    p = best.params.p
    if p > 1.0 - cfg.p_degeneracy_tol or p < cfg.p_degeneracy_tol:
        target = prior.gamma if p > 0.5 else prior.weibull
        if target is None or target.params is None:
            raise EstimationError("degenerate winner but no single-family fit to report")
        return Fit(family=Family.MGW, method=Method.ML, params=target.params,
                   log_lik=target.log_lik, n=xs.size, degeneracy=Degeneracy.C,
                   iterations=best.iterations)
    return Fit(family=Family.MGW, method=Method.ML, params=best.params,
               log_lik=best.log_lik, n=xs.size, iterations=best.iterations)


def compute_prior_fits(xs, grid: MixtureGridSpec | None = None,
                       ddof: int = 1) -> PriorFits:
    """The single-family fits that seed fit_mgw_ml, tolerating individual failures."""

    def attempt(fn):
        try:
            return fn()
        except EstimationError:
            return None

    return PriorFits(
        gamma=attempt(lambda: fit_gamma_ml(xs)),
        weibull=attempt(lambda: fit_weibull_ml(xs)),
        mixed_exp=attempt(lambda: fit_mixed_exponential_em(xs)),
        mixture=attempt(lambda: mixture_estimate_mgw(xs, grid=grid, ddof=ddof)),
    )
