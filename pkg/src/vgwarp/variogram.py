"""Isotropic Matérn models, empirical variograms and maximum-likelihood fits.

The Matérn correlation used throughout the package is

    rho(h) = 2**(1 - nu) / Gamma(nu) * (h / alpha)**nu * K_nu(h / alpha),

so that ``nu = 0.5`` gives ``exp(-h / alpha)``. The covariance is
``C(h) = sigma2 * rho(h)`` for ``h > 0`` and ``C(0) = sigma2 + nugget``;
the semivariance is ``gamma(h) = C(0) - C(h)`` with ``gamma(0) = 0``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, optimize, special
from scipy.spatial.distance import pdist, squareform
from scipy.stats import qmc

from .exceptions import ConvergenceError, DegenerateVariogramError, NotPositiveDefiniteError, ParameterError

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class VariogramModel:
    """Matérn (+ nugget) parameter set."""

    sigma2: float
    alpha: float
    nu: float
    nugget: float = 0.0

    def __post_init__(self):
        for name in ("sigma2", "alpha", "nu"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be positive and finite, got {v}")
        if not np.isfinite(self.nugget) or self.nugget < 0:
            raise ParameterError(f"nugget must be nonnegative, got {self.nugget}")

    @property
    def sill(self) -> float:
        return self.sigma2 + self.nugget

    def correlation(self, h):
        return matern_correlation(h, self.alpha, self.nu)

    def covariance(self, h):
        return matern_covariance(h, self)

    def semivariance(self, h):
        return matern_semivariance(h, self)

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def matern_correlation(h, alpha, nu):
    """Matérn correlation at distances ``h`` (``rho(0) = 1``)."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ParameterError("distances must be nonnegative")
    x = h / alpha
    if nu == 0.5:
        return np.exp(-x)
    out = np.ones_like(x)
    pos = x > 0
    xp = x[pos]
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        val = np.exp((1 - nu) * np.log(2) - special.gammaln(nu) + nu * np.log(xp)) * special.kv(nu, xp)
    # kv underflows to 0 far out and x**nu * K_nu -> 2**(nu-1) Gamma(nu) near 0.
    val = np.where(np.isfinite(val), val, np.where(xp < 1.0, 1.0, 0.0))
    out[pos] = np.clip(val, 0.0, 1.0)
    return out


def matern_covariance(h, model: VariogramModel):
    h = np.asarray(h, dtype=float)
    c = model.sigma2 * matern_correlation(h, model.alpha, model.nu)
    return np.where(h == 0, model.sigma2 + model.nugget, c)


def matern_semivariance(h, model: VariogramModel):
    h = np.asarray(h, dtype=float)
    g = model.nugget + model.sigma2 * (1.0 - matern_correlation(h, model.alpha, model.nu))
    return np.where(h == 0, 0.0, g)


def covariance_matrix(dist, model: VariogramModel) -> np.ndarray:
    """Covariance matrix from a square distance matrix.

    The nugget sits on the diagonal only, so duplicate sites (zero
    off-diagonal distance) are correlated at ``sigma2`` and not ``sill``.
    """
    dist = np.asarray(dist, float)
    cov = model.sigma2 * matern_correlation(dist, model.alpha, model.nu)
    cov[np.diag_indices_from(cov)] += model.nugget
    return cov


def cholesky_with_jitter(cov, jitter=1e-10, attempts=3):
    """Lower Cholesky factor of ``cov``.

    If the plain factorization fails, a relative diagonal jitter starting at
    ``jitter`` is added and grown x10 for up to ``attempts`` retries.
    """
    cov = np.asarray(cov, float)
    scale = max(float(np.mean(np.diag(cov))), 1e-300)
    for eps in [0.0] + [jitter * 10 ** i for i in range(attempts)]:
        try:
            return linalg.cholesky(cov + eps * scale * np.eye(len(cov)), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(f"covariance not positive definite after jitter {eps:g}")


# --------------------------------------------------------------------------
# Empirical variogram


@dataclass(frozen=True)
class EmpiricalVariogram:
    bin_centers: np.ndarray
    semivariances: np.ndarray
    counts: np.ndarray

    def rows(self):
        return zip(self.bin_centers.tolist(), self.semivariances.tolist(), self.counts.tolist())


def empirical_variogram(coords, values, n_bins=15, max_dist=None) -> EmpiricalVariogram:
    """Matheron estimator: per bin, half the mean squared increment.

    Empty bins keep ``count == 0`` and a NaN semivariance.
    """
    coords = np.asarray(coords, float)
    values = np.asarray(values, float)
    if len(values) < 2:
        raise ParameterError("need at least two sites")
    d = pdist(coords)
    sq = pdist(values[:, None], "sqeuclidean")
    if max_dist is None:
        max_dist = d.max() / 2
    if max_dist <= 0:
        raise ParameterError("max_dist must be positive")
    edges = np.linspace(0.0, max_dist, n_bins + 1)
    keep = d <= max_dist
    idx = np.clip(np.searchsorted(edges, d[keep], side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=sq[keep], minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2 * counts), np.nan)
    return EmpiricalVariogram(0.5 * (edges[1:] + edges[:-1]), gamma, counts)


# --------------------------------------------------------------------------
# Maximum likelihood


@dataclass(frozen=True)
class MLEResult:
    model: VariogramModel
    loglik: float
    n_evals: int
    converged: bool


def gaussian_loglik(x, cov) -> float:
    """Zero-mean Gaussian log-likelihood; ``-inf`` if ``cov`` is not PD."""
    try:
        L = linalg.cholesky(cov, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return -np.inf
    z = linalg.solve_triangular(L, x, lower=True, check_finite=False)
    n = len(x)
    return float(-np.sum(np.log(np.diag(L))) - 0.5 * z @ z - 0.5 * n * _LOG_2PI)


def matern_loglik(model: VariogramModel, dist, x) -> float:
    return gaussian_loglik(np.asarray(x, float), covariance_matrix(dist, model))


class _ProfileLikelihood:
    """Negative log-likelihood with the variance profiled out.

    ``C = sigma2 * (R + tau I)``; for fixed correlation parameters the
    maximising variance is ``x' (R + tau I)^-1 x / n``.
    """

    def __init__(self, dist, x, fix_nu, with_nugget):
        self.dist = dist
        self.x = x
        self.n = len(x)
        self.fix_nu = fix_nu
        self.with_nugget = with_nugget
        self.iu = np.triu_indices(self.n, 1)
        self.dvec = dist[self.iu]
        # Gridded designs repeat distances; evaluate the Bessel term once per value.
        uniq, inv = np.unique(self.dvec, return_inverse=True)
        self.uniq, self.inv = (uniq, inv) if len(uniq) < 0.5 * len(self.dvec) else (None, None)
        self.evals = 0

    def unpack(self, theta):
        theta = np.asarray(theta, float)
        alpha = np.exp(theta[0])
        i = 1
        if self.fix_nu is None:
            nu = np.exp(theta[i])
            i += 1
        else:
            nu = self.fix_nu
        tau = np.exp(theta[i]) if self.with_nugget else 0.0
        return alpha, nu, tau

    def profile(self, theta):
        alpha, nu, tau = self.unpack(theta)
        R = np.empty((self.n, self.n))
        if self.uniq is None:
            r = matern_correlation(self.dvec, alpha, nu)
        else:
            r = matern_correlation(self.uniq, alpha, nu)[self.inv]
        R[self.iu] = r
        R.T[self.iu] = r
        np.fill_diagonal(R, 1.0 + tau)
        try:
            L = linalg.cholesky(R, lower=True, check_finite=False)
        except linalg.LinAlgError:
            return None
        z = linalg.solve_triangular(L, self.x, lower=True, check_finite=False)
        q = float(z @ z)
        if q <= 0:
            return None
        sigma2 = q / self.n
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        ll = -0.5 * self.n * (np.log(sigma2) + 1.0 + _LOG_2PI) - 0.5 * logdet
        return ll, sigma2, alpha, nu, tau

    def __call__(self, theta):
        self.evals += 1
        if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > 30):
            return np.inf
        alpha, nu, tau = self.unpack(theta)
        if self.fix_nu is None and not (0.05 <= nu <= 20.0):
            return np.inf
        if self.with_nugget and tau > 1e6:
            return np.inf
        res = self.profile(theta)
        return np.inf if res is None else -res[0]


def fit_matern_mle(
    coords=None,
    values=None,
    *,
    dist=None,
    fix_nu=None,
    with_nugget=False,
    n_starts=5,
    seed=0,
    min_sites=10,
    maxiter=2000,
) -> MLEResult:
    """Maximum-likelihood Matérn(+nugget) fit for zero-mean data.

    Nelder-Mead in log-parameter space from ``n_starts`` Latin-hypercube
    starting points; the variance is profiled out analytically.

    Parameters
    ----------
    coords : array_like, shape (n, d), optional
        Site coordinates. Ignored when ``dist`` is given.
    values : array_like, shape (n,)
        Zero-mean (standardized) observations.
    dist : array_like, shape (n, n), optional
        Precomputed distance matrix (e.g. deformed-space distances).
    fix_nu : float, optional
        Hold the smoothness fixed at this value.
    with_nugget : bool
        Estimate a nugget.

    Raises
    ------
    ConvergenceError
        If the best local optimum did not converge within ``maxiter``.
    """
    x = np.asarray(values, float)
    if dist is None:
        dist = squareform(pdist(np.asarray(coords, float)))
    dist = np.asarray(dist, float)
    n = len(x)
    if n < min_sites:
        raise ParameterError(f"need at least {min_sites} sites, got {n}")
    if fix_nu is not None and fix_nu <= 0:
        raise ParameterError("fix_nu must be positive")

    obj = _ProfileLikelihood(dist, x, fix_nu, with_nugget)
    dpos = dist[obj.iu]
    dpos = dpos[dpos > 0]
    dmax = float(dpos.max())
    lows = [np.log(max(float(dpos.min()), 1e-3 * dmax))]
    highs = [np.log(0.5 * dmax)]
    if fix_nu is None:
        lows.append(np.log(0.3))
        highs.append(np.log(2.5))
    if with_nugget:
        lows.append(np.log(1e-3))
        highs.append(np.log(1.0))
    lows, highs = np.array(lows), np.array(highs)
    sampler = qmc.LatinHypercube(d=len(lows), seed=np.random.Generator(np.random.Philox(seed)))
    starts = qmc.scale(sampler.random(n_starts), lows, highs)

    best = None
    for start in starts:
        res = optimize.minimize(
            obj,
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-5, "fatol": 1e-8, "maxiter": maxiter, "maxfev": 2 * maxiter},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("no admissible parameter found", best=None)
    ll, sigma2, alpha, nu, tau = obj.profile(best.x)
    model = VariogramModel(sigma2=float(sigma2), alpha=float(alpha), nu=float(nu), nugget=float(tau * sigma2))
    result = MLEResult(model=model, loglik=float(ll), n_evals=obj.evals, converged=bool(best.success))
    if not best.success:
        raise ConvergenceError(f"Nelder-Mead did not converge: {best.message}", best=result)
    logger.debug("MLE %s loglik=%.4f evals=%d", model, ll, obj.evals)
    return result


# --------------------------------------------------------------------------
# Registration horizon and sampling


@dataclass(frozen=True)
class SampledFunction:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        v = np.asarray(self.values, float)
        if g.shape != v.shape or g.ndim != 1:
            raise ParameterError("grid and values must be 1-D arrays of equal length")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


def determine_ht(models, rel_tol=0.05) -> float:
    """Smallest distance at which every model is within ``rel_tol`` of its sill.

    A model whose nugget alone reaches the target contributes zero.

    Raises
    ------
    DegenerateVariogramError
        If every model is (numerically) a pure nugget.
    """
    models = list(models)
    if not models:
        raise ParameterError("need at least one model")
    horizons = []
    for m in models:
        target = (1.0 - rel_tol) * m.sill

        def short(h):
            return float(matern_semivariance(np.array([h]), m)[0]) < target

        if m.nugget >= target:
            horizons.append(0.0)
            continue
        hi = m.alpha
        while short(hi):
            hi *= 2.0
        lo = 0.0
        for _ in range(200):
            if hi - lo <= 1e-12 * hi:
                break
            mid = 0.5 * (lo + hi)
            if short(mid):
                lo = mid
            else:
                hi = mid
        horizons.append(hi)
    h_t = float(max(horizons))
    if h_t <= 0:
        raise DegenerateVariogramError("every variogram is a pure nugget; no registration horizon")
    return h_t


def sample_on_grid(model: VariogramModel, h_t: float, m: int = 512) -> SampledFunction:
    """Semivariance on ``m`` equally spaced distances in ``[0, h_t]``.

    The first value is the right limit at zero (the nugget), so the curve
    carries no artificial jump at the origin.
    """
    if m < 2:
        raise ParameterError("m must be at least 2")
    grid = np.linspace(0.0, h_t, m)
    vals = matern_semivariance(grid, model)
    vals[0] = model.nugget
    return SampledFunction(grid, vals)
