"""Simple kriging with a stationary Matérn model in a (deformed) coordinate space.

The same code serves the geographic baseline and the deformed model; the
two differ only in the coordinates they receive.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import ParameterError
from .deformation import pairwise_warped
from .variogram import cholesky_with_jitter, covariance_matrix, fit_matern_mle, matern_correlation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeformedCovModel:
    """Stationary Matérn model fitted on deformed-space distances.

    Attributes
    ----------
    base : VariogramModel
    dim : int
        Dimension of the space the model was fitted in.
    loglik : float
    """

    base: VariogramModel
    dim: int
    loglik: float = float("nan")

    @property
    def sill(self) -> float:
        return self.base.sill

    def covariance(self, h):
        return self.base.covariance(h)

    def to_dict(self) -> dict:
        return {**self.base.to_dict(), "dim": int(self.dim), "loglik": float(self.loglik)}


def fit_deformed(coords, values, with_nugget=False, fix_nu=None, seed=0, **kwargs) -> DeformedCovModel:
    """Maximum-likelihood Matérn fit on Euclidean distances between ``coords``."""
    coords = np.asarray(coords, float)
    res = fit_matern_mle(coords, values, fix_nu=fix_nu, with_nugget=with_nugget, seed=seed, **kwargs)
    return DeformedCovModel(res.model, coords.shape[1], res.loglik)


@dataclass(frozen=True)
class Prediction:
    site_id: int
    mean: float
    sd: float


class SimpleKriging:
    """Zero-mean kriging predictor with a cached Cholesky factor.

    Parameters
    ----------
    coords : array_like, shape (n, d)
    values : array_like, shape (n,)
        Zero-mean observations.
    model : VariogramModel or DeformedCovModel
    jitter : float
        Relative diagonal jitter used if the covariance is numerically
        indefinite.
    """

    def __init__(self, coords, values, model, jitter=1e-10):
        self.coords = np.asarray(coords, float)
        self.values = np.asarray(values, float)
        if self.coords.ndim != 2 or len(self.coords) != len(self.values):
            raise ParameterError("coords must be (n, d) and match values")
        self.model = model.base if isinstance(model, DeformedCovModel) else model
        C = covariance_matrix(squareform(pdist(self.coords)), self.model)
        self.chol = cholesky_with_jitter(C, jitter=jitter)
        self.weights_ = cho_solve((self.chol, True), self.values)
        self.n_clamped = 0

    def predict(self, new_coords):
        """Kriging mean and standard deviation at ``new_coords``.

        A new site that coincides with a training site returns the training
        value with standard deviation ``sqrt(nugget)``.
        """
        X = np.asarray(new_coords, float)
        if X.ndim != 2 or X.shape[1] != self.coords.shape[1]:
            raise ParameterError(f"new coordinates must have shape (m, {self.coords.shape[1]})")
        d = cdist(X, self.coords)
        k = self.model.sigma2 * matern_correlation(d, self.model.alpha, self.model.nu)
        mean = k @ self.weights_
        v = cho_solve((self.chol, True), k.T)
        var = self.model.sill - np.einsum("ij,ji->i", k, v)
        neg = var < 0
        if np.any(neg):
            self.n_clamped += int(neg.sum())
            logger.debug("clamped %d negative kriging variances", int(neg.sum()))
        var = np.clip(var, 0.0, self.model.sill)

        hit_row, hit_col = np.nonzero(d == 0)
        if len(hit_row):
            mean[hit_row] = self.values[hit_col]
            var[hit_row] = self.model.nugget
        return mean, np.sqrt(var)


def krige(train_coords, train_values, test_coords, model, site_ids=None) -> list:
    """Simple kriging predictions as a list of :class:`Prediction`."""
    mean, sd = SimpleKriging(train_coords, train_values, model).predict(test_coords)
    ids = np.arange(len(mean)) if site_ids is None else np.asarray(site_ids)
    return [Prediction(int(i), float(m), float(s)) for i, m, s in zip(ids, mean, sd)]


def _base(model):
    return model.base if isinstance(model, DeformedCovModel) else model


def ns_cov(s, s2, warps, part, model, sigma_field=None, tau_field=None) -> float:
    """Nonstationary covariance through the warped distance.

    Without fields this is ``C(phi(s, s2))``. With ``sigma_field`` and/or
    ``tau_field`` (callables of a location) it is
    ``sigma(s) sigma(s2) rho(phi(s, s2)) + tau(s) 1{s = s2}``.
    """
    s = np.asarray(s, float)
    s2 = np.asarray(s2, float)
    base = _base(model)
    same = bool(np.all(s == s2))
    phi = 0.0 if same else float(pairwise_warped(s[None], s2[None], part, warps)[0])
    if sigma_field is None and tau_field is None:
        return float(base.covariance(np.array([phi]))[0])
    sig = (lambda p: np.sqrt(base.sigma2)) if sigma_field is None else sigma_field
    tau = (lambda p: base.nugget) if tau_field is None else tau_field
    rho = float(matern_correlation(np.array([phi]), base.alpha, base.nu)[0])
    return float(sig(s) * sig(s2) * rho + (tau(s) if same else 0.0))


def correlation_map(anchor, grid_sites, warps, part, model) -> np.ndarray:
    """Correlation ``ns_cov(anchor, g) / C(0)`` at every grid site."""
    base = _base(model)
    grid_sites = np.asarray(grid_sites, float)
    anchor = np.asarray(anchor, float)
    a = np.broadcast_to(anchor, grid_sites.shape)
    phi = pairwise_warped(a, grid_sites, part, warps)
    same = np.all(grid_sites == anchor, axis=1)
    phi[same] = 0.0
    return base.covariance(phi) / base.sill
