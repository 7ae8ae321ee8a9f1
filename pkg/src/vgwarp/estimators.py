"""Scikit-learn style estimators wrapping the deformation workflow.

>>> deform = RegionalDeformation(partition=boxes, fix_nu=0.6)
>>> model = DeformationKriging(deformation=deform, psi=1)
>>> model.fit(X_train, y_train, X_new=X_test)
>>> mean, sd = model.predict(X_test, return_std=True)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin, clone

from ._validation import as_partition, check_is_fitted, check_sites, check_sites_values
from .deformation import cross_warped, embed, project_gower, warped_distance_matrix
from .kriging import DeformedCovModel, SimpleKriging, fit_deformed
from .registration import register_set, smooth_and_extend
from .variogram import determine_ht, fit_matern_mle, sample_on_grid


class RegionalDeformation(TransformerMixin, BaseEstimator):
    """Distance warps estimated by aligning regional variograms.

    Parameters
    ----------
    partition : Partition or array_like, shape (k, 2, 2)
        Regions assumed internally stationary.
    fix_nu : float, optional
        Hold the Matérn smoothness fixed in the regional fits.
    with_nugget : bool, default=False
        Estimate a nugget in the regional fits.
    ht_rel_tol : float, default=0.05
        Registration horizon: every fitted variogram is within this
        fraction of its sill beyond it.
    grid_m : int, default=512
        Samples per variogram for registration.
    bandwidth : float, optional
        Warp smoothing bandwidth, ``h_t / 50`` by default.
    max_step : int, default=10
        Lattice step bound of the alignment.
    psi : int, optional
        Extra embedding dimensions used by :meth:`transform`; chosen by
        NMSE when unset.
    psi_max : int, default=10
    n_starts : int, default=5
    random_state : int, default=0
        Seed of the multi-start optimizer.

    Attributes
    ----------
    partition_ : Partition
    regional_models_ : list of VariogramModel
    h_t_ : float
    registration_ : RegistrationResult
    warps_ : list of WarpingFunction
    """

    def __init__(self, partition=None, fix_nu=None, with_nugget=False, ht_rel_tol=0.05, grid_m=512,
                 bandwidth=None, max_step=10, psi=None, psi_max=10, n_starts=5, random_state=0):
        self.partition = partition
        self.fix_nu = fix_nu
        self.with_nugget = with_nugget
        self.ht_rel_tol = ht_rel_tol
        self.grid_m = grid_m
        self.bandwidth = bandwidth
        self.max_step = max_step
        self.psi = psi
        self.psi_max = psi_max
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_sites_values(X, y)
        part = as_partition(self.partition)
        reg = part.regions_of(X)
        self.partition_ = part
        self.regional_models_ = [
            fit_matern_mle(X[reg == r], y[reg == r], fix_nu=self.fix_nu, with_nugget=self.with_nugget,
                           n_starts=self.n_starts, seed=self.random_state + r).model
            for r in range(part.k)
        ]
        self.h_t_ = determine_ht(self.regional_models_, self.ht_rel_tol)
        curves = [sample_on_grid(m, self.h_t_, self.grid_m) for m in self.regional_models_]
        self.registration_ = register_set(curves, max_step=self.max_step)
        self.warps_ = [smooth_and_extend(w.knots, w.warped, self.h_t_, self.bandwidth)
                       for w in self.registration_.warps]
        return self

    def distances(self, X, Y=None):
        """Warped distance matrix within ``X`` or between ``X`` and ``Y``."""
        check_is_fitted(self, "warps_")
        X = check_sites(X)
        if Y is None:
            return warped_distance_matrix(X, self.partition_, self.warps_).values
        return cross_warped(X, check_sites(Y), self.partition_, self.warps_)

    def embed(self, X, n_observed=None):
        """:class:`DeformedEmbedding` of the sites ``X``."""
        check_is_fitted(self, "warps_")
        X = check_sites(X, min_samples=2)
        D = warped_distance_matrix(X, self.partition_, self.warps_, n_observed)
        return embed(D, self.psi, self.psi_max)

    def transform(self, X):
        """Deformed-space coordinates of ``X`` (defined up to a rigid motion)."""
        return self.embed(X).coords


class _KrigingBase(RegressorMixin, BaseEstimator):
    def _fit_predictor(self, coords, y):
        self.predictor_ = SimpleKriging(coords, y, self.model_)

    def _coords_for(self, X):
        raise NotImplementedError

    def predict(self, X, return_std=False):
        """Kriging mean, and standard deviation when ``return_std``."""
        check_is_fitted(self, "predictor_")
        mean, sd = self.predictor_.predict(self._coords_for(check_sites(X)))
        return (mean, sd) if return_std else mean


class StationaryKriging(_KrigingBase):
    """Isotropic Matérn kriging in geographic coordinates.

    Parameters
    ----------
    fix_nu : float, optional
    with_nugget : bool, default=False
    n_starts : int, default=5
    random_state : int, default=0

    Attributes
    ----------
    model_ : VariogramModel
    """

    def __init__(self, fix_nu=None, with_nugget=False, n_starts=5, random_state=0):
        self.fix_nu = fix_nu
        self.with_nugget = with_nugget
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_sites_values(X, y)
        self.model_ = fit_matern_mle(X, y, fix_nu=self.fix_nu, with_nugget=self.with_nugget,
                                     n_starts=self.n_starts, seed=self.random_state).model
        self._fit_predictor(X, y)
        return self

    def _coords_for(self, X):
        return X


class DeformationKriging(_KrigingBase):
    """Kriging with a stationary Matérn model in the deformed space.

    Parameters
    ----------
    deformation : RegionalDeformation
        Cloned and fitted on the training data.
    psi : int, optional
        Extra deformed-space dimensions; chosen by NMSE when unset.
    psi_max : int, default=10
    fix_nu : float, optional
        Smoothness of the deformed-space model.
    with_nugget : bool, default=False
    n_starts : int, default=5
    random_state : int, default=0

    Attributes
    ----------
    deformation_ : RegionalDeformation
    embedding_ : DeformedEmbedding
        Joint embedding of the training sites and ``X_new``.
    model_ : VariogramModel
    deformed_model_ : DeformedCovModel

    Notes
    -----
    Sites passed as ``X_new`` at fit time are embedded jointly with the
    training sites. Other sites are placed afterwards by projecting their
    warped distances to the training sites onto the training configuration.
    """

    def __init__(self, deformation=None, psi=None, psi_max=10, fix_nu=None, with_nugget=False,
                 n_starts=5, random_state=0):
        self.deformation = deformation
        self.psi = psi
        self.psi_max = psi_max
        self.fix_nu = fix_nu
        self.with_nugget = with_nugget
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, X, y, X_new=None):
        X, y = check_sites_values(X, y)
        base = self.deformation if self.deformation is not None else RegionalDeformation()
        self.deformation_ = clone(base).fit(X, y)
        sites = X if X_new is None else np.vstack([X, check_sites(X_new)])
        D = warped_distance_matrix(sites, self.deformation_.partition_, self.deformation_.warps_, len(X))
        self.embedding_ = embed(D, self.psi, self.psi_max)
        n = len(X)
        self.train_sites_ = X
        self._lookup = {tuple(s): i for i, s in enumerate(sites)}
        self.deformed_model_ = fit_deformed(self.embedding_.coords[:n], y, with_nugget=self.with_nugget,
                                            fix_nu=self.fix_nu, seed=self.random_state,
                                            n_starts=self.n_starts)
        self.model_ = self.deformed_model_.base
        self._fit_predictor(self.embedding_.coords[:n], y)
        return self

    def _coords_for(self, X):
        coords = np.empty((len(X), self.embedding_.dim))
        known = np.array([tuple(x) in self._lookup for x in X], dtype=bool)
        if known.any():
            coords[known] = self.embedding_.coords[[self._lookup[tuple(x)] for x in X[known]]]
        if (~known).any():
            n = len(self.train_sites_)
            d = self.deformation_.distances(X[~known], self.train_sites_)
            train = self.embedding_.coords[:n]
            centre = train.mean(axis=0)
            coords[~known] = project_gower(train - centre, d) + centre
        return coords


__all__ = ["DeformationKriging", "RegionalDeformation", "StationaryKriging", "DeformedCovModel"]
