"""Regionwise nonstationary Matérn covariance and seeded Gaussian simulation.

The kernel-convolution covariance between sites ``s_i`` and ``s_j`` is

    sigma_i sigma_j |S_i|^(1/4) |S_j|^(1/4) |(S_i + S_j)/2|^(-1/2)
        * (2 sqrt(nu Q))^nu K_nu(2 sqrt(nu Q)) / (2^(nu-1) Gamma(nu))

with ``Q = (s_i - s_j)' ((S_i + S_j)/2)^-1 (s_i - s_j)``. When ``S = ell**2 I``
everywhere it is the stationary Matérn of :mod:`vgwarp.variogram` with range
``alpha = ell / (2 sqrt(nu))`` (see :func:`kernel_range`).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import DomainError, ParameterError
from .geometry import Partition
from .variogram import cholesky_with_jitter


@dataclass(frozen=True)
class KernelField:
    """Piecewise-constant kernel matrices and standard deviations.

    Parameters
    ----------
    partition : Partition
        Regions on which the kernel is constant.
    kernels : array_like, shape (k, 2, 2)
        Symmetric positive-definite kernel matrix of every region.
    sigmas : array_like, shape (k,)
        Marginal standard deviation of every region.
    nu : float
        Common smoothness.
    """

    partition: Partition
    kernels: np.ndarray
    sigmas: np.ndarray
    nu: float

    def __post_init__(self):
        K = np.array(self.kernels, float)
        sig = np.broadcast_to(np.array(self.sigmas, float), (self.partition.k,)).copy()
        if K.shape != (self.partition.k, 2, 2):
            raise ParameterError(f"kernels must have shape ({self.partition.k}, 2, 2)")
        if not np.allclose(K, K.transpose(0, 2, 1)):
            raise ParameterError("kernel matrices must be symmetric")
        if np.any(np.linalg.eigvalsh(K) <= 0):
            raise ParameterError("kernel matrices must be positive definite")
        if np.any(sig <= 0) or self.nu <= 0:
            raise ParameterError("sigmas and nu must be positive")
        object.__setattr__(self, "kernels", K)
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def isotropic(cls, partition, ell2, sigmas=1.0, nu=0.5):
        """Field with ``S = diag(ell2_r, ell2_r)`` in region ``r``."""
        ell2 = np.broadcast_to(np.asarray(ell2, float), (partition.k,))
        kernels = np.array([np.eye(2) * v for v in ell2])
        return cls(partition, kernels, sigmas, nu)


def kernel_range(ell2, nu):
    """Matérn range ``alpha`` equivalent to an isotropic kernel ``ell2 * I``."""
    return np.sqrt(ell2) / (2.0 * np.sqrt(nu))


def _pair_cov(si, sj, Ki, Kj, sgi, sgj, nu):
    """Vectorised covariance for paired rows of sites and 2x2 kernels."""
    A = 0.5 * (Ki + Kj)
    detA = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(detA <= 0):
        raise ParameterError("singular averaged kernel")
    d = si - sj
    # Q = d' A^-1 d with the closed-form 2x2 inverse.
    Q = (A[:, 1, 1] * d[:, 0] ** 2 - 2 * A[:, 0, 1] * d[:, 0] * d[:, 1] + A[:, 0, 0] * d[:, 1] ** 2) / detA
    Q = np.maximum(Q, 0.0)
    deti = Ki[:, 0, 0] * Ki[:, 1, 1] - Ki[:, 0, 1] ** 2
    detj = Kj[:, 0, 0] * Kj[:, 1, 1] - Kj[:, 0, 1] ** 2
    pref = sgi * sgj * deti ** 0.25 * detj ** 0.25 / np.sqrt(detA)
    x = 2.0 * np.sqrt(nu * Q)
    corr = np.ones_like(x)
    pos = x > 0
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        v = np.exp(nu * np.log(x[pos]) - (nu - 1) * np.log(2) - special.gammaln(nu)) * special.kv(nu, x[pos])
    corr[pos] = np.where(np.isfinite(v), v, np.where(x[pos] < 1.0, 1.0, 0.0))
    return pref * corr


def ns_matern_cov(s_i, s_j, field: KernelField) -> float:
    """Nonstationary Matérn covariance between two sites."""
    si = np.asarray(s_i, float)[None]
    sj = np.asarray(s_j, float)[None]
    ri = field.partition.regions_of(si)
    rj = field.partition.regions_of(sj)
    return float(
        _pair_cov(si, sj, field.kernels[ri], field.kernels[rj], field.sigmas[ri], field.sigmas[rj], field.nu)[0]
    )


def build_cov_matrix(sites, field: KernelField) -> np.ndarray:
    """Symmetric covariance matrix over ``sites`` (no jitter added here)."""
    sites = np.asarray(sites, float)
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise DomainError("sites must have shape (n, 2)")
    n = len(sites)
    reg = field.partition.regions_of(sites)
    iu, ju = np.triu_indices(n, 1)
    cov = np.empty((n, n))
    vals = _pair_cov(
        sites[iu], sites[ju],
        field.kernels[reg[iu]], field.kernels[reg[ju]],
        field.sigmas[reg[iu]], field.sigmas[reg[ju]],
        field.nu,
    )
    cov[iu, ju] = vals
    cov[ju, iu] = vals
    cov[np.diag_indices(n)] = field.sigmas[reg] ** 2
    return cov


@dataclass(frozen=True)
class Realization:
    sites: np.ndarray
    values: np.ndarray
    seed: int


def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; the only RNG used by the package."""
    return np.random.Generator(np.random.Philox(int(seed)))


def simulate(sites, field: KernelField, seed: int, jitter=1e-10, n_replicates=None):
    """Draw ``L z`` with ``L`` the Cholesky factor of the field covariance.

    With ``n_replicates`` set, returns an array of shape ``(n_replicates, n)``
    drawn from one generator; otherwise a :class:`Realization`.
    """
    sites = np.asarray(sites, float)
    L = cholesky_with_jitter(build_cov_matrix(sites, field), jitter=jitter)
    rng = make_rng(seed)
    if n_replicates is not None:
        z = rng.standard_normal((len(sites), n_replicates))
        return (L @ z).T
    z = rng.standard_normal(len(sites))
    return Realization(sites, L @ z, int(seed))


def regular_grid(xmin=0.0, xmax=2.0, ymin=0.0, ymax=2.0, nx=30, ny=30) -> np.ndarray:
    """Regular grid of ``nx * ny`` sites, x varying fastest."""
    gx = np.linspace(xmin, xmax, nx)
    gy = np.linspace(ymin, ymax, ny)
    X, Y = np.meshgrid(gx, gy)
    return np.column_stack([X.ravel(), Y.ravel()])
