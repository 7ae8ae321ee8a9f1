"""Global warped distances and their Euclidean embedding.

The distance between two sites is the Euclidean distance passed through
every regional warp, averaged with weights equal to the share of the
connecting segment that lies in each region. Classical multidimensional
scaling (CMDS) turns the resulting matrix into coordinates of a deformed
space, whose dimension is chosen by a normalized mean squared error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .exceptions import NumericalError, ParameterError
from .geometry import Partition, _check_in_domain, segment_fractions

logger = logging.getLogger(__name__)

COLOCATED_TOL = 1e-9
# Eigenvalues below this fraction of the largest count as zero.
EIG_RTOL = 1e-10


def _check_warps(part, warps):
    warps = list(warps)
    if len(warps) != part.k:
        raise ParameterError(f"need one warp per region ({part.k}), got {len(warps)}")
    return warps


def _combine(frac, dist, warps):
    out = np.zeros_like(dist)
    for r, w in enumerate(warps):
        nz = frac[:, r] > 0
        if np.any(nz):
            out[nz] += frac[nz, r] * w(dist[nz])
    return out


def global_distance(s, s2, part: Partition, warps) -> float:
    """Warped distance ``sum_i W_i(s, s2) phi_i(||s - s2||)``.

    Parameters
    ----------
    s, s2 : array_like, shape (2,)
    part : Partition
    warps : sequence of callables
        Regional warps, indexed like the partition regions.
    """
    warps = _check_warps(part, warps)
    s = _check_in_domain(s, part)
    s2 = _check_in_domain(s2, part)
    d = float(np.linalg.norm(s - s2))
    if d == 0.0:
        return 0.0
    frac = segment_fractions(s[None], s2[None], part)
    return float(_combine(frac, np.array([d]), warps)[0])


def pairwise_warped(a, b, part, warps, chunk=200_000):
    """Warped distances between rows of ``a`` and ``b`` paired elementwise."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    out = np.empty(len(a))
    for start in range(0, len(a), chunk):
        sl = slice(start, start + chunk)
        d = np.linalg.norm(a[sl] - b[sl], axis=1)
        frac = segment_fractions(a[sl], b[sl], part)
        out[sl] = _combine(frac, d, warps)
    return out


def cross_warped(a, b, part, warps):
    """Warped distance matrix between two site sets, shape (len(a), len(b))."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    ii, jj = np.meshgrid(np.arange(len(a)), np.arange(len(b)), indexing="ij")
    return pairwise_warped(a[ii.ravel()], b[jj.ravel()], part, warps).reshape(len(a), len(b))


@dataclass
class WarpedDistanceMatrix:
    """Symmetric matrix of warped distances.

    Attributes
    ----------
    sites : ndarray, shape (N, 2)
        Observed sites first, then unobserved ones.
    values : ndarray, shape (N, N)
    n_observed : int
    duplicates : bool
        True when two distinct rows of ``sites`` coincide.
    """

    sites: np.ndarray
    values: np.ndarray
    n_observed: int
    duplicates: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.sites):
            raise ParameterError("values must be square and match the sites")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @cached_property
    def spectrum(self):
        """Eigenpairs of the double-centred matrix, descending eigenvalues."""
        D2 = self.values ** 2
        B = D2 - D2.mean(axis=0)[None, :]
        B = -0.5 * (B - B.mean(axis=1)[:, None])
        B = 0.5 * (B + B.T)
        w, V = np.linalg.eigh(B)
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        # Largest-magnitude entry of every eigenvector is positive.
        idx = np.argmax(np.abs(V), axis=0)
        V = V * np.sign(V[idx, np.arange(V.shape[1])])
        return w, V


def warped_distance_matrix(sites, part: Partition, warps, n_observed=None) -> WarpedDistanceMatrix:
    """Pairwise warped distances over ``sites``.

    Parameters
    ----------
    sites : array_like, shape (N, 2)
    part : Partition
    warps : sequence of callables
    n_observed : int, optional
        Number of leading rows that are observed sites (all by default).
    """
    sites = np.asarray(sites, float)
    if sites.ndim != 2 or len(sites) < 2:
        raise ParameterError("need at least two sites")
    warps = _check_warps(part, warps)
    part.regions_of(sites)
    n = len(sites)
    iu, ju = np.triu_indices(n, 1)
    vals = pairwise_warped(sites[iu], sites[ju], part, warps)
    D = np.zeros((n, n))
    D[iu, ju] = vals
    D[ju, iu] = vals
    dup = bool(len(np.unique(sites, axis=0)) < n)
    if dup:
        logger.warning("duplicate sites in warped distance matrix")
    return WarpedDistanceMatrix(sites, D, n if n_observed is None else int(n_observed), dup)


@dataclass(frozen=True)
class DeformedEmbedding:
    """Coordinates of sites in the deformed space.

    Attributes
    ----------
    coords : ndarray, shape (N, d)
        Centred coordinates, ``d = d_geo + psi``.
    eigenvalues : ndarray
        All eigenvalues of the centred Gram matrix, descending.
    psi : int
        Extra dimensions beyond the geographic dimension.
    nmse : float
    padded : bool
        True when ``d`` exceeded the number of positive eigenvalues and the
        surplus columns are zero.
    n_observed : int
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    psi: int
    nmse: float = float("nan")
    padded: bool = False
    n_observed: int = 0
    curve: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def rows(self):
        """``(site_id, dim_1..dim_d, is_observed)`` rows."""
        n = len(self.coords)
        obs = (np.arange(n) < self.n_observed).astype(float)
        return np.column_stack([np.arange(n), self.coords, obs])


def _coords(w, V, d):
    floor = EIG_RTOL * max(float(w[0]), 0.0)
    lam = np.where(w[:d] > floor, w[:d], 0.0)
    return V[:, :d] * np.sqrt(lam), int(np.sum(w > floor)) < d


def cmds(dist, d: int, d_geo: int = 2) -> DeformedEmbedding:
    """Classical (Torgerson) multidimensional scaling.

    Parameters
    ----------
    dist : WarpedDistanceMatrix or array_like, shape (N, N)
    d : int
        Target dimension. Columns beyond the number of positive
        eigenvalues are zero and ``padded`` is set.
    d_geo : int
        Geographic dimension, used only to report ``psi = d - d_geo``.
    """
    if not isinstance(dist, WarpedDistanceMatrix):
        D = np.asarray(dist, float)
        dist = WarpedDistanceMatrix(np.zeros((len(D), 2)), D, len(D))
    if d < 1:
        raise ParameterError("dimension must be at least 1")
    if d > dist.n:
        raise ParameterError(f"dimension {d} exceeds the number of sites {dist.n}")
    w, V = dist.spectrum
    X, padded = _coords(w, V, d)
    if padded:
        logger.warning("embedding dimension %d exceeds the positive spectrum; zero-padded", d)
    emb = DeformedEmbedding(X, w.copy(), d - d_geo, float("nan"), padded, dist.n_observed)
    return DeformedEmbedding(X, w.copy(), d - d_geo, embedding_nmse(dist, emb), padded, dist.n_observed)


def embedding_nmse(dist, emb) -> float:
    """``1 - ||E - D||_F^2 / ||D - mean(D)||_F^2`` over the full matrices.

    ``E`` holds the Euclidean distances between embedded coordinates; 1 means
    the warped distances are reproduced exactly.
    """
    D = dist.values if isinstance(dist, WarpedDistanceMatrix) else np.asarray(dist, float)
    X = emb.coords if isinstance(emb, DeformedEmbedding) else np.asarray(emb, float)
    if X.shape[0] != D.shape[0]:
        raise ParameterError("embedding and distance matrix sizes differ")
    den = float(np.sum((D - D.mean()) ** 2))
    if den <= 0:
        raise NumericalError("constant distance matrix: NMSE undefined")
    E = squareform(pdist(X))
    return 1.0 - float(np.sum((E - D) ** 2)) / den


def nmse_curve(dist: WarpedDistanceMatrix, psi_max: int, d_geo: int = 2) -> np.ndarray:
    """``(psi, nmse)`` rows for ``psi = 0..psi_max``."""
    if psi_max < 0:
        raise ParameterError("psi_max must be nonnegative")
    w, V = dist.spectrum
    rows = []
    for psi in range(psi_max + 1):
        d = d_geo + psi
        if d > dist.n:
            break
        X, _ = _coords(w, V, d)
        rows.append((psi, embedding_nmse(dist, X)))
    return np.array(rows, dtype=float)


def select_dimension(dist: WarpedDistanceMatrix, psi_max: int, epsilon: float = 1e-3, d_geo: int = 2):
    """Smallest ``psi`` whose NMSE is within ``epsilon`` of the best one.

    Returns
    -------
    psi_star : int
    curve : ndarray, shape (psi_max + 1, 2)
        ``(psi, nmse)`` rows.
    """
    curve = nmse_curve(dist, psi_max, d_geo)
    best = curve[:, 1].max()
    psi_star = int(curve[np.argmax(curve[:, 1] >= best - epsilon), 0])
    return psi_star, curve


def _colocated(coords, sites):
    tree = cKDTree(coords)
    for i, j in tree.query_pairs(COLOCATED_TOL):
        if np.any(sites[i] != sites[j]):
            return True
    return False


def embed(dist: WarpedDistanceMatrix, psi=None, psi_max=10, epsilon=1e-3, d_geo=2) -> DeformedEmbedding:
    """Embed a warped distance matrix in the deformed space.

    With ``psi`` unset it is chosen by :func:`select_dimension`. If two
    distinct sites land within ``1e-9`` of each other, ``psi`` is increased
    until they separate.
    """
    curve = None
    if psi is None:
        psi, curve = select_dimension(dist, psi_max, epsilon, d_geo)
    if psi < 0:
        raise ParameterError("psi must be nonnegative")
    while True:
        emb = cmds(dist, d_geo + psi, d_geo)
        if not _colocated(emb.coords, dist.sites) or d_geo + psi >= dist.n:
            break
        logger.info("co-located deformed coordinates at psi=%d; increasing", psi)
        psi += 1
    return DeformedEmbedding(emb.coords, emb.eigenvalues, emb.psi, emb.nmse, emb.padded, emb.n_observed, curve)


def project_gower(emb_coords, d_new):
    """Place new points in an existing CMDS configuration.

    Parameters
    ----------
    emb_coords : ndarray, shape (n, d)
        Centred CMDS coordinates of the reference sites.
    d_new : ndarray, shape (m, n)
        Distances from every new point to the reference sites.

    Returns
    -------
    ndarray, shape (m, d)
        ``z = 1/2 (Y'Y)^+ Y' (diag(YY') - d_new**2)``.
    """
    Y = np.asarray(emb_coords, float)
    d2 = np.asarray(d_new, float) ** 2
    b = np.sum(Y ** 2, axis=1)
    G = Y.T @ Y
    rhs = 0.5 * (b[None, :] - d2) @ Y
    return np.linalg.lstsq(G, rhs.T, rcond=None)[0].T


def identity_warps(k, h_t):
    from .registration import WarpingFunction

    return [WarpingFunction.identity(h_t) for _ in range(k)]


__all__ = [
    "DeformedEmbedding",
    "WarpedDistanceMatrix",
    "cmds",
    "cross_warped",
    "embed",
    "embedding_nmse",
    "global_distance",
    "identity_warps",
    "nmse_curve",
    "pairwise_warped",
    "project_gower",
    "select_dimension",
    "warped_distance_matrix",
]
