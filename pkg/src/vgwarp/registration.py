"""Elastic registration of regional variograms.

Every regional variogram is viewed as a warped, rescaled copy of one common
template, ``f_i = c_i * g(phi_i(h)) + e_i``. After removing the affine part
the curves are aligned with square-root velocity functions (SRVFs) and
dynamic programming, and the template is re-estimated until it settles.
The resulting distance warps ``phi_i`` are smoothed and extended by the
identity beyond the registration horizon ``h_t``.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.integrate import trapezoid
from sklearn.isotonic import isotonic_regression

from . import _dp
from .exceptions import DegenerateVariogramError, ParameterError
from .variogram import SampledFunction

logger = logging.getLogger(__name__)

MIN_GRID = 8


@dataclass(frozen=True)
class SrvfCurve:
    grid: np.ndarray
    q: np.ndarray


def standardize(f: SampledFunction):
    """Shift by the value at zero and scale by the range.

    Returns
    -------
    (SampledFunction, c, e)
        Standardized curve ``(f - e) / c`` with ``e = f(0+)`` and
        ``c = f(h_t) - e``.
    """
    e = float(f.values[0])
    c = float(f.values[-1] - e)
    if not np.isfinite(c) or c <= 0:
        raise DegenerateVariogramError(f"variogram does not increase over the grid (range {c})")
    return SampledFunction(f.grid, (f.values - e) / c), c, e


def to_srvf(f) -> SrvfCurve:
    """Square-root velocity function on the unit interval.

    ``f`` may be a :class:`SampledFunction` (its abscissae are rescaled to
    ``[0, 1]``) or an array of values on a uniform grid.
    """
    values = f.values if isinstance(f, SampledFunction) else np.asarray(f, float)
    m = len(values)
    if m < 3:
        raise ParameterError("need at least 3 samples")
    t = np.linspace(0.0, 1.0, m)
    df = np.gradient(values, t, edge_order=2)
    return SrvfCurve(t, np.sign(df) * np.sqrt(np.abs(df)))


def srvf_to_curve(q, start=0.0):
    """Invert :func:`to_srvf`: ``f(t) = start + int_0^t q |q|``."""
    q = np.asarray(q, float)
    t = np.linspace(0.0, 1.0, len(q))
    integrand = q * np.abs(q)
    out = np.empty_like(q)
    out[0] = 0.0
    out[1:] = np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))
    return start + out


@functools.lru_cache(maxsize=None)
def _moves(max_step):
    moves = _dp.neighborhood(max_step)
    moves.setflags(write=False)
    return moves


def _q(curve):
    return np.ascontiguousarray(curve.q if isinstance(curve, SrvfCurve) else curve, dtype=float)


def dp_align(q_target, q_moving, max_step: int = 10):
    """Warp minimizing ``|| q_target - (q_moving o gamma) sqrt(gamma') ||^2``.

    The search runs over piecewise-linear paths on the ``m x m`` lattice
    built from coprime steps ``(di, dj)`` with ``di, dj <= max_step``.

    Parameters
    ----------
    q_target, q_moving : SrvfCurve or array_like, shape (m,)
    max_step : int
        Largest lattice step; slopes range over ``[1/max_step, max_step]``.

    Returns
    -------
    gamma : ndarray, shape (m,)
        Warp sampled on the uniform grid, ``gamma[0] = 0``, ``gamma[-1] = 1``.
        The moving curve composed with ``gamma`` approximates the target.
    cost : float
    """
    q1 = _q(q_target)
    q2 = _q(q_moving)
    m = len(q1)
    if len(q2) != m:
        raise ParameterError("curves must share a grid")
    if m < MIN_GRID:
        raise ParameterError(f"grid too coarse for alignment: m={m} < {MIN_GRID}")
    if max_step < 1:
        raise ParameterError("max_step must be at least 1")
    moves = _moves(int(max_step))
    E, P = _dp.dp_table(q1, q2, moves)
    path = _dp.backtrack(P, moves)
    t = np.linspace(0.0, 1.0, m)
    gamma = np.interp(t, path[:, 0], path[:, 1])
    gamma[0], gamma[-1] = 0.0, 1.0
    return gamma, float(E[-1, -1])


def warp_srvf(q, gamma):
    """Group action ``(q o gamma) sqrt(gamma')`` on the uniform grid."""
    t = np.linspace(0.0, 1.0, len(q))
    dg = np.gradient(gamma, t, edge_order=2)
    return np.interp(gamma, t, q) * np.sqrt(np.clip(dg, 0.0, None))


def invert_warp(gamma):
    """Inverse of a strictly increasing warp on the uniform grid."""
    t = np.linspace(0.0, 1.0, len(gamma))
    inv = np.interp(t, gamma, t)
    inv[0], inv[-1] = 0.0, 1.0
    return inv


def compose(g1, g2):
    """``g1 o g2`` for warps on the uniform grid."""
    t = np.linspace(0.0, 1.0, len(g1))
    return np.interp(g2, t, g1)


def mean_warp(gammas):
    """Mean warp on the unit sphere of square-root slopes.

    The square-root slopes ``sqrt(gamma')`` lie on the unit Hilbert sphere;
    their normalized average is mapped back to a warp.
    """
    gammas = np.atleast_2d(gammas)
    m = gammas.shape[1]
    t = np.linspace(0.0, 1.0, m)
    psi = np.sqrt(np.clip(np.gradient(gammas, t, axis=1, edge_order=2), 0.0, None))
    mu = psi.mean(axis=0)
    sq = mu ** 2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (sq[1:] + sq[:-1]) * np.diff(t))])
    if cum[-1] <= 0:
        return t.copy()
    return cum / cum[-1]


@dataclass(frozen=True)
class WarpingFunction:
    """Monotone distance warp on ``[0, h_t]``, the identity beyond it.

    Parameters
    ----------
    knots : ndarray
        Strictly increasing distances from 0 to ``h_t``.
    warped : ndarray
        Strictly increasing warped distances, pinned at 0 and ``h_t``.
    h_t : float
    bandwidth : float
        Smoothing bandwidth used to build the warp (0 when unsmoothed).
    """

    knots: np.ndarray
    warped: np.ndarray
    h_t: float
    bandwidth: float = 0.0

    def __post_init__(self):
        k = np.asarray(self.knots, float)
        w = np.asarray(self.warped, float)
        if k.shape != w.shape or k.ndim != 1 or len(k) < 2:
            raise ParameterError("knots and warped must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(k) <= 0) or np.any(np.diff(w) <= 0):
            raise ParameterError("knots and warped values must be strictly increasing")
        if k[0] != 0 or w[0] != 0 or k[-1] != self.h_t or w[-1] != self.h_t:
            raise ParameterError("warp must map 0 to 0 and h_t to h_t")
        k.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "warped", w)
        object.__setattr__(self, "h_t", float(self.h_t))

    @classmethod
    def identity(cls, h_t, m=512):
        g = np.linspace(0.0, h_t, m)
        g[-1] = h_t
        return cls(g, g.copy(), h_t)

    def __call__(self, h):
        h = np.asarray(h, float)
        out = np.interp(h, self.knots, self.warped)
        return np.where(h > self.h_t, h, out)

    def inverse(self, h):
        h = np.asarray(h, float)
        out = np.interp(h, self.warped, self.knots)
        return np.where(h > self.h_t, h, out)

    def is_identity(self, tol=0.0) -> bool:
        return bool(np.max(np.abs(self.warped - self.knots)) <= tol)

    def rows(self, m=512):
        """``(h, phi(h))`` pairs on ``m`` equally spaced distances."""
        h = np.linspace(0.0, self.h_t, m)
        return np.column_stack([h, self(h)])


def smooth_and_extend(raw_h, raw_phi, h_t, bandwidth=None, m=512) -> WarpingFunction:
    """Kernel-smooth raw warp samples and pin them to ``(0, 0)``, ``(h_t, h_t)``.

    The Nadaraya-Watson smoother (Gaussian kernel) acts on the deviation
    ``phi(h) - h``; a linear correction restores the endpoints exactly, and
    a pool-adjacent-violators projection removes any local decrease.

    Parameters
    ----------
    raw_h, raw_phi : array_like
        Raw distances and warped distances on ``[0, h_t]``.
    h_t : float
    bandwidth : float, optional
        Gaussian kernel standard deviation, ``h_t / 50`` by default.
    m : int
        Number of knots of the returned warp.
    """
    if bandwidth is None:
        bandwidth = h_t / 50.0
    if not bandwidth > 0:
        raise ParameterError("bandwidth must be positive")
    if not h_t > 0:
        raise ParameterError("h_t must be positive")
    raw_h = np.asarray(raw_h, float)
    dev = np.asarray(raw_phi, float) - raw_h

    knots = np.linspace(0.0, h_t, m)
    knots[-1] = h_t
    w = np.exp(-0.5 * ((knots[:, None] - raw_h[None, :]) / bandwidth) ** 2)
    sm = (w @ dev) / w.sum(axis=1)
    sm -= sm[0] + (sm[-1] - sm[0]) * knots / h_t
    phi = knots + sm
    phi[0], phi[-1] = 0.0, h_t

    if np.any(np.diff(phi) <= 0):
        phi = isotonic_regression(phi, y_min=0.0, y_max=h_t, increasing=True)
        if np.any(np.diff(phi) <= 0):
            # Ties left by the projection: a whisker of identity breaks them.
            eps = 1e-6
            phi = (1 - eps) * phi + eps * knots
        phi[0], phi[-1] = 0.0, h_t
    return WarpingFunction(knots, phi, h_t, float(bandwidth))


@dataclass(frozen=True)
class RegistrationResult:
    """Output of :func:`register_set`.

    Attributes
    ----------
    template : SampledFunction
        Standardized template on ``[0, h_t]``.
    warps : list of WarpingFunction
        Unsmoothed regional distance warps, ``f_i ~ c_i g(phi_i) + e_i``.
    aligned : list of SampledFunction
        Standardized curves composed with the inverse warps.
    scalings, translations : ndarray
        ``c_i`` and ``e_i``.
    gammas : ndarray, shape (k, m)
        Alignment warps on the unit interval (``f_i o gamma_i ~ g``).
    iterations : int
    converged : bool
    cost : float
        Total squared SRVF distance to the template.
    """

    template: SampledFunction
    warps: list
    aligned: list
    scalings: np.ndarray
    translations: np.ndarray
    gammas: np.ndarray
    iterations: int
    converged: bool
    cost: float


def _align_all(mu, qs, max_step):
    out = [dp_align(mu, q, max_step) for q in qs]
    return np.array([g for g, _ in out])


def _center(gammas, qs):
    gbar_inv = invert_warp(mean_warp(gammas))
    gammas = np.array([compose(g, gbar_inv) for g in gammas])
    aligned = np.array([warp_srvf(q, g) for q, g in zip(qs, gammas)])
    return gammas, aligned


def register_set(functions, max_iter=20, tol=1e-6, max_step=10) -> RegistrationResult:
    """Estimate a common template and regional warps.

    Parameters
    ----------
    functions : sequence of SampledFunction
        Variograms sampled on the same grid over ``[0, h_t]``. They are
        standardized internally.
    max_iter : int
        Maximum number of template updates.
    tol : float
        Stop once the L2 change of the template SRVF falls below ``tol``.
    max_step : int
        Lattice step bound passed to :func:`dp_align`.

    Returns
    -------
    RegistrationResult
        If the iteration does not settle (or revisits an earlier state),
        the iterate with the lowest total cost is returned with
        ``converged=False``.
    """
    functions = list(functions)
    if len(functions) < 2:
        raise ParameterError("need at least two curves")
    grid = functions[0].grid
    for f in functions[1:]:
        if f.grid.shape != grid.shape or not np.allclose(f.grid, grid, rtol=0, atol=1e-12 * grid[-1]):
            raise ParameterError("curves must share a grid")
    h_t = float(grid[-1])
    m = len(grid)
    std = [standardize(f) for f in functions]
    scal = np.array([c for _, c, _ in std])
    trans = np.array([e for _, _, e in std])
    qs = np.array([to_srvf(s).q for s, _, _ in std])

    mu = qs.mean(axis=0)
    best = None
    converged = False
    seen = []
    it = 0
    for it in range(1, max_iter + 1):
        gammas = _align_all(mu, qs, max_step)
        gammas, aligned = _center(gammas, qs)
        if any(np.array_equal(gammas, g) for g in seen):
            # Alignment is deterministic, so a repeated state means a cycle.
            logger.debug("registration cycles at iteration %d", it)
            break
        seen.append(gammas)
        new_mu = aligned.mean(axis=0)
        cost = float(np.sum(trapezoid((aligned - new_mu) ** 2, dx=1.0 / (m - 1), axis=1)))
        change = float(np.sqrt(trapezoid((new_mu - mu) ** 2, dx=1.0 / (m - 1))))
        logger.debug("registration iteration %d: change=%.3g cost=%.6g", it, change, cost)
        if best is None or cost < best[0]:
            best = (cost, gammas, new_mu, it)
        mu = new_mu
        if change < tol:
            converged = True
            best = (cost, gammas, new_mu, it)
            break

    cost, gammas, mu, best_it = best
    t = np.linspace(0.0, 1.0, m)
    template = SampledFunction(grid, srvf_to_curve(mu))
    warps, aligned = [], []
    for (s, _, _), g in zip(std, gammas):
        phi = invert_warp(g)
        warps.append(WarpingFunction(grid.copy(), _enforce_increasing(phi) * h_t, h_t))
        aligned.append(SampledFunction(grid, np.interp(g, t, s.values)))
    return RegistrationResult(
        template=template,
        warps=warps,
        aligned=aligned,
        scalings=scal,
        translations=trans,
        gammas=gammas,
        iterations=it if converged else best_it,
        converged=converged,
        cost=cost,
    )


def _enforce_increasing(phi):
    # Interpolated inverses can tie at float resolution; nudge them apart.
    phi = np.maximum.accumulate(phi)
    tiny = 1e-12
    phi = phi + tiny * np.arange(len(phi)) / (len(phi) - 1)
    phi = phi / phi[-1]
    phi[0], phi[-1] = 0.0, 1.0
    return phi


# --------------------------------------------------------------------------
# Parametric warp families used for synthetic studies


def exponential_warp(a, h_t):
    """``phi(h) = h_t (exp(a h / h_t) - 1) / (exp(a) - 1)``; identity for a = 0."""
    if a == 0:
        return WarpingFunction.identity(h_t)
    h = np.linspace(0.0, h_t, 512)
    h[-1] = h_t
    w = h_t * np.expm1(a * h / h_t) / np.expm1(a)
    w[0], w[-1] = 0.0, h_t
    return WarpingFunction(h, w, h_t)


def beta_cdf_warp(a, b, h_t, m=512):
    """``phi(h) = h_t * BetaCDF(h / h_t; a, b)``, sampled on ``m`` knots."""
    h = np.linspace(0.0, h_t, m)
    h[-1] = h_t
    w = h_t * special.betainc(a, b, h / h_t)
    w[0], w[-1] = 0.0, h_t
    return WarpingFunction(h, w, h_t)
