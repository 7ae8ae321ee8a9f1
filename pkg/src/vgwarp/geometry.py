"""Rectangular partitions of a spatial domain and segment/region bookkeeping.

A partition is a list of axis-aligned boxes that tile a bounding box. The
global distance between two sites weights each regional warp by the share of
the straight segment between them that falls inside that region; this module
computes those shares.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError

_CHUNK = 16384


@dataclass(frozen=True)
class Partition:
    """Axis-aligned boxes covering a rectangular domain.

    Parameters
    ----------
    boxes : array_like, shape (k, d, 2)
        ``boxes[i, a] = (lower, upper)`` of region ``i`` along axis ``a``.
        Regions may share boundaries but must not overlap otherwise, and
        their union must equal the bounding box.
    """

    boxes: np.ndarray
    domain_box: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        boxes = np.array(self.boxes, dtype=float)
        if boxes.ndim == 2 and boxes.shape[1] == 2:
            boxes = boxes[None]
        if boxes.ndim != 3 or boxes.shape[2] != 2 or boxes.shape[0] < 1:
            raise ValueError("boxes must have shape (k, d, 2)")
        if not np.all(np.isfinite(boxes)):
            raise ValueError("box bounds must be finite")
        widths = boxes[:, :, 1] - boxes[:, :, 0]
        if np.any(widths <= 0):
            raise ValueError("every region must have positive volume")
        domain = np.stack([boxes[:, :, 0].min(0), boxes[:, :, 1].max(0)], axis=1)

        # Pairwise overlap volume must vanish and volumes must add up.
        vol = np.prod(widths, axis=1)
        lo = np.maximum(boxes[:, None, :, 0], boxes[None, :, :, 0])
        hi = np.minimum(boxes[:, None, :, 1], boxes[None, :, :, 1])
        overlap = np.prod(np.clip(hi - lo, 0, None), axis=2)
        np.fill_diagonal(overlap, 0.0)
        total = np.prod(domain[:, 1] - domain[:, 0])
        if np.any(overlap > 1e-12 * total):
            raise ValueError("regions overlap")
        if abs(vol.sum() - total) > 1e-9 * total:
            raise ValueError("regions do not cover the bounding box")
        boxes.setflags(write=False)
        domain.setflags(write=False)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "domain_box", domain)

    @property
    def k(self) -> int:
        return self.boxes.shape[0]

    @property
    def ndim(self) -> int:
        return self.boxes.shape[1]

    @classmethod
    def from_splits(cls, x_edges, y_edges) -> "Partition":
        """Grid partition from sorted edge coordinates, row-major in x then y."""
        x_edges = np.asarray(x_edges, float)
        y_edges = np.asarray(y_edges, float)
        boxes = [
            [[x_edges[i], x_edges[i + 1]], [y_edges[j], y_edges[j + 1]]]
            for i in range(len(x_edges) - 1)
            for j in range(len(y_edges) - 1)
        ]
        return cls(np.array(boxes))

    def to_list(self) -> list:
        return self.boxes.tolist()

    def contains(self, points) -> np.ndarray:
        """Boolean mask of shape (n, k): point inside closed region box."""
        p = np.atleast_2d(np.asarray(points, float))
        lo = self.boxes[None, :, :, 0]
        hi = self.boxes[None, :, :, 1]
        return np.all((p[:, None, :] >= lo) & (p[:, None, :] <= hi), axis=2)

    def regions_of(self, points) -> np.ndarray:
        """Vectorised :func:`region_of`."""
        inside = self.contains(points)
        hit = inside.any(axis=1)
        if not np.all(hit):
            bad = np.atleast_2d(np.asarray(points, float))[~hit]
            raise DomainError(f"{len(bad)} point(s) outside the domain, e.g. {bad[0].tolist()}")
        return np.argmax(inside, axis=1)


def region_of(p, part: Partition) -> int:
    """Index of the region containing ``p``.

    Points on a shared boundary go to the region with the smallest index.
    """
    return int(part.regions_of(np.asarray(p, float)[None])[0])


def _clip_intervals(s, s2, boxes):
    """Parametric interval [t_lo, t_hi] of segment s + t (s2 - s) in each box.

    Returns arrays of shape (n, k); empty intersections have t_lo > t_hi.
    """
    d = s2 - s
    # Tiny steps overflow to +-inf, which is the right parametric limit.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t0 = (boxes[None, :, :, 0] - s[:, None, :]) / d[:, None, :]
        t1 = (boxes[None, :, :, 1] - s[:, None, :]) / d[:, None, :]
    enter = np.minimum(t0, t1)
    leave = np.maximum(t0, t1)
    # Axes along which the segment does not move: inside the slab or not.
    flat = d[:, None, :] == 0
    inside = (s[:, None, :] >= boxes[None, :, :, 0]) & (s[:, None, :] <= boxes[None, :, :, 1])
    enter = np.where(flat, np.where(inside, -np.inf, np.inf), enter)
    leave = np.where(flat, np.where(inside, np.inf, -np.inf), leave)
    t_lo = np.clip(enter.max(axis=2), 0.0, 1.0)
    t_hi = np.clip(leave.min(axis=2), 0.0, 1.0)
    return t_lo, t_hi


def segment_fractions(s, s2, part: Partition) -> np.ndarray:
    """Fraction of each segment ``[s_j, s2_j]`` lying in every region.

    The segment is cut at every box entry/exit parameter; each elementary
    piece is attributed to the region containing its midpoint (lowest index
    on ties), so pieces on shared faces are never double counted.

    Parameters
    ----------
    s, s2 : array_like, shape (n, d)

    Returns
    -------
    ndarray, shape (n, k)
        Rows sum to one for non-degenerate segments and to zero when
        ``s_j == s2_j``.
    """
    s = np.atleast_2d(np.asarray(s, float))
    s2 = np.atleast_2d(np.asarray(s2, float))
    n = s.shape[0]
    out = np.zeros((n, part.k))
    for start in range(0, n, _CHUNK):
        sl = slice(start, start + _CHUNK)
        out[sl] = _fractions_chunk(s[sl], s2[sl], part)
    return out


def _fractions_chunk(s, s2, part):
    n, k = s.shape[0], part.k
    t_lo, t_hi = _clip_intervals(s, s2, part.boxes)
    valid = t_hi >= t_lo
    cuts = np.concatenate(
        [np.zeros((n, 1)), np.where(valid, t_lo, 0.0), np.where(valid, t_hi, 0.0), np.ones((n, 1))],
        axis=1,
    )
    cuts.sort(axis=1)
    widths = np.diff(cuts, axis=1)
    mids = 0.5 * (cuts[:, 1:] + cuts[:, :-1])
    pts = s[:, None, :] + mids[..., None] * (s2 - s)[:, None, :]
    m = pts.shape[1]
    inside = part.contains(pts.reshape(-1, part.ndim)).reshape(n, m, k)
    owner = np.argmax(inside, axis=2)
    if not np.all(inside.any(axis=2) | (widths == 0)):
        raise DomainError("segment leaves the partitioned domain")
    frac = np.zeros((n, k))
    rows = np.repeat(np.arange(n), m)
    np.add.at(frac, (rows, owner.ravel()), widths.ravel())
    degenerate = np.all(s == s2, axis=1)
    frac[degenerate] = 0.0
    return frac


def _check_in_domain(p, part):
    p = np.asarray(p, float)
    dom = part.domain_box
    if p.shape != (part.ndim,) or not np.all(np.isfinite(p)):
        raise DomainError(f"location must be a finite vector of length {part.ndim}")
    if np.any(p < dom[:, 0]) or np.any(p > dom[:, 1]):
        raise DomainError(f"location {p.tolist()} outside the domain")
    return p


def segment_lengths(s, s2, part: Partition) -> list[tuple[int, float]]:
    """Decompose the segment between ``s`` and ``s2`` by region.

    Returns
    -------
    list of (region_id, length)
        Regions with zero overlap are omitted. Coincident points give an
        empty list.
    """
    s = _check_in_domain(s, part)
    s2 = _check_in_domain(s2, part)
    length = float(np.linalg.norm(s - s2))
    if length == 0.0:
        return []
    frac = segment_fractions(s[None], s2[None], part)[0]
    return [(int(i), float(frac[i] * length)) for i in np.flatnonzero(frac > 0)]


def weights(s, s2, part: Partition) -> list[tuple[int, float]]:
    """Location-dependent region weights: piece length over segment length."""
    s = _check_in_domain(s, part)
    s2 = _check_in_domain(s2, part)
    if np.all(s == s2):
        raise DomainError("weights are undefined for coincident locations")
    frac = segment_fractions(s[None], s2[None], part)[0]
    return [(int(i), float(frac[i])) for i in np.flatnonzero(frac > 0)]
