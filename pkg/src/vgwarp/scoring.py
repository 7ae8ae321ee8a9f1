"""Proper scores for Gaussian predictive distributions."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .exceptions import ParameterError

_INV_SQRT_PI = 1.0 / np.sqrt(np.pi)


def _pair(preds, truths):
    p = np.asarray(preds, float)
    t = np.asarray(truths, float)
    if p.shape != t.shape:
        raise ParameterError("predictions and truths differ in shape")
    if p.size == 0:
        raise ParameterError("empty input")
    return p, t


def mspe(preds, truths) -> float:
    """Mean squared prediction error."""
    p, t = _pair(preds, truths)
    return float(np.mean((p - t) ** 2))


def mae(preds, truths) -> float:
    """Mean absolute error."""
    p, t = _pair(preds, truths)
    return float(np.mean(np.abs(p - t)))


def crps_gaussian(mean, sd, truth):
    """Continuous ranked probability score of ``N(mean, sd**2)`` at ``truth``.

    Lower is better. A nonpositive ``sd`` is treated as a point forecast,
    whose score is ``|truth - mean|``.
    """
    mean, sd, truth = np.broadcast_arrays(*(np.asarray(a, float) for a in (mean, sd, truth)))
    scalar = mean.ndim == 0
    mean, sd, truth = (np.atleast_1d(a) for a in (mean, sd, truth))
    out = np.abs(truth - mean)
    ok = sd > 0
    z = (truth[ok] - mean[ok]) / sd[ok]
    out[ok] = sd[ok] * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - _INV_SQRT_PI)
    return float(out[0]) if scalar else out


def logs_gaussian(mean, sd, truth):
    """Negative log predictive density of ``N(mean, sd**2)`` at ``truth``."""
    mean, sd, truth = np.broadcast_arrays(*(np.asarray(a, float) for a in (mean, sd, truth)))
    if np.any(sd <= 0):
        raise ParameterError("logarithmic score needs a positive standard deviation")
    out = 0.5 * np.log(2 * np.pi * sd ** 2) + (truth - mean) ** 2 / (2 * sd ** 2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ScoreReport:
    model: str
    mspe: float
    mae: float
    crps: float
    logs: float
    n_test: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def score_report(model, mean, sd, truth) -> ScoreReport:
    """Average all four scores over a test set."""
    mean, truth = _pair(mean, truth)
    sd = np.asarray(sd, float)
    return ScoreReport(
        model=str(model),
        mspe=mspe(mean, truth),
        mae=mae(mean, truth),
        crps=float(np.mean(crps_gaussian(mean, sd, truth))),
        logs=float(np.mean(logs_gaussian(mean, sd, truth))),
        n_test=int(truth.size),
    )
