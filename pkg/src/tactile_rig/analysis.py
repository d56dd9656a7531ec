"""Offline 2AFC analysis: per-distance accuracy and psychometric threshold.

The psychometric model is the standard two-alternative logistic with the
guess rate fixed at 0.5 and no lapse:

    p(x) = 0.5 + 0.5 / (1 + exp(-slope * (x - threshold)))

so the threshold parameter is directly the separation at 75% correct.  The
fit maximizes the binomial likelihood with a coarse grid start followed by
local refinement.  When the data cannot locate a 75% point inside the tested
range (e.g. a participant answering at chance), the fit refuses rather than
extrapolate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .records import TrialRecord
from .scheduler import TrialLabel

NLL_TOLERANCE = 1e-9
TARGET_PROPORTION = 0.75


class AnalysisError(Exception):
    pass


class FitDegenerateError(AnalysisError):
    """The data carry no usable threshold information; nothing is fabricated."""


@dataclass(frozen=True)
class DistanceStats:
    distance: float  # m
    n: int
    n_correct: int

    @property
    def proportion(self) -> float:
        return self.n_correct / self.n


@dataclass(frozen=True)
class PsychometricFit:
    threshold: float  # m, separation at 75% correct
    slope: float  # 1/m
    nll: float

    def predict(self, x: float) -> float:
        z = min(500.0, max(-500.0, -self.slope * (x - self.threshold)))
        return 0.5 + 0.5 / (1.0 + math.exp(z))


@dataclass(frozen=True)
class PsychometricSummary:
    per_distance: list[DistanceStats]
    fit: PsychometricFit | None
    fit_error: str | None = None


def proportion_correct(
    records: list[TrialRecord], warn=None
) -> list[DistanceStats]:
    """Per-distance accuracy over real trials; training trials are excluded.

    ``warn`` is called with a message for any configured distance that ends
    up with zero real trials (it is omitted from the result).
    """
    by_distance: dict[float, list[TrialRecord]] = {}
    for r in records:
        if r.label is TrialLabel.TRAINING:
            continue
        by_distance.setdefault(r.distance, []).append(r)

    stats = []
    for distance in sorted(by_distance):
        group = by_distance[distance]
        if not group:
            if warn:
                warn(f"distance {distance} has no real trials; omitted")
            continue
        stats.append(
            DistanceStats(
                distance=distance,
                n=len(group),
                n_correct=sum(1 for r in group if r.correct),
            )
        )
    return stats


def _nll(threshold: float, slope: float, x, n, k) -> float:
    z = -slope * (x - threshold)
    # Clamp to keep exp() finite; beyond +-500 the probability saturates anyway.
    z = np.clip(z, -500.0, 500.0)
    p = 0.5 + 0.5 / (1.0 + np.exp(z))
    eps = np.finfo(float).eps
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.sum(k * np.log(p) + (n - k) * np.log(1.0 - p)))


def fit_psychometric(stats: list[DistanceStats]) -> PsychometricFit:
    """Maximum-likelihood fit of the 2AFC logistic.

    Needs data at three or more distances.  Raises
    :class:`FitDegenerateError` when the fitted 75% point falls outside the
    tested distances or the fitted curve is flat across them.
    """
    if len(stats) < 3:
        raise AnalysisError(f"need >= 3 distances with data, got {len(stats)}")

    x = np.array([s.distance for s in stats])
    n = np.array([s.n for s in stats], dtype=float)
    k = np.array([s.n_correct for s in stats], dtype=float)

    lo, hi = float(x.min()), float(x.max())
    span = hi - lo
    if span <= 0:
        raise AnalysisError("distances are not distinct")

    # Work in span-relative units so the fit is scale equivariant.  The
    # log-slope is capped: anything steeper is numerically a step already.
    def nll_scaled(params) -> float:
        alpha_u, log_beta_u = params
        beta = math.exp(min(log_beta_u, 50.0)) / span
        return _nll(lo + alpha_u * span, beta, x, n, k)

    best = None
    for alpha_u in np.linspace(0.0, 1.0, 21):
        for log_beta_u in np.log([0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]):
            value = nll_scaled((alpha_u, log_beta_u))
            if best is None or value < best[1]:
                best = ((alpha_u, log_beta_u), value)

    assert best is not None
    result = optimize.minimize(
        nll_scaled,
        best[0],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": NLL_TOLERANCE, "maxiter": 4000},
    )
    alpha_u, log_beta_u = result.x
    fit = PsychometricFit(
        threshold=lo + float(alpha_u) * span,
        slope=math.exp(min(float(log_beta_u), 50.0)) / span,
        nll=float(result.fun),
    )

    if not (lo <= fit.threshold <= hi):
        raise FitDegenerateError(
            f"75% point {fit.threshold:.6g} m falls outside the tested range "
            f"[{lo:.6g}, {hi:.6g}] m"
        )
    if fit.predict(hi) - fit.predict(lo) < 0.1:
        raise FitDegenerateError("fitted curve is flat across the tested range")
    return fit


def summarize(records: list[TrialRecord], warn=None) -> PsychometricSummary:
    """Accuracy table plus a threshold fit when the data support one."""
    stats = proportion_correct(records, warn=warn)
    fit = None
    fit_error = None
    try:
        fit = fit_psychometric(stats)
    except AnalysisError as exc:
        fit_error = str(exc)
    return PsychometricSummary(per_distance=stats, fit=fit, fit_error=fit_error)
