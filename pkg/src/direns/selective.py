"""Variance-based selective classification.

Each sample carries a scalar abstention score, the total predictive
variance of its fitted Dirichlet.  A threshold tau is calibrated on held
out data: samples are sorted by variance, and tau becomes the variance of
the last sample in the largest tie-closed prefix whose empirical risk
(error rate) stays at or below the target r.  The decision rule then
predicts the argmax of the predictive mean when variance <= tau and
abstains otherwise, so every sample with the same score receives the same
decision.

Also provided: risk-coverage curves (one point per distinct variance
value), correctness-conditioned variance histograms on log-spaced bins,
and retained-set metrics after applying a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calibration import LabeledPrediction, correctness, metrics
from .dirichlet import DirichletParams, ProbabilityVector, total_variance

__all__ = [
    "ScoredSample",
    "ThresholdCalibration",
    "RiskCoveragePoint",
    "SubsetMetrics",
    "SelectiveReport",
    "score",
    "calibrate_threshold",
    "decide",
    "risk_coverage_curve",
    "variance_histograms",
    "variance_bin_edges",
    "selective_report",
    "DEFAULT_TARGET_RISK",
]

DEFAULT_TARGET_RISK = 0.1

ABSTAIN_TAU = float("-inf")


@dataclass
class ScoredSample:
    """A labeled prediction plus its scalar abstention score."""

    sample_id: str
    mean: ProbabilityVector
    variance: float
    label: int

    def __post_init__(self) -> None:
        if not isinstance(self.mean, ProbabilityVector):
            self.mean = ProbabilityVector(np.asarray(self.mean, dtype=np.float64))
        self.sample_id = str(self.sample_id)
        self.variance = float(self.variance)
        if not (math.isfinite(self.variance) and self.variance >= 0.0):
            raise ValueError("variance must be finite and nonnegative")
        self.label = int(self.label)
        if not 0 <= self.label < self.mean.p.size:
            raise ValueError(f"label {self.label} out of range for K={self.mean.p.size}")


@dataclass
class ThresholdCalibration:
    """A calibrated variance threshold and how it performed on the calibration set."""

    tau: float
    target_risk: float
    achieved_cal_risk: float
    cal_coverage: float


@dataclass
class RiskCoveragePoint:
    """One operating point of a risk-coverage curve."""

    coverage: float
    risk: float
    tau_at_point: float


@dataclass
class SubsetMetrics:
    """Metrics on a (possibly empty) subset; values are absent when n = 0."""

    n: int
    accuracy: Optional[float]
    macro_f1: Optional[float]
    nll: Optional[float]


@dataclass
class SelectiveReport:
    """Per-sample decisions plus metrics before and after abstention."""

    decisions: list
    retained_metrics: SubsetMetrics
    full_metrics: SubsetMetrics


def score(d: DirichletParams) -> float:
    """Abstention score of a fitted Dirichlet: its total predictive variance."""
    return total_variance(d)


def _sorted_groups(samples: Sequence[ScoredSample]):
    # Ascending by variance with sample_id as the deterministic tiebreak,
    # then grouped so ties are always treated as one block.
    ordered = sorted(samples, key=lambda s: (s.variance, s.sample_id))
    groups = []
    for s in ordered:
        if groups and groups[-1][0] == s.variance:
            groups[-1][1].append(s)
        else:
            groups.append((s.variance, [s]))
    return groups


def calibrate_threshold(cal: Sequence[ScoredSample], r: float = DEFAULT_TARGET_RISK) -> ThresholdCalibration:
    """Pick the largest variance threshold whose closed prefix risks at most r.

    Sweeps tie-closed prefixes of the variance-sorted calibration set and
    keeps the largest one with empirical risk <= r; tau is the variance of
    its last sample.  When even the lowest-variance block is too risky,
    tau becomes -inf (abstain on everything) with zero coverage.
    """
    if not cal:
        raise ValueError("calibration set must be nonempty")
    if not (0.0 < r < 1.0):
        raise ValueError(f"target risk must lie in (0, 1), got {r}")
    total = len(cal)
    kept = 0
    errors = 0
    best: Optional[tuple[float, int, int]] = None
    for variance, block in _sorted_groups(cal):
        kept += len(block)
        errors += sum(1 - correctness(s.mean, s.label) for s in block)
        # Compare the realized ratio so the reported risk is <= r bit-exactly.
        if errors / kept <= r:
            best = (variance, kept, errors)
    if best is None:
        return ThresholdCalibration(
            tau=ABSTAIN_TAU, target_risk=r, achieved_cal_risk=0.0, cal_coverage=0.0
        )
    tau, kept, errors = best
    return ThresholdCalibration(
        tau=tau,
        target_risk=r,
        achieved_cal_risk=errors / kept,
        cal_coverage=kept / total,
    )


def decide(s: ScoredSample, tau: float) -> Optional[int]:
    """Predict the argmax mean class when variance <= tau, else abstain (None)."""
    if s.variance <= tau:
        return int(np.argmax(s.mean.p))
    return None


def risk_coverage_curve(test: Sequence[ScoredSample]) -> list[RiskCoveragePoint]:
    """Risk and coverage at every distinct variance threshold of the set.

    Coverage is strictly increasing along the output since each distinct
    variance adds at least one retained sample.
    """
    if not test:
        raise ValueError("test set must be nonempty")
    total = len(test)
    kept = 0
    errors = 0
    points = []
    for variance, block in _sorted_groups(test):
        kept += len(block)
        errors += sum(1 - correctness(s.mean, s.label) for s in block)
        points.append(
            RiskCoveragePoint(coverage=kept / total, risk=errors / kept, tau_at_point=variance)
        )
    return points


def variance_bin_edges(test: Sequence[ScoredSample], bins: int) -> np.ndarray:
    """Log10-spaced bin edges spanning the positive variances of the set."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    positive = [s.variance for s in test if s.variance > 0.0]
    if not positive:
        return np.zeros(bins + 1)
    lo, hi = min(positive), max(positive)
    if lo == hi:
        return np.full(bins + 1, lo)
    return np.logspace(math.log10(lo), math.log10(hi), bins + 1)


def variance_histograms(
    test: Sequence[ScoredSample], bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Variance counts on log-spaced bins, split by correctness.

    Zero variances land in the lowest bin, as does everything when the
    positive variances span no range at all.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    if not test:
        raise ValueError("test set must be nonempty")
    positive = [s.variance for s in test if s.variance > 0.0]
    hist_correct = np.zeros(bins, dtype=np.int64)
    hist_incorrect = np.zeros(bins, dtype=np.int64)
    if positive:
        lo, hi = min(positive), max(positive)
        span = math.log10(hi) - math.log10(lo) if hi > lo else 0.0
    else:
        lo, span = 0.0, 0.0
    for s in test:
        if s.variance <= lo or span == 0.0:
            idx = 0
        else:
            idx = min(bins - 1, int((math.log10(s.variance) - math.log10(lo)) / span * bins))
        target = hist_correct if correctness(s.mean, s.label) else hist_incorrect
        target[idx] += 1
    return hist_correct, hist_incorrect


def _subset_metrics(samples: Sequence[ScoredSample]) -> SubsetMetrics:
    if not samples:
        return SubsetMetrics(n=0, accuracy=None, macro_f1=None, nll=None)
    preds = [
        LabeledPrediction(mean=s.mean, label=s.label, sample_id=s.sample_id) for s in samples
    ]
    accuracy, macro_f1, nll = metrics(preds)
    return SubsetMetrics(n=len(samples), accuracy=accuracy, macro_f1=macro_f1, nll=nll)


def selective_report(test: Sequence[ScoredSample], tau: float) -> SelectiveReport:
    """Apply a threshold to a test set and compare full vs retained metrics."""
    if not test:
        raise ValueError("test set must be nonempty")
    decisions = [(s.sample_id, decide(s, tau)) for s in test]
    retained = [s for s in test if s.variance <= tau]
    return SelectiveReport(
        decisions=decisions,
        retained_metrics=_subset_metrics(retained),
        full_metrics=_subset_metrics(list(test)),
    )
