"""Dirichlet parameter estimation from ensembles of simplex points.

Given M probability vectors for one input, treated as i.i.d. draws from an
unknown Dirichlet, two estimators are provided.

Method of moments: match the empirical mean mu_k and unbiased variance
sigma2_k of each class to the Dirichlet moments.  Each class with
0 < mu_k (1 - mu_k) / sigma2_k - 1 < inf contributes a total-concentration
estimate; their average gives alpha0_hat, and alpha_k = mu_k * alpha0_hat.
When no class qualifies (zero spread, or spread too large for any positive
solution) the result is flagged degenerate and alpha0 is set to a cap.

Fixed-point MLE: starting from an initial guess (typically the moment fit),
iterate alpha_k <- psi^-1(psi(alpha_0) + lbar_k) with lbar_k the mean log
probability of class k.  Each sweep is a monotone step on the Dirichlet
log-likelihood, so the likelihood never decreases along the iteration.

``fit_batch`` applies either estimator across many inputs, optionally in
parallel, with output order guaranteed to match input order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .dirichlet import DirichletParams
from .specfun import digamma, inverse_digamma

__all__ = [
    "EnsembleSample",
    "MomentSummary",
    "FitResult",
    "moments",
    "fit_mom",
    "fit_mle",
    "fit_batch",
    "DEFAULT_ALPHA0_CAP",
    "DEFAULT_MAX_ITER",
    "DEFAULT_EPS",
    "DEFAULT_P_FLOOR",
    "THREADS_ENV_VAR",
]

DEFAULT_ALPHA0_CAP = 1e6
DEFAULT_MAX_ITER = 20
DEFAULT_EPS = 1e-8
DEFAULT_P_FLOOR = 1e-12
THREADS_ENV_VAR = "DIRENS_THREADS"

# Keeps fitted concentrations strictly positive when a class has exact
# zero empirical mean; far below any statistically meaningful scale.
_ALPHA_FLOOR = 1e-300

_ROW_SUM_TOL = 1e-6


@dataclass
class EnsembleSample:
    """M >= 2 probability vectors of dimension K for a single input."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise ValueError("probs must be a 2-D array, one simplex point per row")
        m, k = probs.shape
        if m < 2:
            raise ValueError("an ensemble needs at least 2 members")
        if k < 2:
            raise ValueError("an ensemble needs at least 2 classes")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("every probability must lie in [0, 1]")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > _ROW_SUM_TOL):
            raise ValueError(f"every row must sum to 1 within {_ROW_SUM_TOL}")
        self.probs = probs

    @property
    def m(self) -> int:
        return int(self.probs.shape[0])

    @property
    def k(self) -> int:
        return int(self.probs.shape[1])


@dataclass
class MomentSummary:
    """Empirical mean, unbiased variance, and the usable class set."""

    mu: np.ndarray
    sigma2: np.ndarray
    valid_classes: np.ndarray


@dataclass
class FitResult:
    """Fitted parameters plus estimator diagnostics.

    ``degenerate`` marks a moment fit that fell back to the configured
    total-concentration cap.  ``iterations_used`` and ``converged`` are
    populated by the MLE refinement only; ``alpha_path`` holds the
    parameter trajectory when the refinement was asked to record it.
    """

    params: DirichletParams
    degenerate: bool
    iterations_used: Optional[int] = None
    converged: Optional[bool] = None
    alpha_path: Optional[list] = field(default=None, repr=False)


SampleLike = Union[EnsembleSample, np.ndarray, list, tuple]


def _as_sample(s: SampleLike) -> EnsembleSample:
    return s if isinstance(s, EnsembleSample) else EnsembleSample(np.asarray(s, dtype=np.float64))


def _class_alpha0(mu: np.ndarray, sigma2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    with np.errstate(divide="ignore", invalid="ignore"):
        per_class = mu * (1.0 - mu) / sigma2 - 1.0
    valid = np.isfinite(per_class) & (per_class > 0.0)
    return per_class, np.flatnonzero(valid)


def moments(s: SampleLike) -> MomentSummary:
    """Per-class empirical mean and unbiased variance of an ensemble."""
    sample = _as_sample(s)
    mu = sample.probs.mean(axis=0)
    sigma2 = sample.probs.var(axis=0, ddof=1)
    # Rounding in the mean can leave a ~1e-32 residue on columns whose
    # members agree bitwise; their spread is zero by definition.
    sigma2[np.all(sample.probs == sample.probs[0], axis=0)] = 0.0
    _, valid = _class_alpha0(mu, sigma2)
    return MomentSummary(mu=mu, sigma2=sigma2, valid_classes=valid)


def fit_mom(s: SampleLike, alpha0_cap: float = DEFAULT_ALPHA0_CAP) -> FitResult:
    """Method-of-moments Dirichlet fit of one ensemble.

    Averages the per-class total-concentration estimates over the classes
    where one exists and scales the empirical mean by the result.  With no
    usable class the fit is flagged degenerate and the cap is used as the
    total concentration instead.
    """
    if not (math.isfinite(alpha0_cap) and alpha0_cap > 0.0):
        raise ValueError("alpha0_cap must be finite and > 0")
    sample = _as_sample(s)
    summary = moments(sample)
    mu = summary.mu
    per_class, valid = _class_alpha0(mu, summary.sigma2)
    if valid.size == 0:
        alpha0 = float(alpha0_cap)
        degenerate = True
    else:
        alpha0 = float(per_class[valid].mean())
        degenerate = False
    alpha = np.maximum(mu * alpha0, _ALPHA_FLOOR)
    return FitResult(params=DirichletParams(alpha), degenerate=degenerate)


def fit_mle(
    s: SampleLike,
    init: DirichletParams,
    max_iter: int = DEFAULT_MAX_ITER,
    eps: float = DEFAULT_EPS,
    p_floor: float = DEFAULT_P_FLOOR,
    keep_path: bool = False,
) -> FitResult:
    """Fixed-point maximum-likelihood refinement of a Dirichlet fit.

    Iterates alpha_k <- psi^-1(psi(alpha_0) + lbar_k) until the update
    moves the parameter vector by less than ``eps`` in relative Euclidean
    norm or ``max_iter`` sweeps are exhausted.  Probabilities are floored
    at ``p_floor`` before taking logs so stored zeros stay finite.
    """
    sample = _as_sample(s)
    if init.k != sample.k:
        raise ValueError("init dimension does not match the ensemble")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not (eps > 0.0 and p_floor > 0.0):
        raise ValueError("eps and p_floor must be > 0")
    lbar = np.log(np.maximum(sample.probs, p_floor)).mean(axis=0)
    alpha = init.alpha.copy()
    path = [alpha.copy()] if keep_path else None
    converged = False
    used = max_iter
    for it in range(1, max_iter + 1):
        psi0 = digamma(float(math.fsum(alpha.tolist())))
        new = np.array([inverse_digamma(psi0 + lb) for lb in lbar.tolist()])
        step = float(np.linalg.norm(new - alpha))
        scale = float(np.linalg.norm(alpha))
        alpha = new
        if path is not None:
            path.append(alpha.copy())
        if step < eps * scale:
            converged = True
            used = it
            break
    return FitResult(
        params=DirichletParams(alpha),
        degenerate=False,
        iterations_used=used,
        converged=converged,
        alpha_path=path,
    )


def default_thread_count() -> int:
    """Worker count for batch fitting, overridable via DIRENS_THREADS."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be >= 1, got {n}")
    return n


def fit_batch(
    samples: Sequence[SampleLike],
    mode: str = "mom",
    *,
    alpha0_cap: float = DEFAULT_ALPHA0_CAP,
    max_iter: int = DEFAULT_MAX_ITER,
    eps: float = DEFAULT_EPS,
    p_floor: float = DEFAULT_P_FLOOR,
    n_threads: Optional[int] = None,
) -> list[FitResult]:
    """Fit every ensemble in a list, preserving input order.

    ``mode`` is "mom" or "mom_then_mle"; the latter refines each
    non-degenerate moment fit with the fixed-point MLE (degenerate fits
    are returned as-is, since identical ensemble members make the
    likelihood unbounded).  Fits are pure per input, so running them on a
    thread pool cannot change the results, only the wall time.
    """
    if mode not in ("mom", "mom_then_mle"):
        raise ValueError('mode must be "mom" or "mom_then_mle"')
    ensembles = [_as_sample(s) for s in samples]
    if not ensembles:
        return []
    k = ensembles[0].k
    for i, e in enumerate(ensembles):
        if e.k != k:
            raise ValueError(f"dimension mismatch: sample 0 has K={k}, sample {i} has K={e.k}")

    def fit_one(sample: EnsembleSample) -> FitResult:
        result = fit_mom(sample, alpha0_cap)
        if mode == "mom_then_mle" and not result.degenerate:
            return fit_mle(sample, result.params, max_iter=max_iter, eps=eps, p_floor=p_floor)
        return result

    workers = default_thread_count() if n_threads is None else int(n_threads)
    if workers < 1:
        raise ValueError("n_threads must be >= 1")
    if workers == 1 or len(ensembles) == 1:
        return [fit_one(e) for e in ensembles]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fit_one, ensembles))
