"""Frequentist evaluation of posterior means from a single posterior run.

Sensitivity of a posterior mean to observation weights is given by
posterior covariances (first order) and third cumulants (second order)
with the per-observation log-likelihoods.  Summing products of those
sensitivities over observations yields estimators of the frequentist
covariance of the posterior means under IID resampling:

* plain      sum_i Cov[A, l_i] Cov[B, l_i]
* centered   same with the observation-mean covariance removed
             (the form that stays consistent under strong priors)
* prior_adjusted   covariances taken against l_i + (1/n) log prior
* projected  the plain sum restricted to the principal space of W

plus the model-assessment penalties that are traces of the same
objects, a quadratic form giving the posterior shift under a
perturbation, and a diagnostic for when the centering matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    LogLikMatrix,
    LogPriorVector,
    StatMatrix,
    ThirdCumulantTensor,
    _readonly,
    posterior_cov_grid,
    third_cumulant_grid,
)
from .errors import InvalidInput
from .kernels import InfoMatrices, WMatrix
from .spectral import ProjectedLogLik, _as_eta

_ESTIMATORS = ("plain", "centered", "prior_adjusted", "projected")


@dataclass(frozen=True)
class FreqCovEstimate:
    """p x p frequentist covariance estimate for the posterior means."""

    values: np.ndarray
    estimator: str
    rank_used: int | str = "full"

    def __post_init__(self):
        arr = _readonly(self.values)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInput("covariance estimate must be square")
        if self.estimator not in _ESTIMATORS:
            raise InvalidInput(f"unknown estimator {self.estimator!r}")
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class SensitivityReport:
    """Derivatives of posterior means with respect to observation weights.

    first_order[j, i] is the derivative of statistic j's posterior mean
    in observation i's weight at unit weights; second_order, when
    present, holds the matching second derivatives as a cumulant tensor.
    """

    first_order: np.ndarray
    second_order: ThirdCumulantTensor | None = None

    def __post_init__(self):
        object.__setattr__(self, "first_order", _readonly(self.first_order))


@dataclass(frozen=True)
class PenaltyReport:
    """Effective-parameter penalties; fields are None when inputs were absent."""

    waic_penalty: float
    tic_penalty: float | None = None
    pcic_penalty: float | None = None


@dataclass(frozen=True)
class CenteringDiagnostic:
    """Covariance of each statistic with the total log-likelihood.

    ``values[j]`` is Cov[A_j, sum_i l_i (+ log prior when supplied)]: the
    quantity whose smallness justifies skipping the centering.  ``scale``
    is sum_i |Cov[A_j, l_i]|, the natural comparison magnitude.
    """

    values: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "scale", _readonly(self.scale))


def _check_paired(stats: StatMatrix, loglik: LogLikMatrix) -> None:
    if stats.n_draws != loglik.n_draws:
        raise InvalidInput(
            f"statistics have {stats.n_draws} draws, log-likelihoods have "
            f"{loglik.n_draws}"
        )


def sensitivity_first(stats: StatMatrix, loglik: LogLikMatrix) -> SensitivityReport:
    """First-order weight sensitivities: the p x n posterior covariance grid."""
    _check_paired(stats, loglik)
    grid = posterior_cov_grid(stats.values, loglik.values)
    return SensitivityReport(first_order=grid)


def sensitivity_second(stats: StatMatrix, funcs) -> ThirdCumulantTensor:
    """Second-order weight sensitivities as a third-cumulant tensor.

    ``funcs`` is an (M, a) matrix of draw values; pass log-likelihood
    columns for raw sensitivities or principal projections for the
    reduced tensor.
    """
    tensor = third_cumulant_grid(stats, np.asarray(funcs, dtype=float))
    tensor = (tensor + tensor.transpose(0, 2, 1)) / 2.0
    return ThirdCumulantTensor(values=tensor)


def freq_cov(
    stats: StatMatrix,
    loglik: LogLikMatrix,
    estimator: str = "plain",
    logprior: LogPriorVector | None = None,
    projection: ProjectedLogLik | None = None,
) -> FreqCovEstimate:
    """Frequentist covariance of the posterior means, one of four forms.

    All four are Gram sums of per-observation (or per-direction)
    sensitivity vectors and therefore symmetric PSD by construction.
    """
    if estimator not in _ESTIMATORS:
        raise InvalidInput(f"estimator must be one of {_ESTIMATORS}, got {estimator!r}")
    _check_paired(stats, loglik)

    if estimator == "projected":
        if projection is None:
            raise InvalidInput("projected estimator requires a projection")
        if projection.n_draws != stats.n_draws:
            raise InvalidInput("projection and statistics disagree on draw count")
        grid = posterior_cov_grid(stats.values, projection.projections)
        sigma = grid @ grid.T
        return FreqCovEstimate(
            values=(sigma + sigma.T) / 2.0,
            estimator=estimator,
            rank_used=projection.a_M,
        )

    if estimator == "prior_adjusted":
        if logprior is None:
            raise InvalidInput("prior_adjusted estimator requires a log-prior")
        if logprior.n_draws != loglik.n_draws:
            raise InvalidInput("log-prior and log-likelihoods disagree on draw count")
        shifted = loglik.values + logprior.values[:, None] / loglik.n_obs
        grid = posterior_cov_grid(stats.values, shifted)
    else:
        grid = posterior_cov_grid(stats.values, loglik.values)
        if estimator == "centered":
            grid = grid - grid.mean(axis=1, keepdims=True)

    sigma = grid @ grid.T
    return FreqCovEstimate(values=(sigma + sigma.T) / 2.0, estimator=estimator)


def penalties(
    loglik: LogLikMatrix,
    logprior: LogPriorVector | None = None,
    info: InfoMatrices | None = None,
) -> PenaltyReport:
    """Effective-parameter penalties from the same covariance objects.

    The variance penalty (trace of W) is always available; the
    information-matrix penalty tr(I J^{-1}) needs score information and
    the prior-corrected penalty needs the log prior at the draws.
    Missing inputs leave the corresponding field as None.
    """
    vals = loglik.values
    centered = vals - vals.mean(axis=0)
    m = loglik.n_draws
    waic = float(np.sum(centered * centered)) / m

    tic = None
    if info is not None:
        tic = float(np.trace(np.linalg.solve(info.J_hat, info.I_hat)))

    pcic = None
    if logprior is not None:
        if logprior.n_draws != m:
            raise InvalidInput("log-prior and log-likelihoods disagree on draw count")
        prior_c = logprior.values - logprior.values.mean()
        # cov of each column with itself plus (1/n) log prior, summed over i
        pcic = waic + float(np.sum(centered * prior_c[:, None])) / (m * loglik.n_obs)

    return PenaltyReport(waic_penalty=waic, tic_penalty=tic, pcic_penalty=pcic)


def kl_quadratic(w_matrix: WMatrix, eta) -> float:
    """Quadratic approximation of the posterior shift under a perturbation.

    Half the quadratic form of the perturbation vector in W; this
    approximates the KL divergence from the unperturbed posterior to the
    one with observation weights 1 + eta.
    """
    eta = _as_eta(eta, w_matrix.n)
    return 0.5 * float(eta @ w_matrix.values @ eta)


def centering_diagnostic(
    stats: StatMatrix,
    loglik: LogLikMatrix,
    logprior: LogPriorVector | None = None,
) -> CenteringDiagnostic:
    """How far each statistic is from the zero-sum sensitivity relation.

    Reports Cov[A_j, sum_i l_i], with the log prior added to the sum
    when given (the prior-adjusted relation is centered at the MAP
    rather than the MLE).  Values small against ``scale`` mean the plain
    and centered covariance estimators agree.
    """
    _check_paired(stats, loglik)
    grid = posterior_cov_grid(stats.values, loglik.values)
    scale = np.sum(np.abs(grid), axis=1)
    total = grid.sum(axis=1)
    if logprior is not None:
        if logprior.n_draws != loglik.n_draws:
            raise InvalidInput("log-prior and log-likelihoods disagree on draw count")
        prior_grid = posterior_cov_grid(
            stats.values, logprior.values.reshape(-1, 1)
        )[:, 0]
        total = total + prior_grid
    return CenteringDiagnostic(values=total, scale=scale)
