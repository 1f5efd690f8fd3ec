"""Entropy-rate utilities for Gauss-Markov noise.

All entropies are in nats. Two conventions coexist on purpose:

* the AR(1) and block rates use the complex-sample form
  ``log(2 e pi sigma2) + (1/n) log det(C / sigma2)``;
* the AR(2) rate is reported in the real form
  ``0.5 log(2 pi e sigma2) + (1/(2n)) log det(C / sigma2)``, with the
  complex form available as ``EntropyReport.complex_rate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError


@dataclass(frozen=True)
class EntropyReport:
    rate: float
    correlation_term: float
    white_baseline: float
    complex_rate: float | None = None


def yule_walker_ar2(rho1: float, rho2: float) -> tuple[float, float, float]:
    """AR(2) coefficients and normalised innovation variance from lag-1/2 correlations."""
    denom = 1.0 - rho1**2
    beta1 = rho1 * (1.0 - rho2) / denom
    beta2 = (rho2 - rho1**2) / denom
    explained = (rho1**2 + rho2**2 - 2 * rho1**2 * rho2) / denom
    return beta1, beta2, 1.0 - explained


def ar2_validity(rho1: float, rho2: float) -> bool:
    """Whether ``(rho1, rho2)`` are the lag correlations of a stationary AR(2).

    Requires ``rho1^2 < (rho2 + 1) / 2`` and an explained-variance fraction in
    ``[0, 1)``. Zero is allowed so that white noise counts as valid.
    """
    if not (rho1**2 < 1.0):
        return False
    if not (rho1**2 < (rho2 + 1.0) / 2.0):
        return False
    explained = (rho1**2 + rho2**2 - 2 * rho1**2 * rho2) / (1.0 - rho1**2)
    return 0.0 <= explained < 1.0


def gm1_entropy_rate(rho: float, sigma2: float, n: int) -> EntropyReport:
    if not (0.0 <= rho < 1.0):
        raise ParameterError(f"rho must lie in [0, 1), got {rho}")
    if n < 1:
        raise ParameterError("n must be at least 1")
    return _block_report(rho, sigma2, n)


def block_entropy_rate(rho: float, sigma2: float, b: int) -> EntropyReport:
    """Rate when only correlations inside blocks of ``b`` samples are kept."""
    if b < 1:
        raise ParameterError("block size must be at least 1")
    if not (0.0 <= rho < 1.0):
        raise ParameterError(f"rho must lie in [0, 1), got {rho}")
    return _block_report(rho, sigma2, b)


def _block_report(rho, sigma2, n):
    white = math.log(2 * math.e * math.pi * sigma2)
    corr = (1.0 - 1.0 / n) * math.log1p(-(rho**2))
    return EntropyReport(rate=white + corr, correlation_term=corr, white_baseline=white)


def ar2_log_det_ratio(rho1: float, rho2: float, n: int) -> float:
    """``log(det C / sigma2^n)`` from the closed form, valid for ``n >= 4``."""
    if n < 4:
        raise ParameterError("the closed form needs n >= 4")
    if not ar2_validity(rho1, rho2):
        raise ParameterError(f"invalid AR(2) correlations ({rho1}, {rho2})")
    # -(r2-1)^(n-2) (1-2r1^2+r2)^(n-2) / (r1^2-1)^(n-3), signs folded in
    return (
        (n - 2) * math.log(1.0 - rho2)
        + (n - 2) * math.log(1.0 - 2 * rho1**2 + rho2)
        - (n - 3) * math.log(1.0 - rho1**2)
    )


def ar2_determinant_closed_form(rho1: float, rho2: float, sigma2: float, n: int) -> float:
    if n < 4:
        raise ParameterError("the closed form needs n >= 4")
    if not ar2_validity(rho1, rho2):
        raise ParameterError(f"invalid AR(2) correlations ({rho1}, {rho2})")
    num = -((rho2 - 1.0) ** (n - 2)) * (1.0 - 2 * rho1**2 + rho2) ** (n - 2) * sigma2**n
    return num / (rho1**2 - 1.0) ** (n - 3)


def ar2_entropy_rate(rho1: float, rho2: float, sigma2: float, n: int) -> EntropyReport:
    log_ratio = ar2_log_det_ratio(rho1, rho2, n)
    white = 0.5 * math.log(2 * math.pi * math.e * sigma2)
    corr = log_ratio / (2 * n)
    complex_rate = math.log(2 * math.e * math.pi * sigma2) + log_ratio / n
    return EntropyReport(
        rate=white + corr,
        correlation_term=corr,
        white_baseline=white,
        complex_rate=complex_rate,
    )


def bits(nats: float) -> float:
    return nats / math.log(2)
