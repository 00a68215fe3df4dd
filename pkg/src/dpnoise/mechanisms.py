"""Baseline additive-noise mechanisms and how they compare with optimised noise.

Calibrations used here:

* Laplace: scale ``b = delta_f / eps``; (eps, 0)-DP.
* Gaussian: ``sigma = sqrt(2 ln(1.25/delta)) * delta_f / eps``, only valid
  for ``eps < 1``.
* Analytic Gaussian: the smallest ``sigma`` with
  ``Phi(D/(2s) - eps s/D) - e^eps Phi(-D/(2s) - eps s/D) <= delta``.
* Truncated Laplace: density proportional to ``exp(-|x|/lam)`` on
  ``[-B, B]`` with ``lam = delta_f / eps`` and
  ``B = lam * ln(1 + (e^eps - 1)/(2 delta))``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize, special

from .distributions import NoiseDistribution
from .loss import LossFunction, NumericFailure
from .partition import InvalidArgument, Partition, PrivacyBudget, uniform_partition


class OutOfValidity(UserWarning):
    """A calibration formula is applied outside the range it was proven for."""


@dataclass(frozen=True)
class Mechanism:
    kind: str
    params: dict
    budget: Optional[PrivacyBudget] = None
    distribution: Optional[NoiseDistribution] = field(default=None, compare=False)
    valid: bool = True

    def __repr__(self):
        ps = ", ".join(f"{k}={v:.6g}" for k, v in self.params.items())
        return f"Mechanism({self.kind}: {ps})"


def laplace(budget: PrivacyBudget) -> Mechanism:
    if budget.epsilon <= 0:
        raise InvalidArgument("Laplace noise needs epsilon > 0")
    return Mechanism("laplace", {"b": float(budget.delta_f) / budget.epsilon}, budget)


def gaussian(budget: PrivacyBudget) -> Mechanism:
    eps, delta = budget.epsilon, budget.delta
    if eps <= 0 or not 0 < delta < 1:
        raise InvalidArgument("Gaussian noise needs epsilon > 0 and delta in (0, 1)")
    valid = eps < 1
    if not valid:
        warnings.warn(f"classical Gaussian calibration is only proven for eps < 1 (got {eps})",
                      OutOfValidity, stacklevel=2)
    sigma = math.sqrt(2 * math.log(1.25 / delta)) * float(budget.delta_f) / eps
    return Mechanism("gaussian", {"sigma": sigma}, budget, valid=valid)


def gaussian_delta(sigma: float, eps: float, delta_f: float) -> float:
    """Smallest delta for which N(0, sigma^2) noise is (eps, delta)-DP."""
    a = delta_f / (2 * sigma)
    b = eps * sigma / delta_f
    first = special.ndtr(a - b)
    # e^eps * Phi(-a - b) computed in log space to survive large eps
    second = math.exp(eps + special.log_ndtr(-a - b))
    return float(first - second)


def analytic_gaussian(budget: PrivacyBudget, rtol: float = 1e-12) -> Mechanism:
    eps, delta = budget.epsilon, budget.delta
    if eps <= 0 or not 0 < delta < 1:
        raise InvalidArgument("analytic Gaussian needs epsilon > 0 and delta in (0, 1)")
    df = float(budget.delta_f)

    def excess(s):
        return gaussian_delta(s, eps, df) - delta

    lo, hi = df * 1e-6, df
    while excess(hi) > 0:
        hi *= 2
        if hi > 1e12 * df:
            raise NumericFailure("could not bracket the analytic Gaussian scale")
    while excess(lo) <= 0:
        lo /= 2
        if lo < 1e-15 * df:
            raise NumericFailure("could not bracket the analytic Gaussian scale")
    sigma = optimize.bisect(excess, lo, hi, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps),
                            maxiter=500)
    # bisect returns a midpoint; step to the side that satisfies the constraint
    if excess(sigma) > 0:
        sigma *= 1 + rtol
    return Mechanism("analytic_gaussian", {"sigma": sigma}, budget)


def truncated_laplace(budget: PrivacyBudget) -> Mechanism:
    eps, delta = budget.epsilon, budget.delta
    if eps <= 0:
        raise InvalidArgument("truncated Laplace needs epsilon > 0")
    if not 0 < delta < 0.5:
        raise InvalidArgument(f"truncated Laplace needs delta in (0, 1/2), got {delta}")
    lam = float(budget.delta_f) / eps
    B = lam * math.log1p(math.expm1(eps) / (2 * delta))
    return Mechanism("truncated_laplace", {"lam": lam, "B": B}, budget)


def piecewise(dist: NoiseDistribution) -> Mechanism:
    return Mechanism("piecewise", {"cells": float(dist.partition.n_cells)}, dist.budget, dist)


# --------------------------------------------------------------------------
# moments and losses
# --------------------------------------------------------------------------
def _tl_moments(lam: float, B: float) -> tuple[float, float]:
    q = math.exp(-B / lam)
    e_abs = lam - B * q / -math.expm1(-B / lam)
    e_sq = 2 * lam * lam - q * (B * B + 2 * lam * B) / -math.expm1(-B / lam)
    return e_abs, e_sq


def density(m: Mechanism, x: float) -> float:
    p = m.params
    if m.kind == "laplace":
        return math.exp(-abs(x) / p["b"]) / (2 * p["b"])
    if m.kind in ("gaussian", "analytic_gaussian"):
        s = p["sigma"]
        return math.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2 * math.pi))
    if m.kind == "truncated_laplace":
        lam, B = p["lam"], p["B"]
        if abs(x) > B:
            return 0.0
        return math.exp(-abs(x) / lam) / (2 * lam * -math.expm1(-B / lam))
    d = m.distribution
    beta = float(d.partition.beta)
    u = x / beta
    bps = d.partition.bp_array
    if u < bps[0] or u >= bps[-1]:
        return 0.0
    j = int(np.searchsorted(bps, u, side="right") - 1)
    return float(d.densities[j] / beta)


def second_moment(m: Mechanism) -> float:
    p = m.params
    if m.kind == "laplace":
        return 2 * p["b"] ** 2
    if m.kind in ("gaussian", "analytic_gaussian"):
        return p["sigma"] ** 2
    if m.kind == "truncated_laplace":
        return _tl_moments(p["lam"], p["B"])[1]
    return _piecewise_expect(m.distribution, LossFunction("l2"))


def mean(m: Mechanism) -> float:
    if m.kind != "piecewise":
        return 0.0
    d = m.distribution
    beta = d.partition.beta
    mids = [float((a + b) * beta / 2) for a, b in zip(d.partition.breakpoints,
                                                      d.partition.breakpoints[1:])]
    return float(np.dot(d.weights, mids))


def std(m: Mechanism) -> float:
    mu = mean(m)
    return math.sqrt(max(second_moment(m) - mu * mu, 0.0))


def _piecewise_expect(d: NoiseDistribution, loss: LossFunction) -> float:
    coeffs = loss.cell_coefficients(d.partition, "avg")
    return float(np.dot(d.weights, coeffs))


def expected_loss(m: Mechanism, loss: LossFunction) -> float:
    """E[c(X)] for the mechanism's noise ``X``."""
    p = m.params
    if m.kind == "piecewise":
        return _piecewise_expect(m.distribution, loss)
    if loss.kind == "l1":
        if m.kind == "laplace":
            return p["b"]
        if m.kind in ("gaussian", "analytic_gaussian"):
            return p["sigma"] * math.sqrt(2 / math.pi)
        return _tl_moments(p["lam"], p["B"])[0]
    if loss.kind == "l2":
        return second_moment(m)
    # generic: quadrature against the density on each half-line
    if m.kind == "truncated_laplace":
        lims = (-p["B"], p["B"])
    else:
        lims = (-np.inf, np.inf)
    total = 0.0
    for a, b in ((lims[0], 0.0), (0.0, lims[1])):
        val, err = integrate.quad(lambda x: loss(x) * density(m, x), a, b,
                                  epsabs=1e-10, epsrel=1e-10, limit=400)
        if not math.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise NumericFailure(f"expected loss integral did not converge (err {err:.2e})")
        total += val
    return total


# --------------------------------------------------------------------------
# sampling and discretisation
# --------------------------------------------------------------------------
def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(m: Mechanism, seed: Union[int, np.random.Generator, None] = None,
           size: Optional[int] = None):
    """Draw noise from ``m`` using numpy's PCG64 generator.

    Piecewise noise picks a cell by inverting the cumulative weights and
    then a uniform point inside that cell.
    """
    rng = _rng(seed)
    n = 1 if size is None else size
    p = m.params
    if m.kind == "laplace":
        out = rng.laplace(0.0, p["b"], n)
    elif m.kind in ("gaussian", "analytic_gaussian"):
        out = rng.normal(0.0, p["sigma"], n)
    elif m.kind == "truncated_laplace":
        lam, B = p["lam"], p["B"]
        u = rng.random(n)
        mag = -lam * np.log1p(u * math.expm1(-B / lam))
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        out = sign * mag
    else:
        d = m.distribution
        cum = np.cumsum(d.weights)
        cum[-1] = 1.0
        j = np.searchsorted(cum, rng.random(n), side="right")
        j = np.minimum(j, d.partition.n_cells - 1)
        bps = d.partition.bp_array
        beta = float(d.partition.beta)
        out = (bps[j] + rng.random(n) * (bps[j + 1] - bps[j])) * beta
    return float(out[0]) if size is None else out


def cdf(m: Mechanism, x: float) -> float:
    p = m.params
    if m.kind == "laplace":
        b = p["b"]
        return 0.5 * math.exp(x / b) if x < 0 else 1 - 0.5 * math.exp(-x / b)
    if m.kind in ("gaussian", "analytic_gaussian"):
        return float(special.ndtr(x / p["sigma"]))
    if m.kind == "truncated_laplace":
        lam, B = p["lam"], p["B"]
        if x <= -B:
            return 0.0
        if x >= B:
            return 1.0
        z = -math.expm1(-B / lam)
        half = -math.expm1(-abs(x) / lam) / z / 2
        return 0.5 - half if x < 0 else 0.5 + half
    d = m.distribution
    return d.cdf_units(x / float(d.partition.beta))


def discretize(m: Mechanism, part: Partition) -> NoiseDistribution:
    """Cell probabilities of ``m`` on ``part``; mass outside it is folded into the end cells."""
    beta = float(part.beta)
    F = np.array([cdf(m, b * beta) for b in part.breakpoints])
    w = np.diff(F)
    w[0] += F[0]
    w[-1] += 1 - F[-1]
    w = np.maximum(w, 0.0)
    return NoiseDistribution(part, w / w.sum(), m.budget)


def discretized_truncated_laplace(budget: PrivacyBudget, k: int) -> NoiseDistribution:
    """Truncated Laplace averaged over cells of width ``delta_f / k``.

    Events made of whole cells and shifts by whole cells see exactly the
    probabilities of the continuous mechanism, so the privacy guarantee
    carries over to the grid.
    """
    m = truncated_laplace(budget)
    beta = budget.delta_f / k
    L = math.ceil(m.params["B"] / float(beta) - 1e-12)
    part = Partition(beta, tuple(range(-L, L + 1)))
    return discretize(m, part)


# --------------------------------------------------------------------------
# comparison with the optimal bounds
# --------------------------------------------------------------------------
def near_optimal_lb(budget: PrivacyBudget, loss: Union[str, LossFunction]) -> float:
    """Closed-form lower bound on the expected loss of any (eps, delta)-DP noise.

    With ``r = e^-eps`` and ``n = ceil(B / delta_f) - 1`` for the truncated
    Laplace radius ``B``, the bound is
    ``delta_f^q * ((1 - r) + 2 delta r) * sum_{i=1..n} i^q r^i`` with ``q = 1``
    for absolute and ``q = 2`` for squared loss.
    """
    name = loss if isinstance(loss, str) else loss.kind
    if name not in ("l1", "l2"):
        raise InvalidArgument(f"the closed-form bound covers l1 and l2 only, not {name!r}")
    eps, delta = budget.epsilon, budget.delta
    df = float(budget.delta_f)
    if eps <= 0:
        raise InvalidArgument("epsilon must be positive")
    if delta >= 0.5:
        return 0.0
    radius = math.log1p(math.expm1(eps) / (2 * delta)) / eps  # in sensitivities
    n = max(math.ceil(radius - 1e-12) - 1, 0)
    r = math.exp(-eps)
    q = 1 if name == "l1" else 2
    s = sum(i ** q * r ** i for i in range(1, n + 1))
    return df ** q * ((1 - r) + 2 * delta * r) * s


def suboptimality_gap(b_ub: float, b_lb: float, ub: float, lb: float) -> float:
    """``100 * (b_ub - b_lb) / max(O, 1)`` with ``O`` the midpoint of our bounds."""
    o = (ub + lb) / 2
    return 100.0 * (b_ub - b_lb) / max(o, 1.0)


BASELINES = ("laplace", "gaussian", "analytic_gaussian", "truncated_laplace")


def baselines(budget: PrivacyBudget) -> dict[str, Mechanism]:
    """Every baseline whose calibration applies to ``budget``."""
    out = {"laplace": laplace(budget)}
    if 0 < budget.delta < 1:
        if budget.epsilon < 1:
            out["gaussian"] = gaussian(budget)
        out["analytic_gaussian"] = analytic_gaussian(budget)
    if budget.delta < 0.5:
        out["truncated_laplace"] = truncated_laplace(budget)
    return out
