"""Loss functions and the per-cell objective coefficients built from them.

Upper-bound LPs charge each cell its average loss, lower-bound LPs charge
its infimum. For the built-in piecewise polynomial losses both quantities
are computed exactly in rational arithmetic from an antiderivative, so
wide cells far from the origin do not suffer cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .partition import InvalidArgument, Partition, as_fraction


class NumericFailure(RuntimeError):
    """A numerical routine failed to reach its tolerance."""


BUILTIN_KINDS = ("l1", "l2", "pinball", "capped")


@dataclass(frozen=True)
class LossFunction:
    """A non-negative loss ``c`` on the real line.

    ``params`` holds the kind-specific parameters as Fractions: ``(tau,)``
    for pinball and ``(w, s)`` for capped-linear. Custom losses carry a
    Python callable plus ``radius``, a declared distance beyond which the
    loss is known to stay above its value at the radius.
    """

    kind: str
    params: tuple = ()
    name: str = ""
    evaluator: Optional[Callable[[float], float]] = field(default=None, compare=False)
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in BUILTIN_KINDS + ("custom",):
            raise InvalidArgument(f"unknown loss kind {self.kind!r}")
        if self.kind == "custom" and self.evaluator is None:
            raise InvalidArgument("custom loss needs an evaluator")
        if not self.name:
            object.__setattr__(self, "name", self.spec())

    # -- evaluation ---------------------------------------------------------
    def __call__(self, x: float) -> float:
        if self.kind == "custom":
            return float(self.evaluator(x))
        return float(self._exact_value(as_fraction(x)))

    def _exact_value(self, x: Fraction) -> Fraction:
        if self.kind == "l1":
            return abs(x)
        if self.kind == "l2":
            return x * x
        if self.kind == "pinball":
            tau = self.params[0]
            return tau * x if x >= 0 else (tau - 1) * x
        w, s = self.params
        ax = abs(x)
        return ax if ax <= w else w + s * (ax - w)

    def _antiderivative(self, x: Fraction) -> Fraction:
        """``F(x) = integral of c from 0 to x`` for the built-in kinds."""
        if self.kind == "l1":
            return x * abs(x) / 2
        if self.kind == "l2":
            return x ** 3 / 3
        if self.kind == "pinball":
            tau = self.params[0]
            return tau * x * x / 2 if x >= 0 else -(1 - tau) * x * x / 2
        w, s = self.params
        ax = abs(x)
        if ax <= w:
            val = ax * ax / 2
        else:
            val = w * w / 2 + w * (ax - w) + s * (ax - w) ** 2 / 2
        return val if x >= 0 else -val

    @property
    def minimizer(self) -> float:
        return 0.0

    def spec(self) -> str:
        if self.kind in ("l1", "l2"):
            return self.kind
        if self.kind == "pinball":
            return f"pinball:{float(self.params[0]):g}"
        if self.kind == "capped":
            return f"capped:{float(self.params[0]):g}:{float(self.params[1]):g}"
        return self.name or "custom"

    # -- coefficients -------------------------------------------------------
    def avg_coeff(self, a, b) -> float:
        """Mean of the loss over ``[a, b)``."""
        if self.kind == "custom":
            return self._avg_custom(float(a), float(b))
        a, b = as_fraction(a), as_fraction(b)
        if b <= a:
            raise InvalidArgument(f"empty cell [{a}, {b})")
        return float(self.avg_exact(a, b))

    def avg_exact(self, a: Fraction, b: Fraction) -> Fraction:
        return (self._antiderivative(b) - self._antiderivative(a)) / (b - a)

    def inf_coeff(self, a, b) -> float:
        """Infimum of the loss over ``[a, b)``."""
        if self.kind == "custom":
            return self._inf_custom(float(a), float(b))
        a, b = as_fraction(a), as_fraction(b)
        if b <= a:
            raise InvalidArgument(f"empty cell [{a}, {b})")
        # every built-in loss is non-increasing left of 0 and non-decreasing right of it
        nearest = min(max(Fraction(0), a), b)
        return float(self._exact_value(nearest))

    def _avg_custom(self, a: float, b: float) -> float:
        if b <= a:
            raise InvalidArgument(f"empty cell [{a}, {b})")
        val, err = integrate.quad(self.evaluator, a, b, epsabs=1e-10, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > 1e-10 * max(1.0, b - a):
            raise NumericFailure(f"quadrature did not converge on cell [{a}, {b}) (err {err:.2e})")
        return val / (b - a)

    def _inf_custom(self, a: float, b: float) -> float:
        if b <= a:
            raise InvalidArgument(f"empty cell [{a}, {b})")
        grid = np.linspace(a, b, 64)
        vals = np.array([self.evaluator(x) for x in grid])
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        x = _golden_section(self.evaluator, lo, hi, tol=1e-10)
        return float(min(vals[i], self.evaluator(x)))

    def cell_coefficients(self, part: Partition, kind: str = "avg") -> np.ndarray:
        """Objective vector for all cells of ``part``."""
        beta = part.beta
        f = self.avg_coeff if kind == "avg" else self.inf_coeff
        if self.kind == "custom":
            beta_f = float(beta)
            return np.array([f(a * beta_f, b * beta_f)
                             for a, b in zip(part.breakpoints, part.breakpoints[1:])])
        return np.array([f(a * beta, b * beta)
                         for a, b in zip(part.breakpoints, part.breakpoints[1:])])


def _golden_section(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2


def l1() -> LossFunction:
    return LossFunction("l1")


def l2() -> LossFunction:
    return LossFunction("l2")


def pinball(tau) -> LossFunction:
    """``tau * max(x, 0) + (1 - tau) * max(-x, 0)``."""
    t = as_fraction(tau)
    if not 0 < t < 1:
        raise InvalidArgument(f"pinball level must lie in (0, 1), got {tau}")
    return LossFunction("pinball", (t,))


def capped_linear(w=1, s=1000) -> LossFunction:
    """``|x|`` inside ``[-w, w]`` and slope ``s`` outside, continuous at the kink."""
    w, s = as_fraction(w), as_fraction(s)
    if w <= 0:
        raise InvalidArgument(f"kink location must be positive, got {w}")
    if s <= 1:
        raise InvalidArgument(f"outer slope must exceed 1, got {s}")
    return LossFunction("capped", (w, s))


def custom(fn: Callable[[float], float], radius: float, name: str = "custom",
           probe: float = 10.0) -> LossFunction:
    """Wrap a user loss; non-negativity is probed on a grid out to ``probe * radius``."""
    xs = np.linspace(-probe * radius, probe * radius, 401)
    vals = np.array([fn(x) for x in xs])
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise InvalidArgument("custom loss must be finite and non-negative")
    edge = min(fn(radius), fn(-radius))
    outside = vals[np.abs(xs) > radius]
    if outside.size and outside.min() < edge - 1e-12:
        raise InvalidArgument("custom loss dips below its boundary value beyond the declared radius")
    return LossFunction("custom", (), name, fn, float(radius))


def parse_loss(spec: str) -> LossFunction:
    """Parse ``l1``, ``l2``, ``pinball:TAU`` or ``capped:W:S``."""
    parts = spec.strip().lower().split(":")
    head = parts[0]
    try:
        if head in ("l1", "l2") and len(parts) == 1:
            return LossFunction(head)
        if head == "pinball" and len(parts) == 2:
            return pinball(parts[1])
        if head == "capped" and len(parts) == 3:
            return capped_linear(parts[1], parts[2])
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidArgument(f"bad loss spec {spec!r}: {exc}") from None
    raise InvalidArgument(f"bad loss spec {spec!r}; expected l1, l2, pinball:T or capped:W:S")
