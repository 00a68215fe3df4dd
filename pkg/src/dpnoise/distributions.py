"""Piecewise-constant noise distributions and families of them."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .partition import InvalidArgument, Partition, PrivacyBudget, as_fraction


@dataclass(frozen=True)
class NoiseDistribution:
    """Cell probabilities ``weights`` on ``partition``.

    ``universe`` is the range (beta units) that distinguishing events may
    occupy. It equals the partition's own extent for upper-bound and
    audited distributions; lower-bound distributions live on a padded
    grid whose universe is the unpadded core.
    """

    partition: Partition
    weights: np.ndarray
    budget: Optional[PrivacyBudget] = None
    loss: str = ""
    bound: str = "upper"
    universe: Optional[tuple[int, int]] = None
    certified_tol: Optional[float] = None
    objective: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.partition.n_cells,):
            raise InvalidArgument(
                f"{w.size} weights for a partition with {self.partition.n_cells} cells")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgument("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidArgument(f"weights sum to {w.sum():.12g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.universe is None:
            object.__setattr__(self, "universe", (self.partition.lo, self.partition.hi))
        lo, hi = self.universe
        if not (self.partition.lo <= lo < hi <= self.partition.hi):
            raise InvalidArgument("event universe must lie inside the partition")

    @property
    def densities(self) -> np.ndarray:
        """Probability per beta unit in each cell."""
        return self.weights / self.partition.widths

    def cdf_units(self, x: float) -> float:
        """P(X < x * beta), with ``x`` in beta units."""
        bps = self.partition.bp_array
        cum = np.concatenate(([0.0], np.cumsum(self.weights)))
        if x <= bps[0]:
            return 0.0
        if x >= bps[-1]:
            return 1.0
        j = int(np.searchsorted(bps, x, side="right") - 1)
        return float(cum[j] + self.weights[j] * (x - bps[j]) / (bps[j + 1] - bps[j]))

    def restricted_to_universe(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints and densities of the cells inside the universe."""
        bps = self.partition.bp_array
        lo, hi = self.universe
        i0 = int(np.searchsorted(bps, lo))
        i1 = int(np.searchsorted(bps, hi))
        if bps[i0] != lo or bps[i1] != hi:
            raise InvalidArgument("universe endpoints must be partition breakpoints")
        return bps[i0:i1 + 1], self.densities[i0:i1]

    def with_meta(self, **kw) -> "NoiseDistribution":
        return replace(self, **kw)

    def to_dict(self, digits: int = 17) -> dict:
        b = self.budget
        d = self.partition.to_dict()
        d.update({
            "weights": [float(f"{w:.{digits}g}") for w in self.weights],
            "epsilon": b.epsilon if b else None,
            "delta": b.delta if b else None,
            "delta_f": str(b.delta_f) if b else None,
            "loss": self.loss,
            "bound": self.bound,
            "certified_tol": self.certified_tol,
            "objective": self.objective,
        })
        return d

    def to_json(self, digits: int = 17) -> str:
        return json.dumps(self.to_dict(digits), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseDistribution":
        part = Partition.from_dict(d)
        budget = None
        if d.get("epsilon") is not None:
            budget = PrivacyBudget(d["epsilon"], d["delta"], as_fraction(d["delta_f"]))
        bound = d.get("bound", "upper")
        universe = None
        if bound == "lower":
            if budget is None:
                raise InvalidArgument("a lower-bound distribution needs its budget")
            t = part.units_per(budget.delta_f)
            universe = (part.lo + t, part.hi - t)
        w = np.asarray(d["weights"], dtype=float)
        if w.sum() > 0 and abs(w.sum() - 1) <= 1e-9:
            w = w / w.sum()
        return cls(part, w, budget, d.get("loss", ""), bound, universe,
                   d.get("certified_tol"), d.get("objective"))

    @classmethod
    def from_json(cls, text: str) -> "NoiseDistribution":
        return cls.from_dict(json.loads(text))


def point_mass(part: Partition, j: int, budget: Optional[PrivacyBudget] = None) -> NoiseDistribution:
    w = np.zeros(part.n_cells)
    w[j] = 1.0
    return NoiseDistribution(part, w, budget)


@dataclass(frozen=True)
class DependentNoise:
    """One distribution per output cell ``Phi_k``, all on a shared grid.

    ``output_lo`` is the left end of the output range in beta units, so
    output cell ``k`` is ``[output_lo + k, output_lo + k + 1)``.
    ``cell_weights`` holds ``w_k`` (density of the query output in cell k).
    """

    partition: Partition
    weights: np.ndarray  # shape (K, n_cells)
    output_lo: int = 0
    cell_weights: Optional[np.ndarray] = None
    universe: Optional[tuple[int, int]] = None
    budget: Optional[PrivacyBudget] = None
    bound: str = "upper"
    objective: Optional[float] = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if w.shape[1] != self.partition.n_cells:
            raise InvalidArgument("family weights do not match the partition")
        if np.any(w < 0) or np.any(np.abs(w.sum(axis=1) - 1) > 1e-9):
            raise InvalidArgument("every member must be a probability vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.universe is None:
            object.__setattr__(self, "universe", (self.partition.lo, self.partition.hi))
        if self.cell_weights is None:
            K = w.shape[0]
            object.__setattr__(self, "cell_weights",
                               np.full(K, 1.0 / (K * float(self.partition.beta))))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    def member(self, k: int) -> NoiseDistribution:
        return NoiseDistribution(self.partition, self.weights[k], self.budget,
                                 bound=self.bound, universe=self.universe)

    def to_dict(self, digits: int = 17) -> dict:
        d = self.partition.to_dict()
        d.update({"output_lo": self.output_lo,
                  "cell_weights": [float(f"{x:.{digits}g}") for x in self.cell_weights],
                  "weights": [[float(f"{v:.{digits}g}") for v in row] for row in self.weights],
                  "bound": self.bound, "objective": self.objective,
                  "universe": list(self.universe)})
        if self.budget is not None:
            d.update({"epsilon": self.budget.epsilon, "delta": self.budget.delta,
                      "delta_f": str(self.budget.delta_f)})
        return d
