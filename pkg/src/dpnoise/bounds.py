"""Upper and lower bounds on the optimal expected loss via cutting planes.

The upper-bound LP optimises cell probabilities on a partition, charges
each cell its average loss and imposes the privacy constraints lazily:
the separation oracle reports the most violated ``(phi, A)`` for the
incumbent, the row is appended and the LP re-solved. The lower-bound LP
is the minimisation form of the discretised dual. It lives on the
partition padded by one sensitivity on each side and charges cell
infima. Its events stay inside the unpadded range. Every relaxation of
the lower-bound LP is itself a valid lower bound, so its objective is
reported even if the loop is cut short.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .distributions import DependentNoise, NoiseDistribution
from .loss import LossFunction, NumericFailure
from .lpcore import LPModel, Status, make_solver
from .partition import (InvalidArgument, Partition, PrivacyBudget, as_fraction,
                        event_cell_overlaps, geometric_partition, pad, uniform_partition)
from .separation import (DEFAULT_TOL, Violation, shortfall_by_pair, shortfall_by_shift,
                         shortfall_of)

log = logging.getLogger(__name__)


class BudgetExhausted(RuntimeError):
    """The iteration cap was reached before the oracle certified feasibility."""


class InfeasibleBound(RuntimeError):
    """The LP has no feasible point (support too small for the budget)."""


# --------------------------------------------------------------------------
# model construction
# --------------------------------------------------------------------------
def _grid(kind: str, part: Partition, budget: PrivacyBudget) -> tuple[Partition, tuple[int, int]]:
    """Variable grid and event universe for a bound kind."""
    kf = part.units_per(budget.delta_f)
    if kind == "upper":
        return part, (part.lo, part.hi)
    if kind == "lower":
        return pad(part, kf), (part.lo, part.hi)
    raise InvalidArgument(f"bound kind must be 'upper' or 'lower', got {kind!r}")


def _objective(kind: str, grid: Partition, loss: LossFunction) -> np.ndarray:
    return loss.cell_coefficients(grid, "avg" if kind == "upper" else "inf")


def build_upper(part: Partition, budget: PrivacyBudget, loss: LossFunction) -> LPModel:
    """Simplex over the cells of ``part`` with average-loss objective, no DP rows yet."""
    part.units_per(budget.delta_f)
    m = LPModel(_objective("upper", part, loss))
    m.add_eq(np.arange(m.n_vars), np.ones(m.n_vars), 1.0)
    return m


def build_lower(part: Partition, budget: PrivacyBudget, loss: LossFunction) -> LPModel:
    """Simplex over the padded cells with cell-infimum objective, no DP rows yet."""
    grid, _ = _grid("lower", part, budget)
    m = LPModel(_objective("lower", grid, loss))
    m.add_eq(np.arange(m.n_vars), np.ones(m.n_vars), 1.0)
    return m


def dp_row(grid: Partition, v: Violation, budget: PrivacyBudget) -> np.ndarray:
    """Coefficients of ``P[X in A] - e^eps P[X + phi in A]`` over the cells of ``grid``."""
    w = grid.widths.astype(float)
    pos = event_cell_overlaps(grid.bp_array, v.event, 0) / w
    neg = event_cell_overlaps(grid.bp_array, v.event, v.phi) / w
    return pos - budget.exp_eps * neg


# --------------------------------------------------------------------------
# cutting plane
# --------------------------------------------------------------------------
@dataclass
class CuttingPlaneResult:
    kind: str
    distribution: NoiseDistribution
    objective: float
    cuts: list[Violation]
    iterations: int
    converged: bool
    worst: Violation
    seconds: float


class _CutPool:
    def __init__(self):
        self.keys: set = set()
        self.cuts: list[Violation] = []

    def add(self, v: Violation) -> bool:
        key = v.key()
        if key in self.keys:
            return False
        self.keys.add(key)
        self.cuts.append(v)
        return True


class _RowPool(_CutPool):
    """Cut pool that remembers model rows and which ones the solver dropped."""

    def __init__(self):
        super().__init__()
        self.row_of: dict = {}
        self.dropped: set[int] = set()

    def offer(self, v: Violation, model: LPModel, coeffs: Callable[[], np.ndarray],
              rhs: float, solver) -> bool:
        """Add ``v`` as a new row, or revive its dropped row. True if the LP changed."""
        key = v.key()
        row = self.row_of.get(key)
        if row is None:
            self.add(v)
            self.row_of[key] = model.add_row(np.arange(model.n_vars), coeffs(), rhs)
            return True
        if row in self.dropped:
            self.dropped.discard(row)
            solver.restore(row)
            return True
        return False


def _select(viols: Sequence[Violation], tol: float, multi_cut) -> list[Violation]:
    """Violated rows to add: the worst one, or the ``multi_cut`` worst (all if True)."""
    bad = [v for v in viols if v.shortfall > tol]
    if not bad:
        return []
    if multi_cut is True:
        return bad
    n = 1 if not multi_cut else int(multi_cut)
    order = sorted(range(len(bad)), key=lambda i: (-bad[i].shortfall, i))
    return [bad[i] for i in order[:n]]


def interior_point(kind: str, part: Partition, budget: PrivacyBudget) -> Optional[np.ndarray]:
    """A feasible starting point for in-out separation, or None.

    The truncated Laplace mechanism averaged over the cells of the variable
    grid is feasible whenever all cells have unit width (events and shifts
    then only see whole-cell masses). For other grids the averaged point is
    kept only if the oracle certifies it.
    """
    from .mechanisms import discretize, truncated_laplace

    if not (budget.epsilon > 0 and 0 < budget.delta < 0.5):
        return None
    grid, universe = _grid(kind, part, budget)
    m = truncated_laplace(budget)
    if m.params["B"] > float(grid.hi * grid.beta) or -m.params["B"] < float(grid.lo * grid.beta):
        return None
    dist = discretize(m, grid)
    dist = NoiseDistribution(grid, dist.weights, budget, "", kind, universe)
    viols = shortfall_by_shift(dist, budget)
    if max(v.shortfall for v in viols) > 0:
        return None
    return dist.weights


def cutting_plane(kind: str, part: Partition, budget: PrivacyBudget, loss: LossFunction, *,
                  max_iter: int = 5000, tol: float = DEFAULT_TOL, backend: str = "highs-dual",
                  initial_cuts: Sequence[Violation] = (), multi_cut=True,
                  jobs: int = 1, time_limit: Optional[float] = None,
                  raise_on_budget: bool = False, inout: Optional[float] = 0.2,
                  interior: Optional[np.ndarray] = None,
                  purge_every: Optional[int] = 20) -> CuttingPlaneResult:
    """Row generation for the upper (``kind="upper"``) or lower bound LP.

    With ``multi_cut`` every candidate shift whose best event is violated
    contributes its row in the same round (an integer keeps only that many
    of the worst). ``inout`` enables in-out separation: cuts are sought at
    ``inout * x_lp + (1 - inout) * x_in`` for a known feasible ``x_in``
    (``interior`` or :func:`interior_point`), which keeps the relaxation
    from oscillating. When that point is feasible it becomes the new
    ``x_in``. Termination is unchanged: the LP point itself must satisfy
    every constraint up to ``tol``.

    Every ``purge_every`` rounds, rows that are loose and carry a zero
    multiplier are taken out of the solver (backends that support it);
    they stay in the model and in the pool and come back the moment the
    oracle proposes them again.
    """
    t0 = time.perf_counter()
    grid, universe = _grid(kind, part, budget)
    model = build_upper(part, budget, loss) if kind == "upper" else build_lower(part, budget, loss)
    solver = make_solver(model, backend)
    can_purge = purge_every is not None and hasattr(solver, "drop_slack")
    pool = _RowPool()
    lo, hi = universe
    kf = grid.units_per(budget.delta_f)

    def offer(v: Violation) -> bool:
        return pool.offer(v, model, lambda: dp_row(grid, v, budget), budget.delta, solver)

    for v in initial_cuts:
        ev = v.event.intersect_interval(lo, hi)
        if ev.is_empty() or abs(v.phi) > kf:
            continue
        offer(Violation(v.phi, ev, v.shortfall))

    x_in = None
    if inout is not None:
        if not 0 < inout < 1:
            raise InvalidArgument(f"inout weight must lie in (0, 1), got {inout}")
        x_in = interior if interior is not None else interior_point(kind, part, budget)

    def scan(x):
        return shortfall_by_shift(NoiseDistribution(grid, x, budget, "", kind, universe),
                                  budget, jobs=jobs)

    it = 0
    while True:
        it += 1
        sol = solver.solve()
        if sol.status is Status.INFEASIBLE:
            raise InfeasibleBound(f"{kind} LP infeasible on {part.n_cells} cells")
        if not sol.optimal:
            raise NumericFailure(f"{kind} LP returned {sol.status.value}")
        x = sol.x / sol.x.sum()
        viols = scan(x)
        worst = max(viols, key=lambda v: v.shortfall)
        converged = worst.shortfall <= tol
        out_of_time = time_limit is not None and time.perf_counter() - t0 > time_limit
        if converged or it >= max_iter or out_of_time:
            break
        cuts: list[Violation] = []
        if x_in is not None:
            for _ in range(4):
                x_sep = inout * x + (1 - inout) * x_in
                cuts = _select(scan(x_sep), tol, multi_cut)
                if cuts:
                    break
                x_in = x_sep
        if not cuts:
            cuts = _select(viols, tol, multi_cut)
        if can_purge and it % purge_every == 0:
            pool.dropped.update(solver.drop_slack(sol.x, 1e-6))
        added = sum(offer(v) for v in cuts)
        if not added:
            raise NumericFailure(
                f"oracle returned an existing cut with shortfall {worst.shortfall:.3e}; "
                "LP solution does not honour its own rows")

    objective = float(model.objective @ x)
    if not converged and raise_on_budget:
        raise BudgetExhausted(f"{kind}: shortfall {worst.shortfall:.3e} after {it} rounds")
    dist = NoiseDistribution(grid, x, budget, loss.spec(), kind, universe,
                             certified_tol=tol if converged else None, objective=objective)
    return CuttingPlaneResult(kind, dist, objective, pool.cuts, it, converged, worst,
                              time.perf_counter() - t0)


# --------------------------------------------------------------------------
# bound pairs
# --------------------------------------------------------------------------
@dataclass
class BoundPair:
    budget: PrivacyBudget
    loss: str
    partition: Partition
    upper: CuttingPlaneResult
    lower: CuttingPlaneResult
    L: int
    k: int
    seconds: float
    converged: bool = True
    history: list = field(default_factory=list)
    upper_value: Optional[float] = None
    lower_value: Optional[float] = None

    @property
    def UB(self) -> float:
        return self.upper.objective if self.upper_value is None else self.upper_value

    @property
    def LB(self) -> float:
        return self.lower.objective if self.lower_value is None else self.lower_value

    @property
    def rel_gap(self) -> float:
        return (self.UB - self.LB) / max(abs(self.LB), 1e-12)

    @property
    def cuts(self) -> int:
        return len(self.upper.cuts) + len(self.lower.cuts)

    CSV_FIELDS = ("epsilon", "delta", "delta_f", "loss", "L", "k", "UB", "LB", "rel_gap",
                  "cuts", "seconds")

    def csv_row(self) -> dict:
        g = lambda v: f"{v:.12g}"  # noqa: E731
        b = self.budget
        return {"epsilon": g(b.epsilon), "delta": g(b.delta), "delta_f": str(b.delta_f),
                "loss": self.loss, "L": self.L, "k": self.k, "UB": g(self.UB),
                "LB": g(self.LB), "rel_gap": g(self.rel_gap), "cuts": self.cuts,
                "seconds": g(self.seconds)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


def binding_cuts(res: CuttingPlaneResult, slack: float = 1e-7) -> list[Violation]:
    """Cuts of a finished run that are (nearly) tight at its final point."""
    dist, budget = res.distribution, res.distribution.budget
    out = []
    for v in res.cuts:
        if shortfall_of(dist, v.phi, v.event, budget) > -slack:
            out.append(v)
    return out


def solve_pair(L: int, k: int, budget: PrivacyBudget, loss: LossFunction, *,
               partition: Optional[Partition] = None,
               lower_partition: Optional[Partition] = None, parallel: bool = False,
               upper_cuts: Sequence[Violation] = (), lower_cuts: Sequence[Violation] = (),
               **cp_kwargs) -> BoundPair:
    """Upper and lower bound (uniform grid unless ``partition`` is given).

    ``lower_partition`` lets the lower bound use a wider grid than the
    upper bound; both remain valid bounds. When run sequentially the
    lower bound is seeded with the rows that bind at the upper solution.
    """
    t0 = time.perf_counter()
    part = partition if partition is not None else uniform_partition(L, k, budget.delta_f)
    lpart = lower_partition if lower_partition is not None else part

    def run(kind, p, cuts):
        return cutting_plane(kind, p, budget, loss, initial_cuts=cuts, **cp_kwargs)

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as ex:
            fu = ex.submit(run, "upper", part, upper_cuts)
            fl = ex.submit(run, "lower", lpart, lower_cuts)
            up, lo = fu.result(), fl.result()
    else:
        up = run("upper", part, upper_cuts)
        lo = run("lower", lpart, list(lower_cuts) + binding_cuts(up))
    return BoundPair(budget, loss.spec(), part, up, lo, L, k, time.perf_counter() - t0,
                     converged=up.converged and lo.converged)


# --------------------------------------------------------------------------
# refinement schedule
# --------------------------------------------------------------------------
def truncated_laplace_radius(budget: PrivacyBudget) -> float:
    """Support half-width of the truncated Laplace mechanism (query units)."""
    eps, delta = budget.epsilon, budget.delta
    lam = float(budget.delta_f) / eps
    return lam * math.log1p(math.expm1(eps) / (2 * delta))


def default_radius(budget: PrivacyBudget) -> int:
    """Initial support half-width in units of the sensitivity."""
    if budget.epsilon > 0 and budget.delta < 0.5:
        return max(1, math.ceil(truncated_laplace_radius(budget) / float(budget.delta_f) - 1e-12))
    return max(1, math.ceil(1 / (2 * budget.delta)))


@dataclass
class Schedule:
    """Knobs of the refinement driver.

    ``radius`` is the starting support half-width in sensitivities
    (default: the truncated Laplace support, rounded up). The lower bound
    runs on ``lower_radius_factor`` times that radius, because its event
    universe must reach past where the upper solution puts mass before the
    certificate becomes tight. Each round doubles ``k``; when the gap
    shrinks by less than ``stall_ratio`` of its previous value the radius
    grows by ``radius_step`` instead.
    """

    radius: Optional[int] = None
    lower_radius_factor: int = 2
    k0: int = 1
    max_k: int = 1024
    max_radius: int = 64
    radius_step: Optional[int] = None
    stall_ratio: float = 0.9
    time_limit: float = 600.0
    partition: str = "uniform"  # or "geometric"
    core_units: Optional[int] = None
    max_width: Optional[int] = None
    warm_start: bool = True
    on_round: Optional[Callable[[BoundPair], None]] = None


def _make_partition(sched: Schedule, radius: int, k: int, delta_f) -> Partition:
    L = radius * k
    if sched.partition == "geometric":
        return geometric_partition(L, k, delta_f, sched.core_units, sched.max_width)
    if sched.partition != "uniform":
        raise InvalidArgument(f"unknown partition scheme {sched.partition!r}")
    return uniform_partition(L, k, delta_f)


def converge(budget: PrivacyBudget, loss: LossFunction, target_gap: float = 0.01,
             schedule: Optional[Schedule] = None, **cp_kwargs) -> BoundPair:
    """Refine the grid until the relative gap drops to ``target_gap``.

    Bounds from every round remain valid, so the best upper and the best
    lower value seen so far are combined; the reported gap therefore
    never increases from one round to the next. Cuts that bind at the end
    of a round are rescaled to the finer grid and seed the next round.
    """
    if target_gap <= 0:
        raise InvalidArgument("target gap must be positive")
    sched = schedule or Schedule()
    if sched.lower_radius_factor < 1:
        raise InvalidArgument("lower_radius_factor must be at least 1")
    radius = sched.radius or default_radius(budget)
    step = sched.radius_step or radius
    k = sched.k0
    t0 = time.perf_counter()
    best_up: Optional[CuttingPlaneResult] = None
    best_lo: Optional[CuttingPlaneResult] = None
    best_pair: Optional[BoundPair] = None
    history = []
    up_cuts: list[Violation] = []
    lo_cuts: list[Violation] = []
    prev_gap = math.inf
    while True:
        part = _make_partition(sched, radius, k, budget.delta_f)
        lpart = _make_partition(sched, radius * sched.lower_radius_factor, k, budget.delta_f)
        remaining = sched.time_limit - (time.perf_counter() - t0)
        try:
            pair = solve_pair(radius * k, k, budget, loss, partition=part, lower_partition=lpart,
                              upper_cuts=up_cuts, lower_cuts=lo_cuts,
                              time_limit=max(remaining, 1.0), **cp_kwargs)
        except InfeasibleBound:
            if radius + step > sched.max_radius:
                break
            radius += step
            continue
        if pair.upper.converged and (best_up is None or pair.upper.objective < best_up.objective):
            best_up = pair.upper
        if best_lo is None or pair.lower.objective > best_lo.objective:
            best_lo = pair.lower
        if best_up is not None:
            best_pair = BoundPair(budget, loss.spec(), best_up.distribution.partition, best_up,
                                  best_lo, radius * k, k, time.perf_counter() - t0,
                                  converged=False, history=history)
            gap = best_pair.rel_gap
        else:
            gap = math.inf
        history.append({"radius": radius, "k": k, "n_cells": part.n_cells,
                        "UB": pair.UB, "LB": pair.LB, "best_gap": gap,
                        "seconds": pair.seconds})
        log.info("radius=%d k=%d cells=%d UB=%.9g LB=%.9g best gap=%.4g",
                 radius, k, part.n_cells, pair.UB, pair.LB, gap)
        if sched.on_round is not None and best_pair is not None:
            sched.on_round(best_pair)
        if gap <= target_gap:
            best_pair.converged = True
            break
        elapsed = time.perf_counter() - t0
        if elapsed >= sched.time_limit or (k * 2 > sched.max_k and radius + step > sched.max_radius):
            break
        stalled = gap > sched.stall_ratio * prev_gap
        prev_gap = gap
        if sched.warm_start:
            up_cuts, lo_cuts = binding_cuts(pair.upper), binding_cuts(pair.lower)
        if (stalled or k * 2 > sched.max_k) and radius + step <= sched.max_radius:
            radius += step
        else:
            k *= 2
            up_cuts = [_rescale(v, 2) for v in up_cuts]
            lo_cuts = [_rescale(v, 2) for v in lo_cuts]
    if best_pair is None:
        raise InfeasibleBound("no feasible upper bound found within the schedule")
    best_pair.seconds = time.perf_counter() - t0
    best_pair.history = history
    return best_pair


def _rescale(v: Violation, factor: int) -> Violation:
    return Violation(v.phi * factor, v.event.scaled(factor), v.shortfall, v.k, v.m)


# --------------------------------------------------------------------------
# explicit feasible point
# --------------------------------------------------------------------------
def staircase(delta: float, delta_f=1, budget: Optional[PrivacyBudget] = None) -> NoiseDistribution:
    """Uniform mass on ``2 * ceil(1/(2 delta))`` sensitivity-wide cells around zero.

    The construction ignores epsilon: any shift by at most one cell moves
    at most one cell's mass ``<= delta`` out of an event.
    """
    if not 0 < delta < 1:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    m = math.ceil(1 / (2 * delta) - 1e-12)
    part = Partition(as_fraction(delta_f), tuple(range(-m, m + 1)))
    return NoiseDistribution(part, np.full(2 * m, 1 / (2 * m)), budget)


# --------------------------------------------------------------------------
# data-dependent noise
# --------------------------------------------------------------------------
@dataclass
class DependentResult:
    kind: str
    family: DependentNoise
    objective: float
    cuts: list[Violation]
    iterations: int
    converged: bool
    worst: Violation
    seconds: float


@dataclass
class DependentPair:
    upper: DependentResult
    lower: DependentResult
    seconds: float

    @property
    def UB(self) -> float:
        return self.upper.objective

    @property
    def LB(self) -> float:
        return self.lower.objective

    @property
    def rel_gap(self) -> float:
        return (self.UB - self.LB) / max(abs(self.LB), 1e-12)


def output_cell_weights(phi_lo, phi_hi, beta: Fraction,
                        w: Optional[Callable[[float], float]] = None,
                        samples: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Cell averages ``w_k`` and cell infima of the output density over Phi's cells.

    ``w=None`` is the uniform density on ``[phi_lo, phi_hi)``, for which both
    are exact. Otherwise averages come from adaptive quadrature and infima
    from a dense grid, which is exact for monotone-per-cell densities.
    """
    lo, hi = as_fraction(phi_lo), as_fraction(phi_hi)
    K = (hi - lo) / beta
    if K.denominator != 1 or K <= 0:
        raise InvalidArgument(f"[{phi_lo}, {phi_hi}) is not tiled by cells of width {beta}")
    K = int(K)
    if w is None:
        val = 1.0 / float(hi - lo)
        return np.full(K, val), np.full(K, val)
    from scipy import integrate

    avg = np.empty(K)
    inf = np.empty(K)
    b = float(beta)
    for k in range(K):
        a = float(lo + k * beta)
        avg[k] = integrate.quad(w, a, a + b, epsabs=1e-12)[0] / b
        inf[k] = min(w(x) for x in np.linspace(a, a + b, samples))
    return avg, inf


def _dep_row(grid: Partition, n: int, v: Violation, budget: PrivacyBudget):
    w = grid.widths.astype(float)
    pos = event_cell_overlaps(grid.bp_array, v.event, 0) / w
    neg = -budget.exp_eps * event_cell_overlaps(grid.bp_array, v.event, v.phi) / w
    if v.k == v.m:
        idx = np.arange(n) + v.k * n
        return idx, pos + neg
    idx = np.concatenate((np.arange(n) + v.k * n, np.arange(n) + v.m * n))
    return idx, np.concatenate((pos, neg))


def cutting_plane_dependent(kind: str, part: Partition, phi_lo, phi_hi,
                            budget: PrivacyBudget, loss: LossFunction, *,
                            w: Optional[Callable[[float], float]] = None,
                            max_iter: int = 5000, tol: float = DEFAULT_TOL,
                            backend: str = "highs", multi_cut: bool = True,
                            time_limit: Optional[float] = None) -> DependentResult:
    """Row generation for the data-dependent bound LPs.

    The upper bound couples members ``k`` and ``m`` through the three shifts
    ``(m - k - 1, m - k, m - k + 1)`` (beta units); the lower bound only
    through ``m - k``.
    """
    t0 = time.perf_counter()
    beta = part.beta
    lo_u = as_fraction(phi_lo) / beta
    if lo_u.denominator != 1:
        raise InvalidArgument("output range must start on the noise grid")
    w_avg, w_inf = output_cell_weights(phi_lo, phi_hi, beta, w)
    K = len(w_avg)
    grid, universe = _grid(kind, part, budget)
    n = grid.n_cells
    c = _objective(kind, grid, loss)
    wk = w_avg if kind == "upper" else w_inf
    obj = float(beta) * np.concatenate([wk[k] * c for k in range(K)])
    model = LPModel(obj)
    for k in range(K):
        model.add_eq(np.arange(n) + k * n, np.ones(n), 1.0)
    solver = make_solver(model, backend)
    offsets = (-1, 0, 1) if kind == "upper" else (0,)
    pool = _CutPool()
    it = 0
    while True:
        it += 1
        sol = solver.solve()
        if sol.status is Status.INFEASIBLE:
            raise InfeasibleBound(f"dependent {kind} LP infeasible")
        if not sol.optimal:
            raise NumericFailure(f"dependent {kind} LP returned {sol.status.value}")
        x = sol.x.reshape(K, n)
        x = x / x.sum(axis=1, keepdims=True)
        fam = DependentNoise(grid, x, int(lo_u), w_avg, universe, budget, kind)
        viols = shortfall_by_pair(fam, budget, offsets)
        worst = viols[0]
        for v in viols[1:]:
            if v.shortfall > worst.shortfall:
                worst = v
        converged = worst.shortfall <= tol
        out_of_time = time_limit is not None and time.perf_counter() - t0 > time_limit
        if converged or it >= max_iter or out_of_time:
            break
        added = 0
        for v in _select(viols, tol, multi_cut):
            if pool.add(v):
                idx, val = _dep_row(grid, n, v, budget)
                model.add_row(idx, val, budget.delta)
                added += 1
        if not added:
            raise NumericFailure("dependent oracle repeated an existing cut")
    objective = float(obj @ x.ravel())
    fam = DependentNoise(grid, x, int(lo_u), w_avg, universe, budget, kind, objective)
    return DependentResult(kind, fam, objective, pool.cuts, it, converged, worst,
                           time.perf_counter() - t0)


def solve_dependent_pair(phi_lo, phi_hi, L: int, k: int, budget: PrivacyBudget,
                         loss: LossFunction, *, w: Optional[Callable[[float], float]] = None,
                         partition: Optional[Partition] = None, **kw) -> DependentPair:
    t0 = time.perf_counter()
    part = partition if partition is not None else uniform_partition(L, k, budget.delta_f)
    up = cutting_plane_dependent("upper", part, phi_lo, phi_hi, budget, loss, w=w, **kw)
    lo = cutting_plane_dependent("lower", part, phi_lo, phi_hi, budget, loss, w=w, **kw)
    return DependentPair(up, lo, time.perf_counter() - t0)
