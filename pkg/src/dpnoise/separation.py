"""Worst-case privacy constraints for piecewise-constant noise.

For a shift ``phi`` the privacy shortfall of an event ``A`` is

    V(phi, A) = P[X in A] - e^eps * P[X + phi in A] - delta,

where ``X`` has the piecewise-constant density of the distribution. With
``f`` the density and ``g(x) = f(x - phi)`` its shifted copy, the best
event for a fixed shift is ``{f > e^eps * g}``. Both densities are
constant between the breakpoints of the grid and of the shifted grid.
A single merge of the two breakpoint lists therefore yields every piece
on which the sign is fixed. Between two consecutive shifts at which
breakpoints of the two grids collide, the maximal value is affine in
``phi``. That leaves only the finite candidate set of breakpoint
differences (plus the extreme shifts ``+-delta_f``) to scan.

Lower-bound distributions live on a padded grid. Their events stay
inside the unpadded core (``universe``), so only the core cells count
positively while every padded cell can still cover ``A`` after the shift.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distributions import DependentNoise, NoiseDistribution
from .partition import Event, InvalidArgument, PrivacyBudget, overlap_units

DEFAULT_TOL = 1e-9
BRUTE_FORCE_MAX_UNITS = 20


@dataclass(frozen=True)
class Violation:
    phi: int  # shift in beta units
    event: Event
    shortfall: float
    k: Optional[int] = None  # source output cell (dependent case)
    m: Optional[int] = None  # target output cell (dependent case)

    def to_dict(self) -> dict:
        d = {"phi_units": self.phi, "segments": self.event.to_list(),
             "shortfall": self.shortfall}
        if self.k is not None:
            d.update(k=self.k, m=self.m)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def key(self) -> tuple:
        return (self.k, self.m, self.phi, self.event.segments)


@dataclass(frozen=True)
class AuditResult:
    feasible: bool
    worst: Violation
    tol: float


# --------------------------------------------------------------------------
# direct evaluation
# --------------------------------------------------------------------------
def _mass_on(bps: np.ndarray, dens: np.ndarray, a: Event, shift: int) -> float:
    """P[X + shift in a] for the density ``dens`` on breakpoints ``bps``."""
    from .partition import event_cell_overlaps

    ov = event_cell_overlaps(bps, a, shift)
    return float(np.dot(dens, ov))


def shortfall_of(dist: NoiseDistribution, phi: int, a: Event, budget: PrivacyBudget,
                 target: Optional[NoiseDistribution] = None) -> float:
    """V(phi, a) evaluated from scratch through cell overlaps.

    ``target`` replaces the shifted distribution (the data-dependent case
    compares member ``k`` with a shifted member ``m``).
    """
    _check_shift(dist, phi, budget)
    lo, hi = dist.universe
    if a.segments and (a.segments[0][0] < lo or a.segments[-1][1] > hi):
        raise InvalidArgument("event leaves the universe of the distribution")
    other = dist if target is None else target
    pos = _mass_on(dist.partition.bp_array, dist.densities, a, 0)
    neg = _mass_on(other.partition.bp_array, other.densities, a, phi)
    return pos - budget.exp_eps * neg - budget.delta


def _check_shift(dist: NoiseDistribution, phi: int, budget: PrivacyBudget) -> int:
    kf = dist.partition.units_per(budget.delta_f)
    if abs(phi) > kf:
        raise InvalidArgument(f"shift {phi} beta units exceeds the sensitivity ({kf} units)")
    return kf


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------
def _sweep(pos_bps, pos_dens, neg_bps, neg_dens, phi, ee, delta):
    """Best event and its shortfall for one shift, by merging breakpoints.

    ``pos_*`` describe the density counted positively (its extent is the
    universe), ``neg_*`` the density that is shifted by ``phi``.
    """
    shifted = neg_bps + phi
    n_pos = len(pos_bps)
    merged = np.concatenate((pos_bps, shifted))
    order = np.argsort(merged, kind="stable")  # merge of two sorted runs
    pts = merged[order]
    from_pos = order < n_pos
    # number of breakpoints of each grid at or before every merged point
    c_pos = np.cumsum(from_pos)
    c_neg = np.cumsum(~from_pos)
    last = np.ones(len(pts), dtype=bool)
    last[:-1] = pts[1:] != pts[:-1]
    pts, c_pos, c_neg = pts[last], c_pos[last], c_neg[last]
    # segment i = [pts[i], pts[i+1]); cell index = count - 1
    ip = c_pos[:-1] - 1
    ineg = c_neg[:-1] - 1
    inside = (ip >= 0) & (ip < len(pos_dens))
    if not inside.any():
        return -delta, Event()
    f = np.where(inside, pos_dens[np.clip(ip, 0, len(pos_dens) - 1)], 0.0)
    covered = (ineg >= 0) & (ineg < len(neg_dens))
    g = np.where(covered, neg_dens[np.clip(ineg, 0, len(neg_dens) - 1)], 0.0)
    diff = f - ee * g
    take = inside & (diff > 0)
    lengths = np.diff(pts)
    value = float(np.dot(diff[take], lengths[take])) - delta
    segs = np.stack((pts[:-1][take], pts[1:][take]), axis=1)
    return value, Event(tuple(map(tuple, segs.tolist())))


def _pairs(pos_bps, pos_dens, neg_bps, neg_dens, phi, ee, delta):
    """Cell-by-cell-pair construction of the same event, O(N^2) per shift.

    Kept as a slow second opinion for the sweep.
    """
    nlo, nhi = int(neg_bps[0]) + phi, int(neg_bps[-1]) + phi
    pieces = []
    value = -delta
    for j in range(len(pos_dens)):
        a, b = int(pos_bps[j]), int(pos_bps[j + 1])
        if pos_dens[j] > 0:
            # parts of the cell not covered by any shifted cell
            for s, e in ((a, min(b, nlo)), (max(a, nhi), b)):
                if s < e:
                    pieces.append((s, e))
                    value += pos_dens[j] * (e - s)
        for jj in range(len(neg_dens)):
            s = max(a, int(neg_bps[jj]) + phi)
            e = min(b, int(neg_bps[jj + 1]) + phi)
            if s >= e:
                continue
            d = pos_dens[j] - ee * neg_dens[jj]
            if d > 0:
                pieces.append((s, e))
                value += d * (e - s)
    return value, Event(tuple(pieces))


def _batch(pos_bps, pos_dens, neg_bps, neg_dens, shifts, ee, delta, chunk_cells=1 << 21):
    """Unit-by-unit evaluation of many shifts at once.

    Every beta unit of the universe either joins the event or not, by the
    sign of its own density difference, so expanding both densities to
    unit resolution turns a whole batch of shifts into one array
    operation. Returns ``(values, events)`` in the order of ``shifts``.
    """
    lo, hi = int(pos_bps[0]), int(pos_bps[-1])
    U = hi - lo
    f = np.repeat(pos_dens, np.diff(pos_bps))
    glo = int(neg_bps[0])
    g = np.concatenate((np.repeat(neg_dens, np.diff(neg_bps)), [0.0]))
    G = len(g) - 1
    units = np.arange(lo, hi, dtype=np.int64)
    shifts = np.asarray(shifts, dtype=np.int64)
    values = np.empty(len(shifts))
    events: list[Event] = []
    step = max(1, chunk_cells // max(U, 1))
    for c0 in range(0, len(shifts), step):
        s = shifts[c0:c0 + step]
        idx = units[None, :] - s[:, None] - glo
        idx = np.where((idx >= 0) & (idx < G), idx, G)  # G points at the appended zero
        diff = f[None, :] - ee * g[idx]
        take = diff > 0
        values[c0:c0 + len(s)] = np.where(take, diff, 0.0).sum(axis=1) - delta
        edges = np.diff(np.pad(take, ((0, 0), (1, 1))).astype(np.int8), axis=1)
        r_start, c_start = np.nonzero(edges == 1)
        _, c_end = np.nonzero(edges == -1)
        bounds = np.searchsorted(r_start, np.arange(len(s) + 1))
        a_all = (c_start + lo).tolist()
        b_all = (c_end + lo).tolist()
        for r in range(len(s)):
            i0, i1 = bounds[r], bounds[r + 1]
            events.append(Event._presorted(tuple(zip(a_all[i0:i1], b_all[i0:i1]))))
    return values, events


def candidate_shifts(pos_bps: np.ndarray, neg_bps: np.ndarray, kf: int) -> np.ndarray:
    """Breakpoint differences within ``[-kf, kf]`` together with ``+-kf``."""
    pos = np.asarray(pos_bps, dtype=np.int64)
    neg = np.asarray(neg_bps, dtype=np.int64)
    found = [np.array([-kf, kf], dtype=np.int64)]
    if 2 * kf + 1 <= 4 * len(pos):
        # dense case: test every admissible integer shift for membership
        shifts = np.arange(-kf, kf + 1, dtype=np.int64)
        neg_set = neg
        hit = np.zeros(len(shifts), dtype=bool)
        for i, s in enumerate(shifts):
            idx = np.searchsorted(neg_set, pos - s)
            idx = np.minimum(idx, len(neg_set) - 1)
            hit[i] = bool(np.any(neg_set[idx] == pos - s))
        found.append(shifts[hit])
    else:
        for chunk in np.array_split(pos, max(1, len(pos) // 256)):
            d = (chunk[:, None] - neg[None, :]).ravel()
            found.append(d[np.abs(d) <= kf])
    return np.unique(np.concatenate(found))


def _scan(jobs_list, method, pos_bps, pos_dens, neg_bps, neg_dens, ee, delta, jobs):
    if method == "batch":
        values, events = _batch(pos_bps, pos_dens, neg_bps, neg_dens, jobs_list, ee, delta)
        return list(zip(values.tolist(), events))
    fn = _sweep if method == "sweep" else _pairs

    def run(phi):
        return fn(pos_bps, pos_dens, neg_bps, neg_dens, int(phi), ee, delta)

    if jobs > 1 and len(jobs_list) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(run, jobs_list))
    return [run(phi) for phi in jobs_list]


ORACLE_METHODS = ("batch", "sweep", "pairs")


def shortfall_by_shift(dist: NoiseDistribution, budget: PrivacyBudget, *,
                       method: str = "batch", jobs: int = 1) -> list[Violation]:
    """The best event for every candidate shift, in increasing shift order.

    ``method`` picks how each shift is evaluated: ``"sweep"`` merges the
    two breakpoint lists, ``"batch"`` does the same decision unit by unit
    for all shifts at once (fastest unless the grid spans very many
    units), ``"pairs"`` is the quadratic cell-pair loop.
    """
    if method not in ORACLE_METHODS:
        raise InvalidArgument(f"unknown oracle method {method!r}")
    kf = dist.partition.units_per(budget.delta_f)
    pos_bps, pos_dens = dist.restricted_to_universe()
    neg_bps, neg_dens = dist.partition.bp_array, dist.densities
    shifts = candidate_shifts(pos_bps, neg_bps, kf)
    results = _scan(shifts, method, pos_bps, pos_dens, neg_bps, neg_dens,
                    budget.exp_eps, budget.delta, jobs)
    return [Violation(int(phi), ev, val) for phi, (val, ev) in zip(shifts, results)]


def _best(viols: Sequence[Violation]) -> Violation:
    best = viols[0]
    for v in viols[1:]:
        if v.shortfall > best.shortfall:  # strict: earliest in scan order wins ties
            best = v
    return best


def max_shortfall(dist: NoiseDistribution, budget: PrivacyBudget, *,
                  method: str = "batch", jobs: int = 1) -> Violation:
    """The constraint with the largest privacy shortfall.

    ``method="pairs"`` swaps the merge for the quadratic cell-pair loop;
    both produce the same event.
    """
    return _best(shortfall_by_shift(dist, budget, method=method, jobs=jobs))


def audit(dist: NoiseDistribution, budget: PrivacyBudget, tol: float = DEFAULT_TOL,
          jobs: int = 1) -> AuditResult:
    worst = max_shortfall(dist, budget, jobs=jobs)
    return AuditResult(worst.shortfall <= tol, worst, tol)


# --------------------------------------------------------------------------
# data-dependent family
# --------------------------------------------------------------------------
def dependent_shifts(k: int, m: int, offsets: Sequence[int], kf: int) -> list[int]:
    return sorted({m - k + o for o in offsets if abs(m - k + o) <= kf})


def shortfall_by_pair(fam: DependentNoise, budget: PrivacyBudget,
                      offsets: Sequence[int] = (-1, 0, 1)) -> list[Violation]:
    """Best event for every admissible (k, m, phi), scanning k, then m, then phi."""
    kf = fam.partition.units_per(budget.delta_f)
    ee, delta = budget.exp_eps, budget.delta
    part = fam.partition
    neg_bps = part.bp_array
    dens = fam.weights / part.widths[None, :]
    lo, hi = fam.universe
    i0 = int(np.searchsorted(neg_bps, lo))
    i1 = int(np.searchsorted(neg_bps, hi))
    pos_bps = neg_bps[i0:i1 + 1]
    out = []
    for k in range(fam.K):
        for m in range(fam.K):
            for phi in dependent_shifts(k, m, offsets, kf):
                val, ev = _sweep(pos_bps, dens[k, i0:i1], neg_bps, dens[m], phi, ee, delta)
                out.append(Violation(phi, ev, val, k, m))
    return out


def max_shortfall_dependent(fam: DependentNoise, budget: PrivacyBudget,
                            offsets: Sequence[int] = (-1, 0, 1)) -> Violation:
    """Most violated pair constraint; ``offsets`` (0,) gives the lower-bound rows."""
    viols = shortfall_by_pair(fam, budget, offsets)
    if not viols:
        raise InvalidArgument("no admissible (k, m, phi) triple")
    return _best(viols)


def dependent_shortfall_of(fam: DependentNoise, k: int, m: int, phi: int, a: Event,
                           budget: PrivacyBudget) -> float:
    return shortfall_of(fam.member(k), phi, a, budget, target=fam.member(m))


# --------------------------------------------------------------------------
# exhaustive reference
# --------------------------------------------------------------------------
def _unit_contributions(bps, dens_pos, dens_neg, lo, hi, phi, ee, part):
    """Contribution of each unit cell ``[lo+i, lo+i+1)`` via scalar overlaps."""
    out = np.zeros(hi - lo)
    for i in range(hi - lo):
        u = Event(((lo + i, lo + i + 1),))
        s = 0.0
        for j in range(part.n_cells):
            ov0 = overlap_units(part, j, u, 0)
            ov1 = overlap_units(part, j, u, phi)
            if ov0:
                s += dens_pos[j] * ov0
            if ov1:
                s -= ee * dens_neg[j] * ov1
        out[i] = s
    return out


def _subset_argmax(contrib: np.ndarray) -> tuple[float, int]:
    """Max of all 2^W subset sums and the lowest bitmask attaining it."""
    sums = np.zeros(1)
    for c in contrib:
        sums = np.concatenate((sums, sums + c))
    idx = int(np.argmax(sums))
    return float(sums[idx]), idx


def _mask_event(mask: int, lo: int, width: int) -> Event:
    return Event(tuple((lo + i, lo + i + 1) for i in range(width) if mask >> i & 1))


def brute_force(dist: NoiseDistribution, budget: PrivacyBudget,
                shifts: Optional[Sequence[int]] = None) -> Violation:
    """Enumerate every union of unit cells in the universe and every integer shift.

    Exponential in the universe width; refuses widths above 20 units.
    """
    lo, hi = dist.universe
    if hi - lo > BRUTE_FORCE_MAX_UNITS:
        raise InvalidArgument(f"brute force limited to {BRUTE_FORCE_MAX_UNITS} unit cells")
    kf = dist.partition.units_per(budget.delta_f)
    part = dist.partition
    dens = dist.densities
    pos = dens.copy()
    bps = part.bp_array
    pos[(bps[:-1] < lo) | (bps[1:] > hi)] = 0.0
    shifts = range(-kf, kf + 1) if shifts is None else shifts
    best = None
    for phi in shifts:
        contrib = _unit_contributions(bps, pos, dens, lo, hi, int(phi), budget.exp_eps, part)
        val, mask = _subset_argmax(contrib)
        v = Violation(int(phi), _mask_event(mask, lo, hi - lo), val - budget.delta)
        if best is None or v.shortfall > best.shortfall:
            best = v
    return best


def brute_force_dependent(fam: DependentNoise, budget: PrivacyBudget,
                          offsets: Sequence[int] = (-1, 0, 1)) -> Violation:
    lo, hi = fam.universe
    if hi - lo > BRUTE_FORCE_MAX_UNITS:
        raise InvalidArgument(f"brute force limited to {BRUTE_FORCE_MAX_UNITS} unit cells")
    kf = fam.partition.units_per(budget.delta_f)
    part = fam.partition
    bps = part.bp_array
    dens = fam.weights / part.widths[None, :]
    outside = (bps[:-1] < lo) | (bps[1:] > hi)
    best = None
    for k in range(fam.K):
        pos = np.where(outside, 0.0, dens[k])
        for m in range(fam.K):
            for phi in dependent_shifts(k, m, offsets, kf):
                contrib = _unit_contributions(bps, pos, dens[m], lo, hi, phi,
                                              budget.exp_eps, part)
                val, mask = _subset_argmax(contrib)
                v = Violation(phi, _mask_event(mask, lo, hi - lo), val - budget.delta, k, m)
                if best is None or v.shortfall > best.shortfall:
                    best = v
    return best
