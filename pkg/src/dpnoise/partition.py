"""Exact grid arithmetic for piecewise-constant noise densities.

Every endpoint on the grid is an integer count of the granularity ``beta``;
``beta`` itself is a :class:`fractions.Fraction`. Overlaps are therefore
computed in integers and only converted to floats at the LP boundary.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class InvalidArgument(ValueError):
    """Raised when an operation receives arguments outside its domain."""


def as_fraction(x) -> Fraction:
    """Convert ints, floats, decimal strings or ``"a/b"`` strings to a Fraction.

    Floats go through ``limit_denominator`` so that ``0.1`` becomes 1/10
    rather than its binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise InvalidArgument(f"non-finite value {x!r}")
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class PrivacyBudget:
    """The (epsilon, delta) pair together with the query sensitivity.

    ``delta >= 1`` and ``epsilon == 0`` are accepted because several
    degenerate checks (vacuous constraints, the staircase witness at
    epsilon = 0) need them; front ends that want the strict domain should
    call :meth:`check_strict`.
    """

    epsilon: float
    delta: float
    delta_f: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "delta_f", as_fraction(self.delta_f))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "delta", float(self.delta))
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise InvalidArgument(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not self.delta > 0:
            raise InvalidArgument(f"delta must be positive, got {self.delta}")
        if self.delta_f <= 0:
            raise InvalidArgument(f"delta_f must be positive, got {self.delta_f}")

    def check_strict(self) -> "PrivacyBudget":
        if not (self.epsilon > 0 and 0 < self.delta < 1):
            raise InvalidArgument(
                f"need epsilon > 0 and 0 < delta < 1, got ({self.epsilon}, {self.delta})")
        return self

    @property
    def exp_eps(self) -> float:
        return math.exp(self.epsilon)


@dataclass(frozen=True)
class Event:
    """A finite union of half-open integer intervals ``[a, b)`` in beta units."""

    segments: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", _normalize(self.segments))

    @classmethod
    def from_segments(cls, segs: Iterable[Sequence[int]]) -> "Event":
        return cls(tuple((int(a), int(b)) for a, b in segs))

    @classmethod
    def _presorted(cls, segs: tuple) -> "Event":
        """Skip normalisation for segments already sorted, disjoint and non-adjacent."""
        ev = object.__new__(cls)
        object.__setattr__(ev, "segments", segs)
        return ev

    @property
    def units(self) -> int:
        """Total length in beta units."""
        return sum(b - a for a, b in self.segments)

    def measure(self, beta: Fraction) -> Fraction:
        return self.units * beta

    def is_empty(self) -> bool:
        return not self.segments

    def scaled(self, k: int) -> "Event":
        """The same real set expressed on a grid ``k`` times finer."""
        return Event(tuple((a * k, b * k) for a, b in self.segments))

    def shifted(self, t: int) -> "Event":
        return Event(tuple((a + t, b + t) for a, b in self.segments))

    def union(self, other: "Event") -> "Event":
        return Event(self.segments + other.segments)

    def intersect_interval(self, lo: int, hi: int) -> "Event":
        out = []
        for a, b in self.segments:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 < b2:
                out.append((a2, b2))
        return Event(tuple(out))

    def contains_interval(self, lo: int, hi: int) -> bool:
        return any(a <= lo and hi <= b for a, b in self.segments)

    def to_list(self) -> list[list[int]]:
        return [[a, b] for a, b in self.segments]


def _normalize(segs) -> tuple[tuple[int, int], ...]:
    cleaned = sorted((int(a), int(b)) for a, b in segs if int(b) > int(a))
    merged: list[list[int]] = []
    for a, b in cleaned:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class Partition:
    """Cells ``[pi_j * beta, pi_{j+1} * beta)`` for strictly increasing integers ``pi``."""

    beta: Fraction
    breakpoints: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", as_fraction(self.beta))
        bps = tuple(int(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        if self.beta <= 0:
            raise InvalidArgument("beta must be positive")
        if len(bps) < 2:
            raise InvalidArgument("a partition needs at least one cell")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise InvalidArgument("breakpoints must be strictly increasing")

    @property
    def n_cells(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def lo(self) -> int:
        return self.breakpoints[0]

    @property
    def hi(self) -> int:
        return self.breakpoints[-1]

    @property
    def bp_array(self) -> np.ndarray:
        return np.asarray(self.breakpoints, dtype=np.int64)

    @property
    def widths(self) -> np.ndarray:
        """Cell widths in beta units."""
        return np.diff(self.bp_array)

    def cell(self, j: int) -> tuple[int, int]:
        if not 0 <= j < self.n_cells:
            raise InvalidArgument(f"cell index {j} outside [0, {self.n_cells})")
        return self.breakpoints[j], self.breakpoints[j + 1]

    def cell_real(self, j: int) -> tuple[Fraction, Fraction]:
        a, b = self.cell(j)
        return a * self.beta, b * self.beta

    def support(self) -> Event:
        return Event(((self.lo, self.hi),))

    def units_per(self, delta_f) -> int:
        """``delta_f / beta`` as an integer; raises if beta does not divide it."""
        q = as_fraction(delta_f) / self.beta
        if q.denominator != 1:
            raise InvalidArgument(f"beta={self.beta} does not divide delta_f={delta_f}")
        return int(q)

    def to_dict(self) -> dict:
        return {"beta_num": self.beta.numerator, "beta_den": self.beta.denominator,
                "breakpoints": list(self.breakpoints)}

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        try:
            beta = Fraction(int(d["beta_num"]), int(d["beta_den"]))
            return cls(beta, tuple(int(b) for b in d["breakpoints"]))
        except KeyError as exc:
            raise InvalidArgument(f"partition JSON missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def uniform_partition(L: int, k: int, delta_f=1) -> Partition:
    """Unit cells ``-L, ..., L`` at ``beta = delta_f / k``.

    ``L = 0`` is allowed and yields the single cell ``[0, beta)``.
    """
    if int(L) != L or L < 0:
        raise InvalidArgument(f"L must be a non-negative integer, got {L}")
    if int(k) != k or k < 1:
        raise InvalidArgument(f"k must be a positive integer, got {k}")
    beta = as_fraction(delta_f) / int(k)
    return Partition(beta, tuple(range(-int(L), int(L) + 2)))


def geometric_partition(L: int, k: int, delta_f=1, core_units: int | None = None,
                        max_width: int | None = None) -> Partition:
    """Unit cells near zero, widths doubling outward, clipped to ``[-L, L+1)``.

    ``core_units`` is the half-width of the fine region in beta units; it
    defaults to ``2 k`` (two sensitivities). Outside it the widths double
    until they reach ``max_width`` units (no cap by default). Breakpoints
    are symmetric about ``1/2`` so the grid is a mirror image of itself
    under ``x -> -x``.
    """
    base = uniform_partition(L, k, delta_f)
    core = 2 * int(k) if core_units is None else int(core_units)
    core = min(core, int(L))
    right = list(range(1, core + 2))  # positive breakpoints 1 .. core+1
    width = 2
    while right[-1] < L + 1:
        right.append(min(right[-1] + width, L + 1))
        width *= 2
        if max_width is not None:
            width = min(width, max(int(max_width), 1))
    # mirror around 1/2: breakpoint b maps to 1 - b
    left = sorted({1 - b for b in right})
    bps = sorted(set(left) | set(right))
    return Partition(base.beta, tuple(bps))


def refine(p: Partition, k: int) -> Partition:
    """Split every cell into ``k`` equal cells."""
    if int(k) != k or k < 1:
        raise InvalidArgument(f"refinement factor must be a positive integer, got {k}")
    k = int(k)
    if k == 1:
        return p
    bps = []
    for a, b in zip(p.breakpoints, p.breakpoints[1:]):
        bps.extend(range(a * k, b * k, (b - a)))
    bps.append(p.hi * k)
    return Partition(p.beta / k, tuple(bps))


def pad(p: Partition, t: int) -> Partition:
    """Add ``t`` unit cells before the first and after the last breakpoint."""
    if int(t) != t or t < 1:
        raise InvalidArgument(f"padding must be a positive integer, got {t}")
    t = int(t)
    bps = tuple(range(p.lo - t, p.lo)) + p.breakpoints + tuple(range(p.hi + 1, p.hi + t + 1))
    return Partition(p.beta, bps)


def overlap_units(p: Partition, j: int, a: Event, shift: int = 0) -> int:
    """Length in beta units of ``a`` intersected with cell ``j`` shifted by ``shift``."""
    lo, hi = p.cell(j)
    lo += shift
    hi += shift
    total = 0
    for s, e in a.segments:
        if e <= lo:
            continue
        if s >= hi:
            break
        total += min(e, hi) - max(s, lo)
    return total


def overlap(p: Partition, j: int, a: Event, shift: int = 0) -> Fraction:
    """Exact Lebesgue measure of ``a`` intersected with the shifted cell ``j``."""
    return overlap_units(p, j, a, shift) * p.beta


def event_cell_overlaps(breakpoints: np.ndarray, a: Event, shift: int = 0) -> np.ndarray:
    """Vectorised ``overlap_units`` for all cells at once (integer array).

    Uses the cumulative measure ``M(x) = |a intersected with (-inf, x)|``, which
    is piecewise linear with kinks at the segment endpoints.
    """
    bps = np.asarray(breakpoints, dtype=np.int64) + int(shift)
    if not a.segments:
        return np.zeros(len(bps) - 1, dtype=np.int64)
    seg = np.asarray(a.segments, dtype=np.int64)
    starts, ends = seg[:, 0], seg[:, 1]
    cum = np.concatenate(([0], np.cumsum(ends - starts)))

    # M(x) = cum[i] + clip(x - starts[i], 0, len_i) where i = last segment with start <= x
    idx = np.searchsorted(starts, bps, side="right") - 1
    m = np.zeros(len(bps), dtype=np.int64)
    ok = idx >= 0
    i = idx[ok]
    m[ok] = cum[i] + np.minimum(bps[ok] - starts[i], ends[i] - starts[i])
    return np.diff(m)
