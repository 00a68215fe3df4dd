"""Private naive Bayes and private proximal coordinate descent.

Both learners touch the data only through a handful of released numbers
(counts, means and standard deviations for naive Bayes; coordinate
gradient sums for coordinate descent). Each released number is perturbed
by noise drawn from a mechanism built for that number's sensitivity, so
any :class:`~dpnoise.mechanisms.Mechanism`, including a piecewise
optimised one, can be plugged in through a *noise factory*: a callable
mapping a :class:`PrivacyBudget` (whose ``delta_f`` is the sensitivity)
to a mechanism, or to ``None`` for no noise at all.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special, stats

from . import mechanisms as mech
from .distributions import NoiseDistribution
from .loss import LossFunction, l1
from .partition import InvalidArgument, Partition, PrivacyBudget, as_fraction, uniform_partition

log = logging.getLogger(__name__)

NoiseFactory = Callable[[PrivacyBudget], Optional[mech.Mechanism]]

PROB_FLOOR = 1e-9
STD_FLOOR = 1e-6


class DegenerateClass(ValueError):
    """A declared class has no rows, so its statistics are undefined."""


# --------------------------------------------------------------------------
# data
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "numeric" or "categorical"
    lower: float = 0.0
    upper: float = 1.0
    levels: tuple = ()

    def __post_init__(self):
        if self.kind == "numeric":
            if not self.upper > self.lower:
                raise InvalidArgument(f"feature {self.name!r}: upper bound must exceed lower")
        elif self.kind == "categorical":
            if not self.levels:
                raise InvalidArgument(f"feature {self.name!r}: categorical needs levels")
        else:
            raise InvalidArgument(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class Dataset:
    """Rows ``X`` (categorical columns hold level indices) and labels ``y``.

    ``y`` holds indices into ``classes``. Numeric values are clamped to
    their declared bounds on construction.
    """

    features: tuple[Feature, ...]
    X: np.ndarray
    y: np.ndarray
    classes: tuple = (0, 1)

    def __post_init__(self):
        self.X = np.array(self.X, dtype=float, ndmin=2)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.shape != (len(self.y), len(self.features)):
            raise InvalidArgument(f"X has shape {self.X.shape}, expected "
                                  f"({len(self.y)}, {len(self.features)})")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.classes)):
            raise InvalidArgument("labels must index into classes")
        for j, f in enumerate(self.features):
            col = self.X[:, j]
            if f.kind == "numeric":
                clipped = np.clip(col, f.lower, f.upper)
                n_clip = int(np.count_nonzero(clipped != col))
                if n_clip:
                    log.info("clamped %d value(s) of %s into [%g, %g]", n_clip, f.name,
                             f.lower, f.upper)
                self.X[:, j] = clipped
            else:
                if np.any((col < 0) | (col >= len(f.levels)) | (col != np.round(col))):
                    raise InvalidArgument(f"feature {f.name!r}: level index out of range")

    @property
    def n(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features, self.X[idx], self.y[idx], self.classes)

    @property
    def numeric(self) -> list[int]:
        return [j for j, f in enumerate(self.features) if f.kind == "numeric"]

    @property
    def categorical(self) -> list[int]:
        return [j for j, f in enumerate(self.features) if f.kind == "categorical"]


def load_csv(path: Union[str, Path], schema_path: Union[str, Path]) -> Dataset:
    """Read a headered CSV described by a JSON schema.

    The schema looks like ``{"label": "y", "classes": [...], "features":
    [{"name": "age", "kind": "numeric", "bounds": [18, 90]},
    {"name": "colour", "kind": "categorical", "levels": ["r", "g"]}]}``.
    ``classes`` is optional and defaults to the sorted label values.
    """
    schema = json.loads(Path(schema_path).read_text())
    feats = []
    try:
        label = schema["label"]
        for spec in schema["features"]:
            if spec["kind"] == "numeric":
                lo, hi = spec["bounds"]
                feats.append(Feature(spec["name"], "numeric", float(lo), float(hi)))
            else:
                feats.append(Feature(spec["name"], spec["kind"],
                                     levels=tuple(str(v) for v in spec.get("levels", ()))))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"{schema_path}: malformed schema ({exc!r})") from None
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = {label, *(f.name for f in feats)} - set(rows[0] if rows else ())
    if rows and missing:
        raise InvalidArgument(f"{path}: missing column(s) {sorted(missing)}")
    classes = tuple(str(c) for c in schema.get("classes") or sorted({r[label] for r in rows}))
    cls_index = {c: i for i, c in enumerate(classes)}
    X = np.empty((len(rows), len(feats)))
    y = np.empty(len(rows), dtype=int)
    for i, r in enumerate(rows):
        if r[label] not in cls_index:
            raise InvalidArgument(f"row {i + 2}: label {r[label]!r} not among {classes}")
        y[i] = cls_index[r[label]]
        for j, f in enumerate(feats):
            raw = r[f.name]
            if f.kind == "numeric":
                X[i, j] = float(raw)
            else:
                try:
                    X[i, j] = f.levels.index(raw)
                except ValueError:
                    raise InvalidArgument(
                        f"row {i + 2}: {f.name}={raw!r} is not a declared level") from None
    return Dataset(tuple(feats), X, y, classes)


def two_gaussians(n: int, d: int = 2, separation: float = 2.0, bound: float = 6.0,
                  seed: int = 0) -> Dataset:
    """Balanced two-class data ``N(-mu, I)`` versus ``N(mu, I)``, ``|2 mu| = separation``.

    Features are declared on ``[-bound, bound]``. The Bayes risk is
    :func:`bayes_risk` up to the (negligible for the default bound) mass
    that clamping moves.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    mu = np.full(d, separation / (2 * math.sqrt(d)))
    X = rng.standard_normal((n, d)) + np.where(y[:, None] == 1, mu, -mu)
    feats = tuple(Feature(f"x{j}", "numeric", -bound, bound) for j in range(d))
    return Dataset(feats, X, y, (0, 1))


def bayes_risk(separation: float) -> float:
    """Error of the optimal classifier for :func:`two_gaussians`."""
    return float(stats.norm.cdf(-separation / 2))


def to_unit_box(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Features mapped into ``[-1, 1]`` (numeric by bounds, categorical one-hot), labels to +-1.

    Only the first two classes are used; any other class is folded into
    the negative label.
    """
    cols = []
    for j, f in enumerate(d.features):
        if f.kind == "numeric":
            cols.append(2 * (d.X[:, j] - f.lower) / f.width - 1)
        else:
            idx = d.X[:, j].astype(int)
            cols.extend((idx == lv).astype(float) for lv in range(len(f.levels)))
    X = np.column_stack(cols) if cols else np.zeros((d.n, 0))
    y = np.where(d.y == 1, 1.0, -1.0)
    return X, y


# --------------------------------------------------------------------------
# noise factories
# --------------------------------------------------------------------------
def no_noise(budget: PrivacyBudget) -> None:
    return None


def laplace_noise(budget: PrivacyBudget) -> mech.Mechanism:
    return mech.laplace(budget)


def gaussian_noise(budget: PrivacyBudget) -> mech.Mechanism:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", mech.OutOfValidity)
        return mech.gaussian(budget)


def analytic_gaussian_noise(budget: PrivacyBudget) -> mech.Mechanism:
    return mech.analytic_gaussian(budget)


def truncated_laplace_noise(budget: PrivacyBudget) -> mech.Mechanism:
    return mech.truncated_laplace(budget)


class OptimalNoise:
    """Noise factory backed by the upper-bound LP at unit sensitivity.

    The LP is solved once per ``(epsilon, delta)`` on a uniform grid with
    ``k`` cells per sensitivity; for sensitivity ``s`` the grid is
    stretched by ``s``, which maps a feasible distribution for unit
    sensitivity onto a feasible one for ``s``.
    """

    def __init__(self, loss: Optional[LossFunction] = None, k: int = 4,
                 radius: Optional[int] = None):
        self.loss = loss or l1()
        self.k = k
        self.radius = radius
        self._cache: dict[tuple, NoiseDistribution] = {}

    def unit_distribution(self, epsilon, delta) -> NoiseDistribution:
        from .bounds import cutting_plane, default_radius

        key = (as_fraction(epsilon), as_fraction(delta))
        if key not in self._cache:
            b = PrivacyBudget(epsilon, delta, 1)
            R = self.radius or default_radius(b)
            res = cutting_plane("upper", uniform_partition(R * self.k, self.k, 1), b, self.loss)
            self._cache[key] = res.distribution
        return self._cache[key]

    def __call__(self, budget: PrivacyBudget) -> mech.Mechanism:
        unit = self.unit_distribution(budget.epsilon, budget.delta)
        scale = as_fraction(budget.delta_f)
        part = Partition(unit.partition.beta * scale, unit.partition.breakpoints)
        return mech.piecewise(NoiseDistribution(part, unit.weights, budget, unit.loss))


NOISE = {
    "none": no_noise,
    "laplace": laplace_noise,
    "gaussian": gaussian_noise,
    "analytic_gaussian": analytic_gaussian_noise,
    "truncated_laplace": truncated_laplace_noise,
}


def noise_factory(name: str) -> NoiseFactory:
    if name == "optimal":
        return OptimalNoise()
    if name not in NOISE:
        raise InvalidArgument(f"unknown noise {name!r}; choose from {sorted(NOISE) + ['optimal']}")
    return NOISE[name]


def _draw(m: Optional[mech.Mechanism], rng: np.random.Generator, size=None):
    if m is None:
        return 0.0 if size is None else np.zeros(size)
    return mech.sample(m, rng, size)


# --------------------------------------------------------------------------
# naive Bayes
# --------------------------------------------------------------------------
@dataclass
class NBStatistics:
    """Everything naive Bayes needs from the data.

    The private fit consumes this summary and nothing else, which makes
    the set of released quantities explicit.
    """

    features: tuple[Feature, ...]
    classes: tuple
    n: int
    class_counts: np.ndarray                  # (C,)
    joint_counts: dict[int, np.ndarray]       # feature -> (C, levels)
    means: np.ndarray                         # (C, n_numeric)
    stds: np.ndarray                          # (C, n_numeric)
    numeric: list[int]

    @classmethod
    def of(cls, d: Dataset) -> "NBStatistics":
        C = len(d.classes)
        counts = np.bincount(d.y, minlength=C).astype(float)
        empty = [d.classes[c] for c in range(C) if counts[c] == 0]
        if empty:
            raise DegenerateClass(f"class(es) {empty} have no rows")
        joint = {}
        for j in d.categorical:
            L = len(d.features[j].levels)
            tab = np.zeros((C, L))
            np.add.at(tab, (d.y, d.X[:, j].astype(int)), 1.0)
            joint[j] = tab
        num = d.numeric
        means = np.zeros((C, len(num)))
        stds = np.zeros((C, len(num)))
        for c in range(C):
            rows = d.X[d.y == c][:, num]
            means[c] = rows.mean(axis=0)
            stds[c] = rows.std(axis=0)
        return cls(d.features, d.classes, d.n, counts, joint, means, stds, num)

    @property
    def n_released(self) -> int:
        C = len(self.classes)
        return C + sum(t.size for t in self.joint_counts.values()) + 2 * C * len(self.numeric)


@dataclass
class PrivateNBModel:
    features: tuple[Feature, ...]
    classes: tuple
    class_counts: np.ndarray
    joint_counts: dict[int, np.ndarray]
    means: np.ndarray
    stds: np.ndarray
    numeric: list[int]
    per_statistic: PrivacyBudget
    n_released: int

    @property
    def log_prior(self) -> np.ndarray:
        c = np.maximum(self.class_counts, PROB_FLOOR)
        return np.log(c / c.sum())


def count_sensitivity() -> Fraction:
    return Fraction(1)


def mean_sensitivity(f: Feature, n_c) -> Fraction:
    return as_fraction(f.width) / as_fraction(n_c)


def std_sensitivity(f: Feature, n_c) -> float:
    return f.width / math.sqrt(n_c)


def budget_shares(budget: PrivacyBudget, m: int) -> tuple[Fraction, Fraction]:
    """Exact ``(epsilon / m, delta / m)`` as fractions; ``m`` of them add up to the budget."""
    if m < 1:
        raise InvalidArgument("need at least one statistic")
    return as_fraction(budget.epsilon) / m, as_fraction(budget.delta) / m


def split_budget(budget: PrivacyBudget, m: int) -> PrivacyBudget:
    """Equal share of ``budget`` for each of ``m`` released statistics."""
    eps, delta = budget_shares(budget, m)
    return PrivacyBudget(float(eps), float(delta), budget.delta_f)


def nb_fit_private(d: Union[Dataset, NBStatistics], budget: PrivacyBudget,
                   noise: NoiseFactory, rng: Union[int, np.random.Generator, None] = 0,
                   ) -> PrivateNBModel:
    """Release noisy naive Bayes statistics and assemble a model from them.

    Counts have sensitivity one, per-class means ``(u - l) / n_c`` and
    per-class standard deviations ``(u - l) / sqrt(n_c)``. Each statistic
    receives an equal share of ``budget``; by basic composition the shares
    add up to ``budget`` exactly.
    """
    s = d if isinstance(d, NBStatistics) else NBStatistics.of(d)
    rng = np.random.default_rng(rng)
    share = split_budget(budget, s.n_released)

    def noisy(value: float, sensitivity) -> float:
        b = PrivacyBudget(share.epsilon, share.delta, sensitivity)
        return value + float(_draw(noise(b), rng))

    counts = np.array([noisy(v, count_sensitivity()) for v in s.class_counts])
    joint = {}
    for j, tab in s.joint_counts.items():
        joint[j] = np.array([[noisy(v, count_sensitivity()) for v in row] for row in tab])
    means = np.empty_like(s.means)
    stds = np.empty_like(s.stds)
    for c in range(len(s.classes)):
        n_c = int(s.class_counts[c])
        for q, j in enumerate(s.numeric):
            f = s.features[j]
            means[c, q] = noisy(s.means[c, q], mean_sensitivity(f, n_c))
            raw = noisy(s.stds[c, q], std_sensitivity(f, n_c))
            stds[c, q] = max(raw, STD_FLOOR * f.width)
    return PrivateNBModel(s.features, s.classes, counts, joint, means, stds, s.numeric,
                          share, s.n_released)


def nb_log_scores(m: PrivateNBModel, X: np.ndarray) -> np.ndarray:
    X = np.array(X, dtype=float, ndmin=2)
    if X.shape[1] != len(m.features):
        raise InvalidArgument(f"expected {len(m.features)} features, got {X.shape[1]}")
    scores = np.tile(m.log_prior, (len(X), 1))
    for j, tab in m.joint_counts.items():
        t = np.maximum(tab, PROB_FLOOR)
        logp = np.log(t / t.sum(axis=1, keepdims=True))  # (C, L)
        scores += logp[:, X[:, j].astype(int)].T
    if m.numeric:
        x = X[:, m.numeric]  # (n, q)
        z = (x[:, None, :] - m.means[None]) / m.stds[None]
        scores += (-0.5 * z**2 - np.log(m.stds)[None] - 0.5 * math.log(2 * math.pi)).sum(axis=2)
    return scores


def nb_predict(m: PrivateNBModel, X) -> np.ndarray:
    """Class index maximising the log posterior; ties go to the earlier class."""
    return np.argmax(nb_log_scores(m, X), axis=1)


# --------------------------------------------------------------------------
# proximal coordinate descent
# --------------------------------------------------------------------------
def prox_l1(w, lam):
    """Soft thresholding, the proximal map of ``lam * |v|``."""
    if np.any(np.asarray(lam) < 0):
        raise InvalidArgument("lambda must be non-negative")
    return np.sign(w) * np.maximum(np.abs(w) - lam, 0.0)


GRADIENT_SENSITIVITY = 2.0


@dataclass
class Hyperplane:
    h: np.ndarray
    iterations: int
    noise_log: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    per_update: Optional[PrivacyBudget] = None

    def composed_budget(self) -> tuple[float, float]:
        """Naive composition of the per-update budget over all noisy updates."""
        if self.per_update is None:
            return (0.0, 0.0)
        m = len(self.noise_log)
        return (m * self.per_update.epsilon, m * self.per_update.delta)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(X) @ self.h >= 0, 1.0, -1.0)


def logistic_objective(h: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    margins = y * (X @ h)
    return float(np.mean(np.logaddexp(0.0, -margins)) + lam * np.abs(h).sum())


def pcd_fit_private(X: np.ndarray, y: np.ndarray, budget: PrivacyBudget, noise: NoiseFactory,
                    T: int = 100, K: Optional[int] = None, lam: float = 1e-8,
                    seed: int = 0, init_scale: float = 0.01,
                    track_objective: bool = False) -> Hyperplane:
    """Proximal coordinate descent for l1-regularised logistic regression.

    Each of the ``T`` iterations updates ``K`` random coordinates one after
    the other and then averages the ``K`` intermediate iterates. Every
    coordinate gradient sum is perturbed with noise for sensitivity two;
    ``budget`` is spent on each update separately.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if np.abs(X).max(initial=0.0) > 1 + 1e-12:
        raise InvalidArgument("features must satisfy |x| <= 1; see to_unit_box")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidArgument("labels must be -1 or +1")
    K = max(1, math.ceil(d / 4)) if K is None else int(K)
    rng = np.random.default_rng(seed)
    per_update = PrivacyBudget(budget.epsilon, budget.delta, GRADIENT_SENSITIVITY)
    m = noise(per_update)
    h = rng.uniform(-init_scale, init_scale, d)
    out = Hyperplane(h, 0, per_update=per_update if m is not None else None)
    if track_objective:
        out.objective_trace.append(logistic_objective(h, X, y, lam))
    for t in range(T):
        coords = rng.integers(0, d, K)
        cur = h.copy()
        acc = np.zeros(d)
        for l in coords:
            margins = y * (X @ cur)
            weights = special.expit(-margins)  # e^{-m} / (1 + e^{-m})
            g = float(np.sum(weights * (-y * X[:, l])))
            assert -n <= g <= n
            z = float(_draw(m, rng))
            out.noise_log.append(z)
            cur[l] = prox_l1(cur[l] - (g + z) / n, lam)
            acc += cur
        h = acc / K
        if track_objective:
            out.objective_trace.append(logistic_objective(h, X, y, lam))
    out.h = h
    out.iterations = T
    if m is None:
        out.noise_log = []
    return out


# --------------------------------------------------------------------------
# repeated-trial evaluation
# --------------------------------------------------------------------------
@dataclass
class ErrorRow:
    mechanism: str
    in_sample: float
    out_of_sample: float
    stderr: float
    trials: int

    CSV_FIELDS = ("mechanism", "in_sample", "out_of_sample", "stderr", "trials")

    def as_dict(self) -> dict:
        g = lambda v: f"{v:.12g}"  # noqa: E731
        return {"mechanism": self.mechanism, "in_sample": g(self.in_sample),
                "out_of_sample": g(self.out_of_sample), "stderr": g(self.stderr),
                "trials": self.trials}


def _nb_errors(train: Dataset, test: Dataset, budget, noise, rng):
    stats_ = NBStatistics.of(train)
    m = nb_fit_private(stats_, budget, noise, rng)
    e_in = float(np.mean(nb_predict(m, train.X) != train.y))
    e_out = float(np.mean(nb_predict(m, test.X) != test.y))
    return e_in, e_out


def _pcd_errors(train: Dataset, test: Dataset, budget, noise, rng, **kw):
    Xtr, ytr = to_unit_box(train)
    Xte, yte = to_unit_box(test)
    seed = int(rng.integers(2**63))
    hp = pcd_fit_private(Xtr, ytr, budget, noise, seed=seed, **kw)
    return (float(np.mean(hp.predict(Xtr) != ytr)), float(np.mean(hp.predict(Xte) != yte)))


def evaluate(d: Dataset, noises: dict[str, NoiseFactory], budget: PrivacyBudget, *,
             learner: str = "nb", splits: int = 5, repetitions: int = 20,
             test_fraction: float = 0.2, seed: int = 0, **learner_kw) -> list[ErrorRow]:
    """Mean in-sample and out-of-sample error per noise factory.

    Splits are drawn from ``seed``; every (split, repetition) pair gets its
    own generator derived from ``(seed, split, repetition)``, so the noise
    draws do not depend on the order of the mechanisms. ``stderr`` is the
    standard error of the out-of-sample mean over all trials.
    """
    if learner not in ("nb", "pcd"):
        raise InvalidArgument(f"learner must be 'nb' or 'pcd', got {learner!r}")
    if not 0 < test_fraction < 1:
        raise InvalidArgument("test_fraction must lie in (0, 1)")
    split_rng = np.random.default_rng(seed)
    n_test = max(1, int(round(test_fraction * d.n)))
    results: dict[str, list[tuple[float, float]]] = {name: [] for name in noises}
    for s in range(splits):
        perm = split_rng.permutation(d.n)
        test, train = d.subset(perm[:n_test]), d.subset(perm[n_test:])
        for name, noise in noises.items():
            reps = 1 if noise is no_noise else repetitions
            for r in range(reps):
                rng = np.random.default_rng([seed, s, r])
                if learner == "nb":
                    results[name].append(_nb_errors(train, test, budget, noise, rng))
                else:
                    results[name].append(_pcd_errors(train, test, budget, noise, rng,
                                                     **learner_kw))
    rows = []
    for name, errs in results.items():
        a = np.array(errs)
        se = float(a[:, 1].std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
        rows.append(ErrorRow(name, float(a[:, 0].mean()), float(a[:, 1].mean()), se, len(a)))
    return rows


def error_table_csv(rows: Sequence[ErrorRow]) -> str:
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ErrorRow.CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r.as_dict())
    return buf.getvalue()
