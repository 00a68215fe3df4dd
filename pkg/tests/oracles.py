"""Independent reference computations shared by several test modules."""
import itertools
import math

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from dpnoise.bounds import _grid, _objective
from dpnoise.partition import Event, event_cell_overlaps


def all_events(lo, hi):
    """Every union of unit cells in [lo, hi), including the empty one."""
    width = hi - lo
    for mask in range(1 << width):
        yield Event(tuple((lo + i, lo + i + 1) for i in range(width) if mask >> i & 1))


def monolithic_value(kind, part, budget, loss):
    """Optimum of the bound LP with every event row written out up front.

    Exponential in the number of unit cells; meant for grids of at most a
    dozen cells. Solved by scipy's HiGHS wrapper, independently of the
    package's own LP layer. An infeasible model gives ``inf``.
    """
    grid, (lo, hi) = _grid(kind, part, budget)
    c = _objective(kind, grid, loss)
    kf = grid.units_per(budget.delta_f)
    w = grid.widths.astype(float)
    bps = grid.bp_array
    rows = []
    for phi in range(-kf, kf + 1):
        for ev in all_events(lo, hi):
            if ev.is_empty():
                continue
            pos = event_cell_overlaps(bps, ev, 0) / w
            neg = event_cell_overlaps(bps, ev, phi) / w
            rows.append(pos - budget.exp_eps * neg)
    a_ub = np.array(rows)
    res = linprog(c, A_ub=a_ub, b_ub=np.full(len(rows), budget.delta),
                  A_eq=np.ones((1, len(c))), b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status == 2:
        return math.inf
    assert res.status == 0, res.message
    return res.fun


def hockey_stick_value(kind, part, budget, loss):
    """Bound LP on a uniform grid, with each shift's events folded into one
    hockey-stick constraint through auxiliary variables.

    For a uniform grid the worst event at integer shift s is the set of
    cells where p_i > e^eps p_{i+s}, so sum_i max(0, p_i - e^eps p_{i+s}) <= delta
    over all integer shifts covers every event row. Polynomial size, so it
    reaches grids where enumeration cannot.
    """
    grid, (lo, hi) = _grid(kind, part, budget)
    assert np.all(grid.widths == 1)
    c = _objective(kind, grid, loss)
    n = grid.n_cells
    kf = grid.units_per(budget.delta_f)
    U = np.arange(lo - grid.lo, hi - grid.lo)
    ee = budget.exp_eps
    r_idx, c_idx, vals, rhs = [], [], [], []
    r = 0
    t = n
    for s in itertools.chain(range(-kf, 0), range(1, kf + 1)):
        first_t = t
        for i in U:
            r_idx += [r, r]
            c_idx += [i, t]
            vals += [1.0, -1.0]
            if 0 <= i + s < n:
                r_idx.append(r)
                c_idx.append(i + s)
                vals.append(-ee)
            rhs.append(0.0)
            r += 1
            t += 1
        r_idx += [r] * (t - first_t)
        c_idx += list(range(first_t, t))
        vals += [1.0] * (t - first_t)
        rhs.append(budget.delta)
        r += 1
    a = sparse.csr_matrix((vals, (r_idx, c_idx)), shape=(r, t))
    cost = np.concatenate([c, np.zeros(t - n)])
    a_eq = sparse.csr_matrix((np.ones(n), (np.zeros(n), np.arange(n))), shape=(1, t))
    res = linprog(cost, A_ub=a, b_ub=rhs, A_eq=a_eq, b_eq=[1.0], bounds=(0, None),
                  method="highs")
    assert res.status == 0, res.message
    return res.fun


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def random_instance(g, max_cells=13, max_units=16):
    """A random distribution on a random grid, sometimes with a padded universe.

    Weights are Dirichlet draws with a share of exact zeros and repeated
    values, so that ties and empty cells show up regularly.
    """
    from fractions import Fraction

    from dpnoise.distributions import NoiseDistribution
    from dpnoise.partition import Partition, PrivacyBudget, pad

    kf = int(g.integers(1, 4))
    n = int(g.integers(1, max_cells + 1))
    widths = g.integers(1, 3, size=n)
    while widths.sum() > max_units - (2 * kf if n > 1 else 0):
        widths = widths[:-1] if len(widths) > 1 else np.array([1])
    start = int(g.integers(-widths.sum(), 1))
    part = Partition(Fraction(1), tuple(np.cumsum(np.concatenate(([start], widths))).tolist()))
    budget = PrivacyBudget(float(g.uniform(0, 3)), float(g.uniform(0.01, 0.6)), kf)
    universe = None
    if g.random() < 0.3 and widths.sum() + 2 * kf <= max_units:
        universe = (part.lo, part.hi)
        part = pad(part, kf)
    w = g.dirichlet(np.ones(part.n_cells) * 0.7)
    w[g.random(part.n_cells) < 0.25] = 0.0
    if g.random() < 0.3:
        w = np.round(w, 1)
    if w.sum() == 0:
        w[0] = 1.0
    w = w / w.sum()
    return NoiseDistribution(part, w, budget, universe=universe), budget


def random_family(g, max_k=4, max_cells=6):
    from fractions import Fraction

    from dpnoise.distributions import DependentNoise
    from dpnoise.partition import Partition, PrivacyBudget

    K = int(g.integers(1, max_k + 1))
    n = int(g.integers(1, max_cells + 1))
    widths = g.integers(1, 3, size=n)
    while widths.sum() > 9:
        widths = widths[:-1]
    start = int(g.integers(-widths.sum(), 1))
    part = Partition(Fraction(1), tuple(np.cumsum(np.concatenate(([start], widths))).tolist()))
    budget = PrivacyBudget(float(g.uniform(0, 3)), float(g.uniform(0.01, 0.6)),
                           int(g.integers(1, 4)))
    w = g.dirichlet(np.ones(len(widths)) * 0.7, size=K)
    w[g.random(w.shape) < 0.2] = 0.0
    w[w.sum(axis=1) == 0, 0] = 1.0
    w = w / w.sum(axis=1, keepdims=True)
    return DependentNoise(part, w, 0, budget=budget), budget
