"""A small LP layer: models that grow by rows, and two interchangeable solvers.

``RevisedSimplex`` is a dense two-phase revised simplex written for this
package (Dantzig pricing, Bland's rule once degenerate pivots pile up).
``HighsSolver`` drives the HiGHS library through ``highspy`` and keeps the
solver instance alive between solves, so rows appended by the cutting
plane loop are re-optimised from the previous basis with the dual simplex.

All models are ``minimize c @ x`` subject to equality rows, ``<=`` rows
and ``x >= 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .loss import NumericFailure
from .partition import InvalidArgument

FEAS_TOL = 1e-9
OPT_TOL = 1e-8


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class Row:
    idx: np.ndarray
    val: np.ndarray
    rhs: float
    sense: str  # "<=" or "=="

    def dot(self, x: np.ndarray) -> float:
        return float(np.dot(self.val, x[self.idx]))


@dataclass
class LPSolution:
    status: Status
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class LPModel:
    """An LP that only ever grows: rows can be appended, never removed."""

    def __init__(self, objective: Sequence[float], names: Optional[Sequence[str]] = None):
        self.objective = np.asarray(objective, dtype=float).copy()
        if not np.all(np.isfinite(self.objective)):
            raise InvalidArgument("objective has non-finite entries")
        self.rows: list[Row] = []
        self.names = list(names) if names is not None else [f"x{i}" for i in range(self.n_vars)]

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def _make_row(self, idx, val, rhs, sense) -> Row:
        idx = np.asarray(idx, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        if idx.shape != val.shape:
            raise InvalidArgument("row index/value length mismatch")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise InvalidArgument(f"row references a variable outside [0, {self.n_vars})")
        if not (np.all(np.isfinite(val)) and math.isfinite(rhs)):
            raise InvalidArgument("row has non-finite coefficients")
        keep = val != 0.0
        return Row(idx[keep], val[keep], float(rhs), sense)

    def add_row(self, idx, val, rhs: float) -> int:
        """Append ``sum(val * x[idx]) <= rhs``; returns the row number."""
        self.rows.append(self._make_row(idx, val, rhs, "<="))
        return self.n_rows - 1

    def add_eq(self, idx, val, rhs: float) -> int:
        self.rows.append(self._make_row(idx, val, rhs, "=="))
        return self.n_rows - 1

    def dense(self):
        """``(A_ub, b_ub, A_eq, b_eq)`` as dense arrays."""
        ub = [r for r in self.rows if r.sense == "<="]
        eq = [r for r in self.rows if r.sense == "=="]

        def mat(rows):
            a = np.zeros((len(rows), self.n_vars))
            for i, r in enumerate(rows):
                np.add.at(a[i], r.idx, r.val)
            return a, np.array([r.rhs for r in rows])

        a_ub, b_ub = mat(ub)
        a_eq, b_eq = mat(eq)
        return a_ub, b_ub, a_eq, b_eq

    def sparse(self):
        """Rows as a CSR matrix plus right-hand sides and an equality mask.

        The matrix is cached and extended in place as rows are appended.
        """
        from scipy import sparse

        cache = getattr(self, "_csr", None)
        done = 0 if cache is None else cache[0].shape[0]
        if done < self.n_rows:
            new = self.rows[done:]
            indptr = np.cumsum([0] + [len(r.idx) for r in new])
            block = sparse.csr_matrix(
                (np.concatenate([r.val for r in new]), np.concatenate([r.idx for r in new]),
                 indptr), shape=(len(new), self.n_vars))
            rhs = np.array([r.rhs for r in new])
            eq = np.array([r.sense == "==" for r in new])
            if cache is not None:
                block = sparse.vstack((cache[0], block), format="csr")
                rhs = np.concatenate((cache[1], rhs))
                eq = np.concatenate((cache[2], eq))
            self._csr = cache = (block, rhs, eq)
        if cache is None:
            return sparse.csr_matrix((0, self.n_vars)), np.zeros(0), np.zeros(0, dtype=bool)
        return cache

    def max_violation(self, x: np.ndarray, rows: Optional[np.ndarray] = None) -> float:
        """Largest violation of ``x >= 0`` and of the rows (all, or those listed)."""
        worst = float(max(0.0, -x.min())) if x.size else 0.0
        if not self.rows:
            return worst
        a, rhs, eq = self.sparse()
        if rows is not None:
            if len(rows) == 0:
                return worst
            a, rhs, eq = a[rows], rhs[rows], eq[rows]
        gap = a @ x - rhs
        gap[eq] = np.abs(gap[eq])
        return max(worst, float(gap.max()))

    def to_lp_text(self) -> str:
        """CPLEX-LP text with 17 significant digits in fixed-point-ish notation."""
        def num(v: float) -> str:
            return f"{v:.17g}"

        def expr(idx, val) -> str:
            terms = []
            for i, v in zip(idx, val):
                sign = "-" if v < 0 else "+"
                terms.append(f"{sign} {num(abs(v))} {self.names[i]}")
            s = " ".join(terms) if terms else "0 " + self.names[0]
            return s[2:] if s.startswith("+ ") else s

        lines = ["Minimize", " obj: " + expr(range(self.n_vars), self.objective), "Subject To"]
        for k, r in enumerate(self.rows):
            op = "<=" if r.sense == "<=" else "="
            lines.append(f" r{k}: {expr(r.idx, r.val)} {op} {num(r.rhs)}")
        lines += ["Bounds"] + [f" {n} >= 0" for n in self.names] + ["End"]
        return "\n".join(lines) + "\n"


def _check(model: LPModel, sol: LPSolution, rows: Optional[np.ndarray] = None) -> LPSolution:
    if not sol.optimal:
        return sol
    viol = model.max_violation(sol.x, rows)
    if viol > FEAS_TOL:
        raise NumericFailure(f"solver returned a point violating the model by {viol:.3e}")
    recomputed = float(model.objective @ sol.x)
    if abs(recomputed - sol.objective) > FEAS_TOL * max(1.0, abs(recomputed)):
        raise NumericFailure("reported objective disagrees with c @ x")
    sol.objective = recomputed
    return sol


# --------------------------------------------------------------------------
# Hand-written revised simplex
# --------------------------------------------------------------------------
class RevisedSimplex:
    """Dense two-phase revised simplex on ``min c x, A x = b, x >= 0``.

    The basis inverse is maintained by rank-one (eta) updates and
    refactorised from scratch every ``refactor`` pivots. Pricing is
    Dantzig's rule; after ``bland_after`` consecutive degenerate pivots it
    switches to Bland's rule until the objective moves again.
    """

    def __init__(self, model: LPModel, *, max_iter: int = 50_000, refactor: int = 64,
                 bland_after: int = 30, pivot_tol: float = 1e-11):
        self.model = model
        self.max_iter = max_iter
        self.refactor = refactor
        self.bland_after = bland_after
        self.pivot_tol = pivot_tol

    def solve(self) -> LPSolution:
        m = self.model
        a_ub, b_ub, a_eq, b_eq = m.dense()
        n = m.n_vars
        n_ub, n_eq = len(b_ub), len(b_eq)
        rows = n_ub + n_eq
        if rows == 0:
            if np.any(m.objective < 0):
                return LPSolution(Status.UNBOUNDED)
            return _check(m, LPSolution(Status.OPTIMAL, 0.0, np.zeros(n)))
        # standard form: [A_ub I; A_eq 0] [x; s] = b
        a = np.zeros((rows, n + n_ub))
        a[:n_ub, :n] = a_ub
        a[:n_ub, n:] = np.eye(n_ub)
        a[n_ub:, :n] = a_eq
        b = np.concatenate([b_ub, b_eq])
        flip = b < 0
        a[flip] *= -1
        b[flip] *= -1
        n_std = n + n_ub

        # phase I: artificial per row, except <= rows whose slack can start basic
        basis = np.empty(rows, dtype=np.int64)
        art_cols = []
        for i in range(rows):
            if i < n_ub and not flip[i]:
                basis[i] = n + i
            else:
                basis[i] = n_std + len(art_cols)
                art_cols.append(i)
        n_art = len(art_cols)
        big = np.zeros((rows, n_std + n_art))
        big[:, :n_std] = a
        for k, i in enumerate(art_cols):
            big[i, n_std + k] = 1.0
        total_iter = 0
        if n_art:
            c1 = np.zeros(n_std + n_art)
            c1[n_std:] = 1.0
            status, basis, x, it = self._run(big, b, c1, basis, allowed=n_std + n_art)
            total_iter += it
            if status is not Status.OPTIMAL or c1 @ x > 1e-9 * max(1.0, np.abs(b).max()):
                return LPSolution(Status.INFEASIBLE, iterations=total_iter)
            basis, big, b = self._drive_out_artificials(big, b, basis, n_std)
        c2 = np.zeros(big.shape[1])
        c2[:n] = m.objective
        status, basis, x, it = self._run(big, b, c2, basis, allowed=n_std)
        total_iter += it
        if status is not Status.OPTIMAL:
            return LPSolution(status, iterations=total_iter)
        xs = np.maximum(x[:n], 0.0)
        return _check(m, LPSolution(Status.OPTIMAL, float(m.objective @ xs), xs, total_iter))

    def _drive_out_artificials(self, a, b, basis, n_std):
        binv = np.linalg.inv(a[:, basis])
        keep = np.ones(len(b), dtype=bool)
        for r in range(len(b)):
            if basis[r] < n_std:
                continue
            row = binv[r] @ a[:, :n_std]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            cand = [j for j in cand if j not in set(basis)]
            if cand:
                basis[r] = cand[0]
                binv = np.linalg.inv(a[:, basis])
            else:
                keep[r] = False  # redundant row
        if not keep.all():
            a, b, basis = a[keep], b[keep], basis[keep]
        return basis, a, b

    def _run(self, a, b, c, basis, allowed):
        rows = a.shape[0]
        basis = basis.copy()
        binv = np.linalg.inv(a[:, basis])
        degenerate_run = 0
        use_bland = False
        since_refactor = 0
        for it in range(1, self.max_iter + 1):
            xb = binv @ b
            y = c[basis] @ binv
            reduced = c[:allowed] - y @ a[:, :allowed]
            reduced[basis[basis < allowed]] = 0.0
            scale = max(1.0, np.abs(c[:allowed]).max())
            candidates = np.flatnonzero(reduced < -OPT_TOL * scale)
            if candidates.size == 0:
                x = np.zeros(a.shape[1])
                x[basis] = xb
                return Status.OPTIMAL, basis, x, it
            enter = int(candidates[0]) if use_bland else int(candidates[np.argmin(reduced[candidates])])
            d = binv @ a[:, enter]
            pos = np.flatnonzero(d > self.pivot_tol)
            if pos.size == 0:
                return Status.UNBOUNDED, basis, None, it
            ratios = np.maximum(xb[pos], 0.0) / d[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12]
            if use_bland:
                leave = int(ties[np.argmin(basis[ties])])
            else:
                leave = int(ties[np.argmax(d[ties])])
            if best <= 1e-12:
                degenerate_run += 1
                if degenerate_run >= self.bland_after:
                    use_bland = True
            else:
                degenerate_run = 0
                use_bland = False
            basis[leave] = enter
            since_refactor += 1
            if since_refactor >= self.refactor:
                binv = np.linalg.inv(a[:, basis])
                since_refactor = 0
            else:
                piv = d[leave]
                row_l = binv[leave] / piv
                binv -= np.outer(d, row_l)
                binv[leave] = row_l
        raise NumericFailure(f"simplex iteration limit {self.max_iter} reached ({rows} rows)")


# --------------------------------------------------------------------------
# HiGHS adapter
# --------------------------------------------------------------------------
class HighsSolver:
    """Keeps one HiGHS instance in sync with a growing :class:`LPModel`."""

    def __init__(self, model: LPModel, *, threads: int = 1):
        import highspy

        self._hs = highspy
        self.model = model
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", threads)
        h.setOptionValue("primal_feasibility_tolerance", 1e-10)
        h.setOptionValue("dual_feasibility_tolerance", 1e-10)
        h.setOptionValue("random_seed", 0)
        inf = highspy.kHighsInf
        n = model.n_vars
        h.addVars(n, np.zeros(n), np.full(n, inf))
        h.changeColsCost(n, np.arange(n, dtype=np.int32), model.objective)
        self.h = h
        self._synced = 0
        self.inf = inf

    def _sync(self):
        rows = self.model.rows[self._synced:]
        for r in rows:
            lo = r.rhs if r.sense == "==" else -self.inf
            self.h.addRow(lo, r.rhs, len(r.idx), r.idx.astype(np.int32), r.val)
        self._synced = self.model.n_rows

    def solve(self) -> LPSolution:
        self._sync()
        self.h.run()
        try:
            return self._collect()
        except NumericFailure:
            # warm-started dual simplex can drift; retry once from scratch
            self.h.clearSolver()
            self.h.run()
            return self._collect()

    def _collect(self) -> LPSolution:
        status = self.h.getModelStatus()
        ms = self._hs.HighsModelStatus
        info = self.h.getInfo()
        if status == ms.kOptimal:
            x = np.asarray(self.h.getSolution().col_value, dtype=float)
            x = np.maximum(x, 0.0)
            sol = LPSolution(Status.OPTIMAL, float(self.model.objective @ x), x,
                             int(info.simplex_iteration_count))
            return _check(self.model, sol)
        if status == ms.kInfeasible:
            return LPSolution(Status.INFEASIBLE)
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            return LPSolution(Status.UNBOUNDED)
        raise NumericFailure(f"HiGHS stopped with status {self.h.modelStatusToString(status)}")


class HighsDualSolver(HighsSolver):
    """Solves the LP dual with HiGHS, so appended rows become new columns.

    The dual of ``min c x, A_eq x = b_eq, A_le x <= b_le, x >= 0`` has one
    row per primal variable. Cutting-plane models have few variables and
    many rows, so the dual's basis stays small and each appended column is
    priced in by the primal simplex from the previous basis. The primal
    point is read back from the duals of those rows.
    """

    def __init__(self, model: LPModel, *, threads: int = 1):
        import highspy

        self._hs = highspy
        self.model = model
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", threads)
        h.setOptionValue("primal_feasibility_tolerance", 1e-10)
        h.setOptionValue("dual_feasibility_tolerance", 1e-10)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("simplex_strategy", 4)  # primal simplex
        inf = highspy.kHighsInf
        n = model.n_vars
        h.addRows(n, np.full(n, -inf), model.objective, 0, np.zeros(1, np.int32),
                  np.zeros(0, np.int32), np.zeros(0))
        self.h = h
        self._synced = 0
        self._cols: list[int] = []
        self.inf = inf

    def _sync(self):
        for i in range(self._synced, self.model.n_rows):
            self._add(i)
        self._synced = self.model.n_rows

    def _add(self, i: int):
        # primal row i becomes dual column y_i with cost -rhs (free for equalities,
        # y_i <= 0 for inequalities) and coefficients equal to the row itself
        r = self.model.rows[i]
        hi = self.inf if r.sense == "==" else 0.0
        self.h.addCol(-r.rhs, -self.inf, hi, len(r.idx), r.idx.astype(np.int32), r.val)
        self._cols.append(i)

    @property
    def active(self) -> np.ndarray:
        """Model rows currently present in the solver, in column order."""
        return np.asarray(self._cols, dtype=np.int64)

    def drop_slack(self, x: np.ndarray, min_slack: float) -> list[int]:
        """Remove inequality rows that are loose at ``x`` by more than ``min_slack``.

        Only rows whose multiplier is zero at the last optimum are dropped,
        so the current basis stays valid. Returns the model row numbers
        removed; :meth:`restore` puts a row back.
        """
        self._sync()
        a, rhs, eq = self.model.sparse()
        rows = self.active
        slack = rhs[rows] - a[rows] @ x
        y = np.asarray(self.h.getSolution().col_value, dtype=float)
        if len(y) != len(rows):
            return []
        drop = np.flatnonzero(~eq[rows] & (slack > min_slack) & (np.abs(y) <= 1e-12))
        if drop.size == 0:
            return []
        self.h.deleteCols(len(drop), drop.astype(np.int32))
        gone = set(drop.tolist())
        removed = [self._cols[j] for j in drop]
        self._cols = [c for j, c in enumerate(self._cols) if j not in gone]
        return removed

    def restore(self, row: int):
        self._add(row)

    def _collect(self) -> LPSolution:
        status = self.h.getModelStatus()
        ms = self._hs.HighsModelStatus
        info = self.h.getInfo()
        if status == ms.kOptimal:
            x = -np.asarray(self.h.getSolution().row_dual, dtype=float)
            x = np.maximum(x, 0.0)
            sol = LPSolution(Status.OPTIMAL, float(self.model.objective @ x), x,
                             int(info.simplex_iteration_count))
            return _check(self.model, sol, self.active)
        # dual unbounded <=> primal infeasible; dual infeasible <=> primal unbounded
        if status in (ms.kUnbounded, ms.kUnboundedOrInfeasible):
            return LPSolution(Status.INFEASIBLE)
        if status == ms.kInfeasible:
            return LPSolution(Status.UNBOUNDED)
        raise NumericFailure(f"HiGHS stopped with status {self.h.modelStatusToString(status)}")


BACKENDS = {"simplex": RevisedSimplex, "highs": HighsSolver, "highs-dual": HighsDualSolver}


def make_solver(model: LPModel, backend: str = "highs"):
    if backend not in BACKENDS:
        raise InvalidArgument(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS)}")
    return BACKENDS[backend](model)


def solve(model: LPModel, backend: str = "highs") -> LPSolution:
    """One-shot solve (no warm start)."""
    return make_solver(model, backend).solve()
