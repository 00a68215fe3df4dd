"""Command line front end: ``dpnoise <command> ...``.

Exit codes: 0 on success, 1 when the computation itself fails (an
infeasible bound, a failed audit, a gap target missed), 2 for bad usage
or unreadable input files. Numbers are printed with 12 significant digits.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import dpml
from . import mechanisms as mech
from .bounds import (BoundPair, InfeasibleBound, Schedule, converge, solve_dependent_pair,
                     solve_pair)
from .distributions import NoiseDistribution
from .loss import NumericFailure, parse_loss
from .partition import InvalidArgument, PrivacyBudget
from .separation import audit

JOBS_ENV = "DPNOISE_JOBS"
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def g12(v: float) -> str:
    return f"{v:.12g}"


class DomainFailure(click.ClickException):
    exit_code = EXIT_DOMAIN


class InputError(click.ClickException):
    exit_code = EXIT_USAGE


def _budget(eps: float, delta: float, delta_f: str) -> PrivacyBudget:
    try:
        return PrivacyBudget(eps, delta, delta_f).check_strict()
    except (InvalidArgument, ValueError, ZeroDivisionError) as exc:
        raise click.UsageError(str(exc)) from None


def _loss(spec: str):
    try:
        return parse_loss(spec)
    except InvalidArgument as exc:
        raise click.UsageError(str(exc)) from None


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def _load_distribution(path: str) -> NoiseDistribution:
    data = _read_json(path)
    try:
        return NoiseDistribution.from_dict(data)
    except (InvalidArgument, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a noise distribution ({exc})") from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def density_table(dist: NoiseDistribution) -> str:
    """Cell midpoint and density height, one row per cell."""
    part = dist.partition
    beta = float(part.beta)
    bps = part.bp_array
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["left", "right", "midpoint", "height", "probability"])
    for j, p in enumerate(dist.weights):
        a, b = bps[j] * beta, bps[j + 1] * beta
        w.writerow([g12(a), g12(b), g12((a + b) / 2), g12(p / (b - a)), g12(p)])
    return buf.getvalue()


def certificate_csv(pair: BoundPair) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bound", "phi_units", "segments", "shortfall"])
    for res in (pair.upper, pair.lower):
        for v in res.cuts:
            w.writerow([res.kind, v.phi, json.dumps(v.event.to_list()), g12(v.shortfall)])
    return buf.getvalue()


@dataclass
class RunConfig:
    """Flags of the ``bounds`` command as a plain record.

    ``to_argv`` and ``from_argv`` are inverse to each other.
    """

    epsilon: float
    delta: float
    delta_f: str = "1"
    loss: str = "l1"
    L: Optional[int] = None
    k: int = 1
    target_gap: Optional[float] = None
    partition: str = "uniform"
    time_limit: float = 600.0
    tol: float = 1e-9
    out_dir: str = "."
    jobs: int = 1

    def to_argv(self) -> list[str]:
        argv = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            argv += ["--" + f.name.replace("_", "-"), str(v)]
        return argv

    @classmethod
    def from_argv(cls, argv: list[str]) -> "RunConfig":
        ctx = bounds_cmd.make_context("bounds", list(argv))
        return cls(**{f.name: ctx.params[f.name] for f in fields(cls)})


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Optimised additive noise for (epsilon, delta)-differential privacy."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _budget_options(fn):
    fn = click.option("--delta-f", default="1", show_default=True,
                      help="Sensitivity, e.g. 1 or 70/194.")(fn)
    fn = click.option("--delta", type=float, required=True)(fn)
    fn = click.option("--epsilon", "--eps", "epsilon", type=float, required=True)(fn)
    return fn


@main.command("bounds")
@_budget_options
@click.option("--loss", default="l1", show_default=True,
              help="l1, l2, pinball:TAU or capped:W:S.")
@click.option("--L", "L", type=int, default=None, help="Grid half-width in cells (fixed grid).")
@click.option("--k", type=int, default=1, show_default=True, help="Cells per sensitivity.")
@click.option("--target-gap", type=float, default=None,
              help="Refine until the relative gap is below this value.")
@click.option("--partition", type=click.Choice(["uniform", "geometric"]), default="uniform",
              show_default=True)
@click.option("--time-limit", type=float, default=600.0, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=_jobs_default,
              help=f"Oracle worker threads (default ${JOBS_ENV} or 1).")
def bounds_cmd(epsilon, delta, delta_f, loss, L, k, target_gap, partition, time_limit, tol,
               out_dir, jobs):
    """Upper and lower bounds on the optimal expected loss."""
    budget = _budget(epsilon, delta, delta_f)
    lf = _loss(loss)
    if k < 1 or (L is not None and L < 0):
        raise click.UsageError("k must be positive and L non-negative")
    if L is None and target_gap is None:
        raise click.UsageError("give either --L (fixed grid) or --target-gap")
    try:
        if target_gap is not None:
            sched = Schedule(k0=k, partition=partition, time_limit=time_limit)
            pair = converge(budget, lf, target_gap, sched, tol=tol, jobs=jobs)
        else:
            pair = solve_pair(L, k, budget, lf, tol=tol, jobs=jobs, time_limit=time_limit)
    except InfeasibleBound as exc:
        raise DomainFailure(f"infeasible: {exc}") from None
    except NumericFailure as exc:
        raise DomainFailure(f"numeric failure: {exc}") from None
    out = Path(out_dir)
    _write(out / "upper.json", pair.upper.distribution.to_json(digits=12) + "\n")
    _write(out / "lower.json", pair.lower.distribution.to_json(digits=12) + "\n")
    _write(out / "bounds.csv", pair.to_csv())
    _write(out / "certificate.csv", certificate_csv(pair))
    _write(out / "density.csv", density_table(pair.upper.distribution))
    click.echo(f"UB={g12(pair.UB)} LB={g12(pair.LB)} rel_gap={g12(pair.rel_gap)}")
    ok = pair.upper.converged and pair.lower.converged
    if target_gap is not None:
        ok = pair.converged
    if not ok:
        raise DomainFailure("bounds did not converge within the limits")


@main.command("bounds-dep")
@_budget_options
@click.option("--loss", default="l1", show_default=True)
@click.option("--phi-lo", type=float, required=True, help="Left end of the output range.")
@click.option("--phi-hi", type=float, required=True, help="Right end of the output range.")
@click.option("--L", "L", type=int, required=True)
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--time-limit", type=float, default=1200.0, show_default=True)
@click.option("--out-dir", default=".", show_default=True, type=click.Path(file_okay=False))
def bounds_dep_cmd(epsilon, delta, delta_f, loss, phi_lo, phi_hi, L, k, time_limit, out_dir):
    """Bounds for noise that may depend on the query output (uniform weighting)."""
    budget = _budget(epsilon, delta, delta_f)
    lf = _loss(loss)
    if not phi_hi > phi_lo:
        raise click.UsageError("need phi-hi > phi-lo")
    try:
        pair = solve_dependent_pair(phi_lo, phi_hi, L, k, budget, lf, time_limit=time_limit)
    except InvalidArgument as exc:
        raise click.UsageError(str(exc)) from None
    except (InfeasibleBound, NumericFailure) as exc:
        raise DomainFailure(str(exc)) from None
    out = Path(out_dir)
    _write(out / "upper_family.json", json.dumps(pair.upper.family.to_dict(12), indent=1) + "\n")
    _write(out / "lower_family.json", json.dumps(pair.lower.family.to_dict(12), indent=1) + "\n")
    click.echo(f"UB={g12(pair.UB)} LB={g12(pair.LB)} rel_gap={g12(pair.rel_gap)}")
    if not (pair.upper.converged and pair.lower.converged):
        raise DomainFailure("bounds did not converge within the limits")


COMPARE_FIELDS = ("epsilon", "delta", "delta_f", "loss", "UB", "LB", "O", "B_UB", "B_UB_name",
                  "B_LB", "gap", "ub_gap", "lb_gap")
MECH_FIELDS = ("mechanism", "epsilon", "delta", "delta_f", "loss", "expected_loss", "std")


def _parse_grid(text: str) -> list[tuple[float, float]]:
    pts = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            e, d = item.split(":")
            pts.append((float(e), float(d)))
        except ValueError:
            raise click.UsageError(f"grid entry {item!r} is not EPS:DELTA") from None
    return pts


@main.command("compare")
@click.option("--grid", default="", help="Comma separated EPS:DELTA pairs, e.g. 1:0.2,5:0.25.")
@click.option("--delta-f", default="1", show_default=True)
@click.option("--loss", type=click.Choice(["l1", "l2"]), default="l1", show_default=True)
@click.option("--target-gap", type=float, default=0.05, show_default=True,
              help="Gap target for the optimal bounds.")
@click.option("--time-limit", type=float, default=300.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Gap table CSV (stdout if omitted).")
@click.option("--mechanisms-out", type=click.Path(dir_okay=False), default=None,
              help="Per-mechanism expected loss CSV.")
def compare_cmd(grid, delta_f, loss, target_gap, time_limit, out, mechanisms_out):
    """Suboptimality of the baseline mechanisms against the optimal bounds."""
    lf = _loss(loss)
    table = io.StringIO()
    tw = csv.DictWriter(table, fieldnames=COMPARE_FIELDS, lineterminator="\n")
    tw.writeheader()
    mtab = io.StringIO()
    mw = csv.DictWriter(mtab, fieldnames=MECH_FIELDS, lineterminator="\n")
    mw.writeheader()
    for eps, delta in _parse_grid(grid):
        budget = _budget(eps, delta, delta_f)
        mechs = mech.baselines(budget)
        losses = {}
        for name, m in mechs.items():
            losses[name] = mech.expected_loss(m, lf)
            mw.writerow({"mechanism": name, "epsilon": g12(eps), "delta": g12(delta),
                         "delta_f": delta_f, "loss": loss, "expected_loss": g12(losses[name]),
                         "std": g12(mech.std(m))})
        b_lb = mech.near_optimal_lb(budget, loss)
        mw.writerow({"mechanism": "near_optimal_lb", "epsilon": g12(eps), "delta": g12(delta),
                     "delta_f": delta_f, "loss": loss, "expected_loss": g12(b_lb), "std": ""})
        try:
            pair = converge(budget, lf, target_gap, Schedule(time_limit=time_limit))
        except (InfeasibleBound, NumericFailure) as exc:
            raise DomainFailure(f"({eps}, {delta}): {exc}") from None
        ub_name = min(losses, key=losses.get)
        b_ub = losses[ub_name]
        o = (pair.UB + pair.LB) / 2
        den = max(o, 1.0)
        tw.writerow({"epsilon": g12(eps), "delta": g12(delta), "delta_f": delta_f, "loss": loss,
                     "UB": g12(pair.UB), "LB": g12(pair.LB), "O": g12(o), "B_UB": g12(b_ub),
                     "B_UB_name": ub_name, "B_LB": g12(b_lb),
                     "gap": g12(mech.suboptimality_gap(b_ub, b_lb, pair.UB, pair.LB)),
                     "ub_gap": g12(100 * (b_ub - o) / den), "lb_gap": g12(100 * (o - b_lb) / den)})
    if out:
        _write(Path(out), table.getvalue())
    else:
        click.echo(table.getvalue(), nl=False)
    if mechanisms_out:
        _write(Path(mechanisms_out), mtab.getvalue())


@main.command("audit")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--epsilon", "--eps", "epsilon", type=float, default=None,
              help="Override the budget stored in the file.")
@click.option("--delta", type=float, default=None)
@click.option("--delta-f", default=None)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--jobs", type=int, default=_jobs_default)
def audit_cmd(path, epsilon, delta, delta_f, tol, jobs):
    """Check a distribution file against every privacy constraint."""
    dist = _load_distribution(path)
    b = dist.budget
    if b is None and (epsilon is None or delta is None):
        raise click.UsageError(f"{path} carries no budget; pass --epsilon and --delta")
    budget = _budget(epsilon if epsilon is not None else b.epsilon,
                     delta if delta is not None else b.delta,
                     delta_f if delta_f is not None else str(b.delta_f if b else 1))
    try:
        res = audit(dist, budget, tol, jobs=jobs)
    except InvalidArgument as exc:
        raise InputError(f"{path}: {exc}") from None
    w = res.worst
    click.echo(f"worst phi={w.phi} event={json.dumps(w.event.to_list())} "
               f"shortfall={g12(w.shortfall)}")
    if not res.feasible:
        raise DomainFailure(f"infeasible: shortfall {g12(w.shortfall)} exceeds {tol:g}")
    click.echo("feasible")


@main.command("sample")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("-n", "--n", "n", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def sample_cmd(path, n, seed):
    """Draw noise from a distribution file, one value per line."""
    dist = _load_distribution(path)
    m = mech.piecewise(dist)
    xs = mech.sample(m, seed, n) if n else []
    click.echo("".join(f"{g12(x)}\n" for x in xs), nl=False)


def _dataset(data, schema, synthetic, seed) -> dpml.Dataset:
    if synthetic:
        return dpml.two_gaussians(synthetic, seed=seed)
    if not (data and schema):
        raise click.UsageError("give --data and --schema, or --synthetic N")
    try:
        return dpml.load_csv(data, schema)
    except json.JSONDecodeError as exc:
        raise InputError(f"{schema}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except (KeyError, InvalidArgument, ValueError) as exc:
        raise InputError(f"{data}: {exc}") from None


def _learner_options(fn):
    for opt in reversed([
        click.option("--data", type=click.Path(dir_okay=False), default=None),
        click.option("--schema", type=click.Path(dir_okay=False), default=None),
        click.option("--synthetic", type=int, default=None,
                     help="Use N rows of the two-Gaussian generator instead of a file."),
        click.option("--epsilon", "--eps", "epsilon", type=float, default=1.0, show_default=True),
        click.option("--delta", type=float, default=0.1, show_default=True),
        click.option("--noise", "noises", multiple=True,
                     default=("none", "gaussian", "analytic_gaussian", "truncated_laplace",
                              "optimal"), show_default=True),
        click.option("--splits", type=int, default=5, show_default=True),
        click.option("--reps", type=int, default=20, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
    ]):
        fn = opt(fn)
    return fn


def _run_learner(learner, data, schema, synthetic, epsilon, delta, noises, splits, reps, seed,
                 out, **kw):
    budget = _budget(epsilon, delta, "1")
    try:
        factories = {name: dpml.noise_factory(name) for name in noises}
    except InvalidArgument as exc:
        raise click.UsageError(str(exc)) from None
    d = _dataset(data, schema, synthetic, seed)
    try:
        rows = dpml.evaluate(d, factories, budget, learner=learner, splits=splits,
                             repetitions=reps, seed=seed, **kw)
    except dpml.DegenerateClass as exc:
        raise DomainFailure(str(exc)) from None
    text = dpml.error_table_csv(rows)
    if out:
        _write(Path(out), text)
    else:
        click.echo(text, nl=False)
    return rows


@main.command("nb")
@_learner_options
def nb_cmd(**kw):
    """Error table for private naive Bayes under several noise types."""
    _run_learner("nb", **kw)


@main.command("pcd")
@_learner_options
@click.option("--T", "T", type=int, default=100, show_default=True)
@click.option("--K", "K", type=int, default=None, help="Coordinates per iteration (default d/4).")
@click.option("--lam", type=float, default=1e-8, show_default=True)
def pcd_cmd(T, K, lam, **kw):
    """Error table for private proximal coordinate descent (budget spent per update)."""
    rows = _run_learner("pcd", T=T, K=K, lam=lam, **kw)
    if any(r.mechanism != "none" for r in rows):
        click.echo(f"# budget ({g12(kw['epsilon'])}, {g12(kw['delta'])}) is per update; "
                   f"{T} x K updates compose naively to T*K times that", err=True)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
