"""The online engine: reveal each stage cost, solve the stage subproblem, fix
the decision, move on."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .lagrangian import AggregatedTerms, stage_coefficient
from .model import (CostFunction, DomainError, Linear, ModelError, MultiplierVector, ProblemInstance,
                    check_feasibility)
from .projection import (InfeasiblePrefix, StageInterval, battery_projection_bounds, battery_stage_interval,
                         lp_stage_interval, project_onto_stage, remaining_system)
from .simplex import LPError, LPInfeasible, solve_lp

STRATEGIES = ("projected", "full", "auto")
FME_MAX_VARS = 8


class OnlineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RevealedStage:
    t: int
    cost: CostFunction


@dataclass
class StageRecord:
    t: int
    x: np.ndarray
    kind: str
    interval: StageInterval | None = None
    local_solution: np.ndarray | None = None
    raw_minimizer: np.ndarray | None = None
    min_slack: float = float("inf")
    diagnostics: dict = field(default_factory=dict)


@dataclass
class OnlineTrace:
    stages: list
    x_hat: np.ndarray
    objective: float
    strategy: str
    max_violation: float

    def to_dict(self):
        out = {"x": self.x_hat.tolist(), "objective": self.objective, "strategy": self.strategy,
               "max_violation": self.max_violation, "stages": []}
        for r in self.stages:
            out["stages"].append({
                "t": r.t, "x": r.x.tolist(), "kind": r.kind,
                "interval": None if r.interval is None else [r.interval.lo, r.interval.hi],
                "min_slack": r.min_slack if np.isfinite(r.min_slack) else None,
            })
        return out


def _stream(instance: ProblemInstance, cost_stream) -> Iterator[RevealedStage]:
    if cost_stream is None:
        for t, f in enumerate(instance.costs):
            yield RevealedStage(t, f)
        return
    for item in cost_stream:
        yield item if isinstance(item, RevealedStage) else RevealedStage(item[0], item[1])


def _check_prediction(instance, prediction):
    if isinstance(prediction, AggregatedTerms):
        if prediction.T != instance.T:
            raise ModelError("aggregated prediction covers the wrong number of stages")
        return
    if not isinstance(prediction, MultiplierVector):
        raise ModelError("prediction must be a MultiplierVector or AggregatedTerms")
    c = instance.coupling
    if prediction.mu.size != c.n_ub or prediction.lam.size != c.n_eq:
        raise ModelError(
            f"prediction dimension ({prediction.mu.size}, {prediction.lam.size}) does not match "
            f"the coupling constraints ({c.n_ub}, {c.n_eq})")


def solve_stage_projected(t_bar, cost: CostFunction, coef, interval: StageInterval):
    """Minimise ``f(x) + coef x`` over the projection interval (closed form).

    Returns ``(x_hat, raw)`` where ``raw`` is the unconstrained minimiser.
    """
    if interval.lo > interval.hi:
        raise InfeasiblePrefix(f"stage {t_bar}: empty projection interval")
    try:
        raw = cost.inverse_gradient(-np.atleast_1d(coef))
    except DomainError as exc:
        raise DomainError(str(exc), stage=t_bar) from None
    return np.array([interval.clip(float(raw[0]))]), raw


def _full_linear(instance, t_bar, prefix, cost: Linear, coef, prediction, tol=1e-9):
    """Remaining-horizon LP with the stage local Lagrangian as objective.

    Among stage-optimal completions the multiplier-weighted slack of the
    dualized rows is minimised, so an exact prediction keeps complementary
    slackness reachable.
    """
    A_ub, b_ub, A_eq, b_eq, lb, ub, _ = remaining_system(instance, prefix, t_bar)
    dim = cost.dim
    obj = np.zeros(lb.size)
    obj[:dim] = cost.c + coef
    try:
        first = solve_lp(obj, A_ub, b_ub, A_eq, b_eq, lb, ub)
    except LPInfeasible as exc:
        raise InfeasiblePrefix(f"stage {t_bar}: remaining horizon infeasible ({exc})") from None
    if not isinstance(prediction, MultiplierVector) or not np.any(prediction.mu > 0):
        return first.x[:dim], {"phase": 1, "value": first.objective}
    # tie-break: minimise sum_j mu_j * slack_j over the stage-optimal face
    w = -(A_ub.T @ prediction.mu) if A_ub.shape[0] else np.zeros(lb.size)
    v_tol = tol * max(1.0, abs(first.objective), float(np.abs(obj) @ np.maximum(np.abs(lb), np.abs(ub))))
    A2 = np.vstack([A_ub, obj[None, :]]) if A_ub.shape[0] else obj[None, :]
    b2 = np.concatenate([b_ub, [first.objective + v_tol]])
    try:
        second = solve_lp(w, A2, b2, A_eq, b_eq, lb, ub)
    except LPError:
        return first.x[:dim], {"phase": 1, "value": first.objective}
    return second.x[:dim], {"phase": 2, "value": first.objective}


def _min_slack(instance, x_flat, upto):
    """Smallest slack among inequality rows involving only stages ``<= upto``."""
    c = instance.coupling
    if not c.n_ub:
        return float("inf")
    end = instance.stage_slice(upto).stop
    done = ~np.any(c.A_ub[:, end:] != 0, axis=1)
    if not done.any():
        return float("inf")
    slack = c.b_ub[done] - c.A_ub[done, :end] @ x_flat[:end]
    return float(slack.min())


def _choose_strategy(instance, strategy):
    if strategy not in STRATEGIES:
        raise ModelError(f"unknown strategy {strategy!r}")
    kind = getattr(instance.structure, "kind", None)
    if strategy == "auto":
        return "projected" if kind in ("battery", "laminar") else "full"
    return strategy


def run_online(instance: ProblemInstance, prediction, strategy="auto", cost_stream: Iterable | None = None,
               projection="auto", feas_tol=1e-8) -> OnlineTrace:
    """Run the online algorithm on ``instance`` with a multiplier prediction.

    ``instance`` provides the constraints (its costs are used only when no
    ``cost_stream`` is given).  ``prediction`` is a :class:`MultiplierVector`
    or per-stage :class:`AggregatedTerms`.  ``projection`` selects how the
    projected strategy computes intervals: ``battery``, ``fme``, ``lp`` or
    ``auto``.
    """
    _check_prediction(instance, prediction)
    strategy = _choose_strategy(instance, strategy)
    kind = getattr(instance.structure, "kind", None)
    bat_bounds = None
    if strategy == "projected":
        if projection == "auto":
            projection = "battery" if kind == "battery" else "fme"
        if projection == "battery":
            if kind != "battery":
                raise ModelError("battery projection needs battery parameters")
            try:
                bat_bounds = battery_projection_bounds(instance.structure)
            except ModelError as exc:
                raise OnlineError(f"infeasible instance: {exc}") from None
    prefix: list = []
    records = []
    revealed = []
    energy = 0.0
    expected = 0
    for rev in _stream(instance, cost_stream):
        t = rev.t
        if t != expected:
            raise ModelError(f"stage {t} revealed out of order (expected {expected})")
        if t >= instance.T:
            raise ModelError("more costs revealed than stages")
        expected += 1
        f = rev.cost
        revealed.append(f)
        box = instance.boxes[t]
        if f.dim != box.dim:
            raise ModelError(f"stage {t}: revealed cost has dimension {f.dim}, stage has {box.dim}")
        coef = stage_coefficient(instance, prediction, t)
        rec = StageRecord(t, np.zeros(box.dim), strategy)
        if isinstance(f, Linear):
            if strategy == "projected":
                raise ModelError(f"stage {t}: linear stages need the full strategy")
            x, diag = _full_linear(instance, t, prefix, f, coef, prediction)
            rec.diagnostics = diag
            rec.local_solution = np.where(f.c + coef < 0, box.u, box.l)
        else:
            if box.dim != 1:
                raise NotImplementedError("multi-dimensional strictly convex stages are not supported online")
            if strategy == "projected":
                if projection == "battery":
                    p = instance.structure
                    interval = battery_stage_interval(t, energy, bat_bounds, p.l[t], p.u[t], p.dt)
                elif projection == "fme" and instance.n - instance.stage_slice(t).start <= FME_MAX_VARS:
                    interval = project_onto_stage(instance, prefix, t)
                else:
                    interval = lp_stage_interval(instance, prefix, t)
            else:
                interval = lp_stage_interval(instance, prefix, t)
            x, raw = solve_stage_projected(t, f, coef, interval)
            rec.interval = interval
            rec.raw_minimizer = raw
            rec.local_solution = np.clip(raw, box.l, box.u)
        x = np.clip(np.asarray(x, dtype=float).reshape(-1), box.l, box.u)
        rec.x = x
        prefix.append(x)
        if kind == "battery":
            energy += instance.structure.dt * float(x[0])
        flat = np.concatenate(prefix)
        rec.min_slack = _min_slack(instance, np.concatenate([flat, np.zeros(instance.n - flat.size)]), t)
        records.append(rec)
    if expected != instance.T:
        raise ModelError(f"cost stream ended after {expected} of {instance.T} stages")
    x_hat = np.concatenate(prefix)
    report = check_feasibility(instance, x_hat, tol=feas_tol)
    if not report.feasible:
        raise OnlineError(f"online solution violates constraints by {report.max_violation:.3g}")
    objective = float(sum(f.value(r.x) for f, r in zip(revealed, records)))
    return OnlineTrace(records, x_hat, objective, strategy, report.max_violation)
