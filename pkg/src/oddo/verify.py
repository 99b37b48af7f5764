"""Seeded invariant suites: lemmas, bounds, projection and oracle agreement."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import (exp_bound, power_bound, power_parameters, premise_holds, separable_bound_for,
                     theorem1_bound)
from .lagrangian import lagrangian_solution, nu_vector
from .model import (CouplingConstraints, Linear, ModelError, MultiplierVector, ProblemInstance, Quadratic,
                    ScaledShifted, Exponential, StageSet, check_feasibility,
                    tight_sets_closed)
from .offline import brute_force_oracle, kkt_residuals, solve_offline
from .online import run_online
from .problems import (battery_instance, random_battery_toy, random_isub_instance, random_underprediction)
from .projection import (battery_projection_bounds, battery_stage_interval, has_feasible_completion,
                         lp_stage_interval, project_onto_stage)

SUITES = ("lemmas", "bounds", "projection", "oracle")
VIOLATION_TOL = 1e-9


@dataclass
class Check:
    name: str
    total: int
    failures: int
    detail: str = ""

    @property
    def passed(self):
        return self.failures == 0 and self.total > 0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: {self.total - self.failures}/{self.total}{extra}"


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]

    def to_dict(self):
        return {"suite": self.suite, "passed": self.passed,
                "checks": [{"name": c.name, "total": c.total, "failures": c.failures, "detail": c.detail,
                            "passed": c.passed} for c in self.checks]}


def _rng(seed, *words):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *words]))


# --- lemmas ------------------------------------------------------------------


def lemma1_check(n=50, seed=0) -> Check:
    """Tight sets of a feasible point are closed under union and intersection."""
    fails = 0
    for i in range(n):
        inst, sol = random_isub_instance(10_000 * seed + i, T_range=(2, 6))
        if not tight_sets_closed(inst.structure.set_function(), sol.x_star, inst.T, tol=1e-8):
            fails += 1
    return Check("lemma1 tight sets closed", n, fails)


def lemma2_check(pairs=200, seed=0, per_instance=5) -> Check:
    """Local Lagrangian solutions are non-increasing in the multipliers."""
    fails, worst, done = 0, 0.0, 0
    k = 0
    while done < pairs:
        inst, _ = random_isub_instance(20_000 + 10_000 * seed + k)
        rng = _rng(seed, 21, k)
        k += 1
        for _ in range(min(per_instance, pairs - done)):
            mu1 = rng.uniform(0.0, 2.0, inst.coupling.n_ub)
            lam1 = rng.normal(0.0, 2.0, inst.coupling.n_eq)
            m1 = MultiplierVector(mu1, lam1)
            m2 = MultiplierVector(mu1 + rng.exponential(1.0, mu1.size), lam1 + rng.exponential(1.0, lam1.size))
            excess = float(np.max(lagrangian_solution(inst, m2) - lagrangian_solution(inst, m1)))
            worst = max(worst, excess)
            fails += excess > VIOLATION_TOL
            done += 1
    return Check("lemma2 monotonicity", pairs, fails, f"max excess {worst:.3g}")


def lemma4_runs(n=200, seed=0):
    """Yield ``(instance, m_hat, m_star, trace)`` for under-predicted online runs."""
    for i in range(n):
        inst, sol = random_isub_instance(40_000 + 10_000 * seed + i)
        m_hat = random_underprediction(_rng(seed, 41, i), sol.multipliers)
        yield inst, m_hat, sol, run_online(inst, m_hat, strategy="projected")


def lemma4_check(n=200, seed=0):
    """Under-prediction dominance.

    The checked form is ``x_hat <= x(m_hat)``, the property established by
    the induction.  The literal ``x_hat <= x(m*)`` is reported as information:
    with equal ground-set totals it would force ``x_hat = x*``.
    """
    fails, worst, literal = 0, 0.0, 0
    lemma3_fails, lemma3_total = 0, 0
    for inst, m_hat, sol, trace in lemma4_runs(n, seed):
        local = lagrangian_solution(inst, m_hat)
        excess = float(np.max(trace.x_hat - local))
        worst = max(worst, excess)
        fails += excess > VIOLATION_TOL
        literal += bool(np.any(trace.x_hat > lagrangian_solution(inst, sol.multipliers) + VIOLATION_TOL))
        if inst.T <= 6:
            lemma3_total += 1
            lemma3_fails += not _lemma3_holds(inst, trace.x_hat, local)
    return [
        Check("lemma4 under-prediction dominance", n, fails, f"max excess {worst:.3g}; "
              f"literal x_hat<=x(m*) exceeded on {literal}/{n}"),
        Check("lemma3 tight prefix set on reductions", lemma3_total, lemma3_fails),
    ]


def _lemma3_holds(inst, x_hat, local, tol=1e-7):
    """Every reduced stage lies in a tight set made of itself and earlier stages."""
    import itertools

    r = inst.structure.set_function()
    for tb in range(inst.T):
        if not x_hat[tb] < local[tb] - tol:
            continue
        found = False
        for k in range(tb + 1):
            for c in itertools.combinations(range(tb), k):
                S = frozenset(c) | {tb}
                if abs(float(x_hat[list(S)].sum()) - r(S)) <= tol * max(1.0, abs(r(S))):
                    found = True
                    break
            if found:
                break
        if not found:
            return False
    return True


def lemmas_suite(seed=0) -> SuiteReport:
    rep = SuiteReport("lemmas", [lemma1_check(seed=seed), lemma2_check(seed=seed)])
    rep.checks.extend(lemma4_check(seed=seed))
    return rep


# --- bounds ------------------------------------------------------------------


def theorem1_check(n=100, seed=0, kind="mixed") -> Check:
    fails, premise, worst = 0, 0, -np.inf
    for i in range(n):
        inst, sol = random_isub_instance(60_000 + 10_000 * seed + i, kind=kind)
        m_hat = random_underprediction(_rng(seed, 61, i), sol.multipliers)
        trace = run_online(inst, m_hat, strategy="projected")
        gap = trace.objective - sol.objective
        bound = theorem1_bound(inst, m_hat, sol.multipliers)
        premise += premise_holds(inst, m_hat, sol.multipliers)
        worst = max(worst, gap - bound)
        fails += not gap <= bound + 1e-8
    return Check("theorem1 gap <= bound", n, fails, f"max gap-bound {worst:.3g}; premise {premise}/{n}")


def _agree(a, b, tol=1e-10):
    return abs(a - b) <= tol


def corollary_checks(n=50, seed=0):
    pw_fail, ex_fail, pw_worst, ex_worst = 0, 0, 0.0, 0.0
    for i in range(n):
        inst, sol = random_isub_instance(80_000 + 10_000 * seed + i, kind="shared-power")
        m_hat = random_underprediction(_rng(seed, 81, i), sol.multipliers)
        K, c, a = power_parameters(inst)
        t1 = theorem1_bound(inst, m_hat, sol.multipliers)
        sep = separable_bound_for(inst, m_hat, sol.multipliers)
        pw = power_bound(K, c, a, nu_vector(inst, m_hat), nu_vector(inst, sol.multipliers))
        d = max(abs(t1 - sep), abs(t1 - pw), abs(sep - pw))
        pw_worst = max(pw_worst, d)
        pw_fail += not (_agree(t1, sep) and _agree(t1, pw) and _agree(sep, pw))
    for i in range(n):
        inst, sol = random_isub_instance(90_000 + 10_000 * seed + i, kind="exponential")
        m_hat = random_underprediction(_rng(seed, 91, i), sol.multipliers)
        a = np.array([f.a[0] for f in inst.costs])
        t1 = theorem1_bound(inst, m_hat, sol.multipliers)
        ex = exp_bound(a, nu_vector(inst, m_hat), nu_vector(inst, sol.multipliers))
        ex_worst = max(ex_worst, abs(t1 - ex))
        ex_fail += not _agree(t1, ex)
    return [Check("power corollaries agree", n, pw_fail, f"max diff {pw_worst:.3g}"),
            Check("exponential corollary agrees", n, ex_fail, f"max diff {ex_worst:.3g}")]


def bounds_suite(seed=0) -> SuiteReport:
    return SuiteReport("bounds", [theorem1_check(seed=seed), *corollary_checks(seed=seed)])


# --- projection --------------------------------------------------------------


def projection_check(n=50, seed=0, tol=1e-9, probe=1e-6) -> Check:
    """Backward recursion, generic FME, LP bounds and completion checks agree stage by stage."""
    fails, worst, stages = 0, 0.0, 0
    for i in range(n):
        rng = _rng(seed, 101, i)
        params = random_battery_toy(rng, T_range=(2, 6))
        inst = battery_instance(params, params.p)
        bounds = battery_projection_bounds(params)
        prefix, energy, ok = [], 0.0, True
        for t in range(params.T):
            rec = battery_stage_interval(t, energy, bounds, params.l[t], params.u[t], params.dt)
            fme = project_onto_stage(inst, prefix, t)
            lp = lp_stage_interval(inst, prefix, t)
            d = max(abs(rec.lo - fme.lo), abs(rec.hi - fme.hi), abs(rec.lo - lp.lo), abs(rec.hi - lp.hi))
            worst = max(worst, d)
            ok &= d <= tol
            # completion: inside endpoints extend, points just outside do not
            ok &= has_feasible_completion(inst, prefix + [np.array([rec.lo])])
            ok &= has_feasible_completion(inst, prefix + [np.array([rec.hi])])
            if t < params.T - 1 or rec.width > 0:
                ok &= not has_feasible_completion(inst, prefix + [np.array([rec.lo - probe])])
                ok &= not has_feasible_completion(inst, prefix + [np.array([rec.hi + probe])])
            x = float(rng.uniform(rec.lo, rec.hi)) if rec.width > 0 else rec.lo
            prefix.append(np.array([x]))
            energy += params.dt * x
            stages += 1
        fails += not ok
    return Check("projection recursion = FME = completion", n, fails, f"{stages} stages, max diff {worst:.3g}")


def projection_suite(seed=0) -> SuiteReport:
    return SuiteReport("projection", [projection_check(seed=seed)])


# --- oracle ------------------------------------------------------------------

GRID_STEPS = {0: 1, 1: 2000, 2: 400, 3: 80, 4: 30}


def _rap_instance(rng):
    T = int(rng.integers(2, 5))
    u = rng.uniform(1.0, 3.0, T)
    costs = [Quadratic([rng.uniform(-2.0, 2.0)]) for _ in range(T)]
    coupling = CouplingConstraints(np.zeros((0, T)), np.zeros(0), np.ones((1, T)),
                                   np.array([rng.uniform(0.1, 0.9) * u.sum()]), (), ("total",))
    return ProblemInstance(tuple(costs), tuple(StageSet([0.0], [v]) for v in u), coupling, {"problem": "rap"})


def _exp_instance(rng):
    T = int(rng.integers(2, 5))
    u = rng.uniform(1.0, 3.0, T)
    base = Exponential(rng.uniform(0.5, 2.0))
    costs = [ScaledShifted(base, [rng.uniform(0.5, 2.0)], [rng.uniform(-1.0, 1.0)]) for _ in range(T)]
    coupling = CouplingConstraints(np.zeros((0, T)), np.zeros(0), np.ones((1, T)),
                                   np.array([rng.uniform(0.1, 0.9) * u.sum()]), (), ("total",))
    return ProblemInstance(tuple(costs), tuple(StageSet([0.0], [v]) for v in u), coupling, {"problem": "exp-rap"})


def _lp_instance(rng):
    """Two periods, two factories, stock bounds and horizon capacities."""
    T, N = 2, 2
    c = rng.uniform(0.5, 2.0, (T, N))
    d = rng.uniform(0.5, 1.5, T)
    cap = np.zeros((N, T * N))
    for i in range(N):
        cap[i, i::N] = 1.0
    cum = np.zeros((T, T * N))
    for t in range(T):
        cum[t, : (t + 1) * N] = 1.0
    D = np.cumsum(d)
    A_ub = np.vstack([cap, -cum, cum])
    b_ub = np.concatenate([np.full(N, 1.6), -D, D + 0.5])
    coupling = CouplingConstraints(A_ub, b_ub, np.zeros((0, T * N)), np.zeros(0))
    return ProblemInstance(tuple(Linear(c[t]) for t in range(T)),
                           tuple(StageSet(np.zeros(N), np.ones(N)) for _ in range(T)), coupling, {"problem": "lp"})


def oracle_instances(n=50, seed=0):
    """Mixed small instances of total dimension <= 4."""
    out = []
    for i in range(n):
        rng = _rng(seed, 121, i)
        kind = i % 5
        if kind == 0:
            inst = _rap_instance(rng)
        elif kind == 1:
            inst, _ = random_isub_instance(120_000 + 10_000 * seed + i, T_range=(2, 4))
        elif kind == 2:
            p = random_battery_toy(rng, T_range=(2, 4))
            inst = battery_instance(p, p.p)
        elif kind == 3:
            inst = _lp_instance(rng)
        else:
            inst = _exp_instance(rng)
        out.append(inst)
    return out


def max_gradient(instance) -> float:
    """L1 norm bound of the objective gradient over the box (separable convex costs)."""
    lo, hi = instance.lower, instance.upper
    total = 0.0
    for t, f in enumerate(instance.costs):
        sl = instance.stage_slice(t)
        g = np.maximum(np.abs(f.gradient(lo[sl])), np.abs(f.gradient(hi[sl])))
        total += float(np.sum(g))
    return total


def oracle_resolution(instance) -> float:
    c = instance.coupling
    free = instance.n - (np.linalg.matrix_rank(c.A_eq) if c.n_eq else 0)
    width = float(np.max(instance.upper - instance.lower))
    return max(width, 1e-12) / GRID_STEPS[free]


def oracle_check(n=50, seed=0, kkt_tol=1e-6):
    gap_fail, kkt_fail, worst = 0, 0, 0.0
    for inst in oracle_instances(n, seed):
        res = oracle_resolution(inst)
        sol = solve_offline(inst)
        orc = brute_force_oracle(inst, res)
        allowed = 2.0 * res * max_gradient(inst)
        diff = abs(sol.objective - orc.objective)
        worst = max(worst, diff / allowed if allowed > 0 else diff)
        gap_fail += not diff <= allowed
        kkt_fail += not (kkt_residuals(inst, sol.x_star, sol.multipliers).ok(kkt_tol)
                         and check_feasibility(inst, sol.x_star).feasible)
    return [Check("offline vs grid oracle", n, gap_fail, f"max diff/allowed {worst:.3g}"),
            Check("offline KKT residuals", n, kkt_fail)]


def oracle_suite(seed=0) -> SuiteReport:
    return SuiteReport("oracle", oracle_check(seed=seed))


def run_suite(name, seed=0) -> SuiteReport:
    if name not in SUITES:
        raise ModelError(f"unknown suite {name!r}")
    return {"lemmas": lemmas_suite, "bounds": bounds_suite, "projection": projection_suite,
            "oracle": oracle_suite}[name](seed)


__all__ = ["SUITES", "Check", "SuiteReport", "run_suite", "lemma1_check", "lemma2_check", "lemma4_check",
           "lemma4_runs", "theorem1_check", "corollary_checks", "projection_check", "oracle_check",
           "oracle_instances", "oracle_resolution", "max_gradient"]
