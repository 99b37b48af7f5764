"""Training, prediction and evaluation protocol behind ``oddo evaluate``.

Every instance is regenerated from ``(seed, indices)``, so tests can be
evaluated in any order or in parallel and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io as _io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bounds import bound_report
from .model import ModelError, Quadratic, embed_laminar, evaluate_objective
from .offline import solve_offline
from .online import run_online
from .predictors import candidate as predict_candidate
from .predictors import nominal_strategy
from .problems import (EXAMPLE_E_Y, IMParams, battery_instance, example_e, generate_battery_instance,
                       generate_im_instance, im_instance, random_laminar_family)

PROBLEMS = ("battery", "im", "example-e", "random-isub")
CANDIDATES = ("min", "max", "mean", "median", "nominal", "exact")
TRAINING_SIZES = (1, 3, 5, 10, 50)
BASELINE = "nominal-strategy"
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    training_size: int = 10
    candidates: tuple = CANDIDATES
    tests: int = 10
    seed: int = 0
    fmt: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ModelError(f"unknown problem {self.problem!r}")
        if self.training_size not in TRAINING_SIZES:
            raise ModelError(f"training size must be one of {TRAINING_SIZES}")
        if self.tests < 1:
            raise ModelError("need at least one test instance")
        bad = [c for c in self.candidates if c not in CANDIDATES]
        if bad or not self.candidates:
            raise ModelError(f"unknown candidates {bad}")
        if self.fmt not in FORMATS:
            raise ModelError(f"unknown format {self.fmt!r}")
        if self.workers < 1:
            raise ModelError("workers must be positive")


@dataclass
class RatioRecord:
    instance_id: str
    candidate: str
    online: float
    offline: float
    ratio: float
    status: str = "ok"
    bound: float | None = None
    gap: float | None = None
    premise: bool | None = None


def _int_seed(*words) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1)[0])


# --- scenarios -------------------------------------------------------------
# Each scenario returns (test instance, training instances, params_of, with_parameters).


def _im_params(inst):
    return inst.structure.c


def _im_rebuild(inst, c):
    return im_instance(IMParams(c), inst.metadata)


@lru_cache(maxsize=4)
def _im_pool(seed, size):
    out = []
    for k in range(size):
        inst = generate_im_instance(_int_seed(seed, 1, k))
        out.append((inst, solve_offline(inst).multipliers))
    return tuple(out)


def _battery_params(inst):
    return inst.structure.p


def _battery_rebuild(inst, p):
    return battery_instance(inst.structure, p, inst.metadata)


def _ee_params(inst):
    return np.array([2.0 * f.p[0] for f in inst.costs])


def _ee_rebuild(inst, Y):
    return example_e(Y)


def _ee_instance(seed, *words):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), *words]))
    return example_e(np.asarray(EXAMPLE_E_Y) + rng.normal(0.0, 1.0, 3))


def _isub_params(inst):
    return np.array([f.p[0] for f in inst.costs])


def _isub_rebuild(inst, p):
    return embed_laminar(inst.structure, [Quadratic([v]) for v in p])


def _isub_instance(seed, j, k=None):
    """Fixed laminar constraints per test; costs ``(p + x)^2`` with noisy ``p >= 0``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3, j]))
    T = int(rng.integers(2, 11))
    family = random_laminar_family(rng, T)
    pbar = rng.uniform(0.2, 2.0, T)
    noise_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 4, j] + ([] if k is None else [k + 1])))
    p = np.maximum(pbar + noise_rng.normal(0.0, 0.3, T), 0.0)
    return embed_laminar(family, [Quadratic([v]) for v in p])


def _scenario(cfg: ExperimentConfig, j):
    """Test instance ``j``, its training history ``[(instance, m*)]`` and parameter hooks."""
    N = cfg.training_size
    if cfg.problem == "im":
        test = generate_im_instance(_int_seed(cfg.seed, 2, j))
        return test, list(_im_pool(cfg.seed, N)), _im_params, _im_rebuild
    if cfg.problem == "battery":
        # training days immediately precede the test day
        day = N + j
        test = generate_battery_instance(cfg.seed, day)
        hist = []
        for d in range(day - N, day):
            inst = generate_battery_instance(cfg.seed, d)
            hist.append((inst, solve_offline(inst).multipliers))
        return test, hist, _battery_params, _battery_rebuild
    if cfg.problem == "example-e":
        test = _ee_instance(cfg.seed, 2, j)
        hist = []
        for k in range(N):
            inst = _ee_instance(cfg.seed, 1, j, k)
            hist.append((inst, solve_offline(inst).multipliers))
        return test, hist, _ee_params, _ee_rebuild
    test = _isub_instance(cfg.seed, j)
    hist = []
    for k in range(N):
        inst = _isub_instance(cfg.seed, j, k)
        hist.append((inst, solve_offline(inst).multipliers))
    return test, hist, _isub_params, _isub_rebuild


def _record(iid, name, instance, online, offline, m_hat=None, m_star=None):
    rec = RatioRecord(iid, name, float(online), float(offline), float(online) / float(offline))
    if m_hat is not None and getattr(instance.structure, "kind", None) == "laminar":
        rep = bound_report(instance, m_hat, m_star, online, offline)
        rec.bound, rec.gap, rec.premise = rep.bound_value, rep.realized_gap, rep.premise_satisfied
    return rec


def _failed(iid, name, exc):
    nan = float("nan")
    return RatioRecord(iid, name, nan, nan, nan, status=f"error: {type(exc).__name__}: {exc}")


def evaluate_test(cfg: ExperimentConfig, j: int) -> list:
    """All candidate records for test instance ``j``; failures become error records."""
    iid = f"{cfg.problem}-{cfg.seed}-{j:04d}"
    try:
        test, hist, params_of, rebuild = _scenario(cfg, j)
        offline = solve_offline(test)
    except Exception as exc:  # noqa: BLE001 - reported per instance
        return [_failed(iid, c, exc) for c in (*cfg.candidates, BASELINE)]
    m_star = offline.multipliers
    H = [m for _, m in hist]
    P = [params_of(inst) for inst, _ in hist]
    records = []
    nominal = None
    try:
        nominal = nominal_strategy(test, P, rebuild)
        records.append(_record(iid, BASELINE, test, evaluate_objective(test, nominal[0]), offline.objective))
    except Exception as exc:  # noqa: BLE001
        records.append(_failed(iid, BASELINE, exc))
    for name in cfg.candidates:
        try:
            if name == "exact":
                m_hat = m_star
            elif name == "nominal":
                if nominal is None:
                    raise ModelError("nominal problem could not be solved")
                m_hat = nominal[1]
            else:
                m_hat = predict_candidate(H, name)
            trace = run_online(test, m_hat)
            records.append(_record(iid, name, test, trace.objective, offline.objective, m_hat, m_star))
        except Exception as exc:  # noqa: BLE001
            records.append(_failed(iid, name, exc))
    return records


def _quantiles(values):
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"count": int(v.size), "median": float(med), "q1": float(q1), "q3": float(q3),
            "min": float(v.min()), "max": float(v.max())}


def summarize(records) -> dict:
    """Per-candidate ratio statistics and success rates against the nominal strategy."""
    by_cand: dict = {}
    for r in records:
        if r.status == "ok":
            by_cand.setdefault(r.candidate, []).append(r.ratio)
    stats = {c: _quantiles(v) for c, v in sorted(by_cand.items())}
    base = {r.instance_id: r.ratio for r in records if r.candidate == BASELINE and r.status == "ok"}
    success = {}
    for c in sorted({r.candidate for r in records} - {BASELINE}):
        pairs = [(r.ratio, base[r.instance_id]) for r in records
                 if r.candidate == c and r.status == "ok" and r.instance_id in base]
        if pairs:
            success[c] = {"wins": sum(a < b for a, b in pairs), "tests": len(pairs),
                          "rate": sum(a < b for a, b in pairs) / len(pairs)}
    failures = sum(r.status != "ok" for r in records)
    return {"ratios": stats, "success_vs_nominal": success, "failures": failures}


@dataclass
class EvaluationResult:
    config: ExperimentConfig
    records: list
    summary: dict = field(default_factory=dict)

    @property
    def failures(self):
        return self.summary.get("failures", 0)


def evaluate(cfg: ExperimentConfig) -> EvaluationResult:
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(evaluate_test, [cfg] * cfg.tests, range(cfg.tests)))
    else:
        chunks = [evaluate_test(cfg, j) for j in range(cfg.tests)]
    records = sorted((r for c in chunks for r in c), key=lambda r: (r.instance_id, r.candidate))
    return EvaluationResult(cfg, records, summarize(records))


# --- output ----------------------------------------------------------------

CSV_FIELDS = ("instance_id", "candidate", "online", "offline", "ratio", "status", "bound", "gap", "premise")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def records_to_csv(records) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def records_from_csv(text) -> list:
    out = []
    for row in csv.DictReader(_io.StringIO(text)):
        opt = lambda s: None if s == "" else float(s)  # noqa: E731
        out.append(RatioRecord(row["instance_id"], row["candidate"], float(row["online"]), float(row["offline"]),
                               float(row["ratio"]), row["status"], opt(row["bound"]), opt(row["gap"]),
                               None if row["premise"] == "" else row["premise"] == "true"))
    return out


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def summary_document(result: EvaluationResult) -> dict:
    cfg = asdict(result.config)
    cfg["candidates"] = list(cfg["candidates"])
    cfg.pop("workers")  # does not affect results
    return _json_safe({"config": cfg, "summary": result.summary})


def write_results(result: EvaluationResult, out_dir) -> list:
    """Write ``ratios.csv`` or ``ratios.json`` plus ``summary.json``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.config.fmt == "csv":
        rpath = out / "ratios.csv"
        rpath.write_text(records_to_csv(result.records))
    else:
        rpath = out / "ratios.json"
        rpath.write_text(json.dumps(_json_safe([asdict(r) for r in result.records]), indent=1, sort_keys=True) + "\n")
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary_document(result), indent=1, sort_keys=True) + "\n")
    return [rpath, spath]
