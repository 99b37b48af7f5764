"""JSON formats: instances, multiplier vectors, cost streams, training histories."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .model import (CouplingConstraints, LaminarFamily, ModelError, MultiplierVector, ProblemInstance,
                    StageSet, cost_from_dict)


def _schema():
    return json.loads(resources.files("oddo").joinpath("schemas/instance.schema.json").read_text())


def _structure_to_dict(structure):
    if structure is None:
        return None
    kind = getattr(structure, "kind", None)
    if kind in ("laminar", "battery"):
        return structure.to_dict()
    if kind == "im":
        return {"kind": "im"}
    raise ModelError(f"cannot serialise structure {structure!r}")


def instance_to_dict(instance: ProblemInstance) -> dict:
    c = instance.coupling
    return {
        "T": instance.T,
        "stages": [{"cost": f.to_dict(), "box": {"l": b.l.tolist(), "u": b.u.tolist()}}
                   for f, b in zip(instance.costs, instance.boxes)],
        "inequalities": [{"coef": c.A_ub[j].tolist(), "rhs": float(c.b_ub[j]),
                          **({"label": c.ub_labels[j]} if c.ub_labels else {})} for j in range(c.n_ub)],
        "equalities": [{"coef": c.A_eq[k].tolist(), "rhs": float(c.b_eq[k]),
                        **({"label": c.eq_labels[k]} if c.eq_labels else {})} for k in range(c.n_eq)],
        "metadata": dict(instance.metadata),
        "structure": _structure_to_dict(instance.structure),
    }


def instance_from_dict(d: dict, validate=True) -> ProblemInstance:
    if validate:
        try:
            jsonschema.validate(d, _schema())
        except jsonschema.ValidationError as exc:
            raise ModelError(f"invalid instance document: {exc.message}") from None
    if d["T"] != len(d["stages"]):
        raise ModelError("T does not match the number of stages")
    costs = tuple(cost_from_dict(s["cost"]) for s in d["stages"])
    boxes = tuple(StageSet(s["box"]["l"], s["box"]["u"]) for s in d["stages"])
    n = sum(b.dim for b in boxes)
    ineq, eq = d["inequalities"], d["equalities"]
    coupling = CouplingConstraints(
        np.array([r["coef"] for r in ineq], dtype=float).reshape(-1, n),
        np.array([r["rhs"] for r in ineq], dtype=float),
        np.array([r["coef"] for r in eq], dtype=float).reshape(-1, n),
        np.array([r["rhs"] for r in eq], dtype=float),
        tuple(r.get("label", f"ineq{j}") for j, r in enumerate(ineq)) if ineq else (),
        tuple(r.get("label", f"eq{k}") for k, r in enumerate(eq)) if eq else (),
    )
    structure = None
    s = d.get("structure")
    if s:
        if s["kind"] == "laminar":
            structure = LaminarFamily.from_dict(s)
        elif s["kind"] == "battery":
            from .problems import BatteryParams
            p = np.array([f.p[0] for f in costs]) if all(hasattr(f, "p") for f in costs) else None
            structure = BatteryParams.from_dict(s)
            if p is not None:
                structure = structure.with_consumption(p)
        elif s["kind"] == "im":
            from .problems import IMParams
            structure = IMParams(np.vstack([f.c for f in costs]))
    return ProblemInstance(costs, boxes, coupling, dict(d.get("metadata", {})), structure)


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def save_instance(instance: ProblemInstance, path):
    Path(path).write_text(dumps(instance_to_dict(instance)) + "\n")


def load_instance(path) -> ProblemInstance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def load_multipliers(path) -> MultiplierVector:
    return MultiplierVector.from_dict(json.loads(Path(path).read_text()))


def read_cost_stream(path):
    """Yield ``(t, cost)`` pairs from a JSON-lines file with records ``{"t", "cost"}``."""
    from .online import RevealedStage

    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                yield RevealedStage(int(rec["t"]), cost_from_dict(rec["cost"]))


def write_cost_stream(instance: ProblemInstance, path):
    with open(path, "w") as fh:
        for t, f in enumerate(instance.costs):
            fh.write(json.dumps({"t": t, "cost": f.to_dict()}, sort_keys=True) + "\n")


def history_to_list(entries):
    """``entries``: iterable of ``(id, MultiplierVector, parameters)``."""
    return [{"id": i, "multipliers": m.to_dict(), "parameters": np.asarray(p).tolist()} for i, m, p in entries]


def history_from_list(items):
    return [(it["id"], MultiplierVector.from_dict(it["multipliers"]), np.asarray(it["parameters"]))
            for it in items]
