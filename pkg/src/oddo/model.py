"""Data model for stage-sequential convex problems with coupling constraints.

A problem instance has ``T`` stages. Stage ``t`` owns a decision vector
``x^t`` of dimension ``N^t``, a cost function, and a box.  Stages are coupled
through affine inequality rows ``A_ub x <= b_ub`` and equality rows
``A_eq x = b_eq`` acting on the flat (stacked) decision vector.

Stage indices are zero-based throughout the library.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class ModelError(ValueError):
    """Malformed or inconsistent model data."""


class DomainError(ValueError):
    """A gradient or inverse gradient was evaluated outside its domain."""

    def __init__(self, message, stage=None):
        if stage is not None:
            message = f"stage {stage}: {message}"
        super().__init__(message)
        self.stage = stage


def _vec(values, name="values") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ModelError(f"{name} must be one-dimensional")
    return arr


# ---------------------------------------------------------------------------
# Base functions f̄ used by scaled-shifted costs

ROUNDOFF = 1e-12


@dataclass(frozen=True)
class Power:
    """``K * y**c`` on ``y >= 0``."""

    K: float = 1.0
    c: float = 2.0

    def __post_init__(self):
        if self.K <= 0:
            raise ModelError("Power base needs K > 0")
        if self.c < 1:
            raise ModelError("Power base needs exponent c >= 1")

    @staticmethod
    def _domain(y, what):
        y = np.asarray(y, dtype=float)
        if np.any(y < -ROUNDOFF):
            raise DomainError(f"power base {what} at negative argument")
        # x / a + b can land a few ulps below zero at the domain edge
        return np.maximum(y, 0.0)

    def value(self, y):
        return self.K * self._domain(y, "evaluated") ** self.c

    def gradient(self, y):
        return self.c * self.K * self._domain(y, "gradient") ** (self.c - 1.0)

    def inverse_gradient(self, d):
        d = np.asarray(d, dtype=float)
        if self.c == 1:
            raise DomainError("power base with c = 1 has no inverse gradient")
        if np.any(d < 0):
            raise DomainError("power base inverse gradient needs nonnegative argument")
        return (d / (self.c * self.K)) ** (1.0 / (self.c - 1.0))

    def gradient_range(self):
        return (0.0, math.inf)

    def to_dict(self):
        return {"kind": "power", "K": self.K, "c": self.c}


@dataclass(frozen=True)
class Exponential:
    """``K * exp(y)``."""

    K: float = 1.0

    def __post_init__(self):
        if self.K <= 0:
            raise ModelError("Exponential base needs K > 0")

    def value(self, y):
        return self.K * np.exp(np.asarray(y, dtype=float))

    def gradient(self, y):
        return self.K * np.exp(np.asarray(y, dtype=float))

    def inverse_gradient(self, d):
        d = np.asarray(d, dtype=float)
        if np.any(d <= 0):
            raise DomainError("exponential base inverse gradient needs a positive argument")
        return np.log(d / self.K)

    def gradient_range(self):
        return (0.0, math.inf)

    def to_dict(self):
        return {"kind": "exponential", "K": self.K}


@dataclass(frozen=True)
class Square:
    """``y**2``."""

    def value(self, y):
        return np.asarray(y, dtype=float) ** 2

    def gradient(self, y):
        return 2.0 * np.asarray(y, dtype=float)

    def inverse_gradient(self, d):
        return 0.5 * np.asarray(d, dtype=float)

    def gradient_range(self):
        return (-math.inf, math.inf)

    def to_dict(self):
        return {"kind": "square"}


BaseFunction = Power | Exponential | Square


def base_from_dict(d) -> BaseFunction:
    kind = d["kind"]
    if kind == "power":
        return Power(K=float(d["K"]), c=float(d["c"]))
    if kind == "exponential":
        return Exponential(K=float(d["K"]))
    if kind == "square":
        return Square()
    raise ModelError(f"unknown base function kind {kind!r}")


# ---------------------------------------------------------------------------
# Stage cost functions

class CostFunction:
    """Separable stage cost ``f^t``; subclasses are immutable.

    Strictly convex kinds expose ``inverse_gradient`` which maps a dual
    pressure ``nu`` (one per coordinate) to the unconstrained minimiser of
    ``f(x) - nu * x``.
    """

    strictly_convex = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def inverse_gradient(self, nu) -> np.ndarray:
        raise NotImplementedError

    def gradient_range(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def clipped_inverse_gradient(self, nu, lo, hi) -> np.ndarray:
        """Minimiser of ``f(x) - nu.x`` over the box ``[lo, hi]``.

        Never raises for ``nu`` outside the gradient range: monotonicity of the
        gradient decides which bound is active.
        """
        nu = np.broadcast_to(np.asarray(nu, dtype=float), (self.dim,))
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,))
        g_lo = self._coordinate_gradient(lo)
        g_hi = self._coordinate_gradient(hi)
        out = np.empty(self.dim)
        for i in range(self.dim):
            if nu[i] <= g_lo[i]:
                out[i] = lo[i]
            elif nu[i] >= g_hi[i]:
                out[i] = hi[i]
            else:
                out[i] = min(max(self._coordinate_inverse(i, nu[i]), lo[i]), hi[i])
        return out

    def _coordinate_gradient(self, x) -> np.ndarray:
        return self.gradient(x)

    def _coordinate_inverse(self, i, nu_i) -> float:
        nu = np.zeros(self.dim)
        nu[i] = nu_i
        return float(self.inverse_gradient(nu)[i]) if self.dim > 1 else float(self.inverse_gradient(nu)[0])

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(CostFunction):
    """``sum_i (p_i + x_i)**2 + const``."""

    p: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", _vec(self.p, "p"))

    @property
    def dim(self):
        return self.p.size

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.sum((self.p + x) ** 2) + self.const)

    def gradient(self, x):
        return 2.0 * (self.p + np.asarray(x, dtype=float))

    def inverse_gradient(self, nu):
        return 0.5 * np.asarray(nu, dtype=float) - self.p

    def to_dict(self):
        return {"kind": "quadratic", "p": self.p.tolist(), "const": self.const}


@dataclass(frozen=True, eq=False)
class ScaledShifted(CostFunction):
    """``sum_i a_i * base(x_i / a_i + b_i)`` with known ``a > 0``."""

    base: BaseFunction
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _vec(self.a, "a")
        b = _vec(self.b, "b")
        if a.shape != b.shape:
            a, b = np.broadcast_arrays(a, b)
            a, b = a.copy(), b.copy()
        if np.any(a <= 0):
            raise ModelError("ScaledShifted needs a > 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def dim(self):
        return self.a.size

    def value(self, x):
        y = np.asarray(x, dtype=float) / self.a + self.b
        return float(np.sum(self.a * self.base.value(y)))

    def gradient(self, x):
        return self.base.gradient(np.asarray(x, dtype=float) / self.a + self.b)

    def inverse_gradient(self, nu):
        return self.a * (self.base.inverse_gradient(nu) - self.b)

    def gradient_range(self):
        return self.base.gradient_range()

    def _coordinate_gradient(self, x):
        # the box may touch the edge of the base domain; clamp to it
        y = np.asarray(x, dtype=float) / self.a + self.b
        if isinstance(self.base, Power):
            y = np.maximum(y, 0.0)
        return self.base.gradient(y)

    def _coordinate_inverse(self, i, nu_i):
        return float(self.a[i] * (self.base.inverse_gradient(nu_i) - self.b[i]))

    def to_dict(self):
        return {"kind": "scaled_shifted", "base": self.base.to_dict(),
                "a": self.a.tolist(), "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Linear(CostFunction):
    """``c . x`` (convex but not strictly convex)."""

    c: np.ndarray
    strictly_convex = False

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c, "c"))

    @property
    def dim(self):
        return self.c.size

    def value(self, x):
        return float(np.dot(self.c, np.asarray(x, dtype=float)))

    def gradient(self, x):
        return self.c.copy()

    def inverse_gradient(self, nu):
        raise DomainError("linear cost has no inverse gradient")

    def clipped_inverse_gradient(self, nu, lo, hi):
        raise DomainError("linear cost has no inverse gradient")

    def to_dict(self):
        return {"kind": "linear", "c": self.c.tolist()}


def cost_from_dict(d) -> CostFunction:
    kind = d["kind"]
    if kind == "quadratic":
        return Quadratic(d["p"], float(d.get("const", 0.0)))
    if kind == "scaled_shifted":
        return ScaledShifted(base_from_dict(d["base"]), d["a"], d["b"])
    if kind == "linear":
        return Linear(d["c"])
    raise ModelError(f"unknown cost kind {kind!r}")


# ---------------------------------------------------------------------------
# Constraints, stages, instances

@dataclass(frozen=True, eq=False)
class StageSet:
    """Compact box ``l <= x^t <= u``."""

    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        l, u = _vec(self.l, "l"), _vec(self.u, "u")
        if l.shape != u.shape:
            raise ModelError("box bounds differ in length")
        if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
            raise ModelError("box bounds must be finite")
        if np.any(l > u):
            raise ModelError("box has l > u")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)

    @property
    def dim(self):
        return self.l.size


@dataclass(frozen=True, eq=False)
class CouplingConstraints:
    """Affine rows over the flat decision vector.

    ``A_ub @ x <= b_ub`` are the inequalities (index set M), ``A_eq @ x = b_eq``
    the equalities (index set L).
    """

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    ub_labels: tuple = ()
    eq_labels: tuple = ()

    def __post_init__(self):
        A_ub = np.atleast_2d(np.asarray(self.A_ub, dtype=float))
        A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if A_ub.shape[0] != b_ub.size or A_eq.shape[0] != b_eq.size:
            raise ModelError("coupling rows and right-hand sides differ in length")
        if A_ub.shape[1] != A_eq.shape[1] and A_ub.shape[0] and A_eq.shape[0]:
            raise ModelError("coupling matrices differ in width")
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_ub", b_ub)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "ub_labels", tuple(self.ub_labels))
        object.__setattr__(self, "eq_labels", tuple(self.eq_labels))

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros((0, n)), np.zeros(0))

    @property
    def n_ub(self):
        return self.b_ub.size

    @property
    def n_eq(self):
        return self.b_eq.size


@dataclass(frozen=True, eq=False)
class MultiplierVector:
    """Dual point ``(mu, lam)``: one entry per inequality and per equality."""

    mu: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if np.any(mu < 0):
            raise ModelError("inequality multipliers must be nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def zeros(cls, n_ub, n_eq):
        return cls(np.zeros(n_ub), np.zeros(n_eq))

    @classmethod
    def from_array(cls, arr, n_ub):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:n_ub], arr[n_ub:])

    def to_array(self):
        return np.concatenate([self.mu, self.lam])

    @property
    def dim(self):
        return self.mu.size + self.lam.size

    def __le__(self, other):
        return bool(np.all(self.to_array() <= other.to_array()))

    def to_dict(self):
        return {"mu": self.mu.tolist(), "lambda": self.lam.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mu"], d["lambda"])


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """An instance of the stage-sequential problem.

    ``structure`` optionally carries a :class:`LaminarFamily` or battery
    parameters; the online engine uses it to pick a cheap projection.
    """

    costs: tuple
    boxes: tuple
    coupling: CouplingConstraints
    metadata: dict = field(default_factory=dict)
    structure: object = None

    def __post_init__(self):
        costs, boxes = tuple(self.costs), tuple(self.boxes)
        if not costs:
            raise ModelError("instance needs at least one stage")
        if len(costs) != len(boxes):
            raise ModelError("costs and boxes differ in stage count")
        for t, (f, box) in enumerate(zip(costs, boxes)):
            if f.dim != box.dim:
                raise ModelError(f"stage {t}: cost dimension {f.dim} != box dimension {box.dim}")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "boxes", boxes)
        n = sum(b.dim for b in boxes)
        c = self.coupling
        for A in (c.A_ub, c.A_eq):
            if A.shape[0] and A.shape[1] != n:
                raise ModelError(f"coupling width {A.shape[1]} != total dimension {n}")
        offsets = np.concatenate([[0], np.cumsum([b.dim for b in boxes])]).astype(int)
        object.__setattr__(self, "_offsets", offsets)

    @property
    def T(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return int(self._offsets[-1])

    @property
    def dims(self):
        return [b.dim for b in self.boxes]

    def stage_slice(self, t) -> slice:
        return slice(int(self._offsets[t]), int(self._offsets[t + 1]))

    @property
    def lower(self):
        return np.concatenate([b.l for b in self.boxes])

    @property
    def upper(self):
        return np.concatenate([b.u for b in self.boxes])

    def A_ub_stage(self, t):
        A = self.coupling.A_ub
        return A[:, self.stage_slice(t)] if A.shape[0] else np.zeros((0, self.dims[t]))

    def A_eq_stage(self, t):
        A = self.coupling.A_eq
        return A[:, self.stage_slice(t)] if A.shape[0] else np.zeros((0, self.dims[t]))

    def with_costs(self, costs) -> "ProblemInstance":
        return ProblemInstance(tuple(costs), self.boxes, self.coupling, dict(self.metadata), self.structure)

    def multiplier_dim(self):
        return self.coupling.n_ub + self.coupling.n_eq

    def split(self, x) -> list:
        x = np.asarray(x, dtype=float).reshape(-1)
        return [x[self.stage_slice(t)] for t in range(self.T)]


def flatten(x) -> np.ndarray:
    """Stack per-stage decisions (scalars or vectors) into one flat vector."""
    return np.concatenate([np.atleast_1d(np.asarray(v, dtype=float)) for v in x])


def evaluate_objective(instance: ProblemInstance, x) -> float:
    """Total cost ``sum_t f^t(x^t)``."""
    x = flatten(x) if not isinstance(x, np.ndarray) else x.reshape(-1)
    if x.size != instance.n:
        raise ModelError(f"decision has length {x.size}, instance needs {instance.n}")
    return float(sum(f.value(x[instance.stage_slice(t)]) for t, f in enumerate(instance.costs)))


@dataclass
class FeasibilityReport:
    ineq_violation: np.ndarray
    eq_violation: np.ndarray
    box_violation: np.ndarray
    tol: float

    @property
    def max_violation(self) -> float:
        parts = [np.max(v, initial=0.0) for v in (self.ineq_violation, self.eq_violation, self.box_violation)]
        return float(max(parts))

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tol


def check_feasibility(instance: ProblemInstance, x, tol: float = 1e-8) -> FeasibilityReport:
    x = flatten(x) if not isinstance(x, np.ndarray) else x.reshape(-1)
    if x.size != instance.n:
        raise ModelError(f"decision has length {x.size}, instance needs {instance.n}")
    c = instance.coupling
    ineq = np.maximum(c.A_ub @ x - c.b_ub, 0.0) if c.n_ub else np.zeros(0)
    eq = np.abs(c.A_eq @ x - c.b_eq) if c.n_eq else np.zeros(0)
    box = np.maximum(np.maximum(instance.lower - x, x - instance.upper), 0.0)
    return FeasibilityReport(ineq, eq, box, tol)


# ---------------------------------------------------------------------------
# Laminar families and the submodular embedding

@dataclass(frozen=True, eq=False)
class LaminarFamily:
    """Nested capacity constraints over stages ``0..T-1``.

    Each set ``X`` in ``sets`` carries ``sum_{t in X} x^t <= capacity``; the
    ground set carries the equality ``sum_t x^t = total``.  ``lower``/``upper``
    are per-stage bounds.
    """

    T: int
    sets: tuple
    capacities: tuple
    total: float
    lower: np.ndarray
    upper: np.ndarray
    kind = "laminar"

    def __post_init__(self):
        sets = tuple(frozenset(int(t) for t in s) for s in self.sets)
        caps = tuple(float(c) for c in self.capacities)
        if len(sets) != len(caps):
            raise ModelError("one capacity per family set required")
        ground = frozenset(range(self.T))
        for s in sets:
            if not s or not s < ground:
                raise ModelError(f"family set {sorted(s)} must be a nonempty proper subset")
        if len(set(sets)) != len(sets):
            raise ModelError("duplicate family set")
        for a, b in itertools.combinations(sets, 2):
            if a & b and not (a <= b or b <= a):
                raise ModelError(f"family is not laminar: {sorted(a)} and {sorted(b)} cross")
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "capacities", caps)
        lower, upper = _vec(self.lower), _vec(self.upper)
        if lower.size != self.T or upper.size != self.T:
            raise ModelError("stage bounds need length T")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def to_dict(self):
        return {"kind": "laminar", "T": self.T, "sets": [sorted(s) for s in self.sets],
                "capacities": list(self.capacities), "total": self.total,
                "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["T"]), d["sets"], d["capacities"], float(d["total"]), d["lower"], d["upper"])

    def constraint_system(self):
        """Rows ``(A_ub, b_ub, A_eq, b_eq)`` of the family over ``x in R^T``."""
        A_ub = np.zeros((len(self.sets), self.T))
        for j, s in enumerate(self.sets):
            A_ub[j, sorted(s)] = 1.0
        return A_ub, np.array(self.capacities), np.ones((1, self.T)), np.array([self.total])

    def rank(self, subset) -> float:
        """Induced set function ``r(X) = max { x(X) : x feasible }``."""
        from .simplex import solve_lp, LPInfeasible

        subset = frozenset(subset)
        if not subset:
            return 0.0
        c = np.zeros(self.T)
        c[sorted(subset)] = -1.0
        A_ub, b_ub, A_eq, b_eq = self.constraint_system()
        try:
            res = solve_lp(c, A_ub, b_ub, A_eq, b_eq, self.lower, self.upper)
        except LPInfeasible as exc:
            raise ModelError("laminar family is infeasible") from exc
        return float(-res.objective)

    def set_function(self) -> Callable[[frozenset], float]:
        cache = {}

        def r(X):
            X = frozenset(X)
            if X not in cache:
                cache[X] = self.rank(X)
            return cache[X]

        return r


def embed_laminar(family: LaminarFamily, costs: Sequence[CostFunction]) -> ProblemInstance:
    """Build the instance ``min sum f^t s.t. x in B(r)`` for a laminar family.

    One inequality per family set, one equality for the ground set, and
    stage boxes ``[r(T) - r(T minus t), r({t})]``.
    """
    costs = tuple(costs)
    if not costs:
        raise ModelError("embedding needs one cost per stage")
    if len(costs) != family.T:
        raise ModelError(f"{len(costs)} costs for a family over {family.T} stages")
    if any(f.dim != 1 for f in costs):
        raise ModelError("laminar embedding needs one-dimensional stages")
    r = family.set_function()
    ground = frozenset(range(family.T))
    boxes = []
    for t in range(family.T):
        hi = r({t})
        lo = family.total - r(ground - {t}) if family.T > 1 else family.total
        # LP round-off can cross by a few ulps on pinned stages
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        boxes.append(StageSet([lo], [hi]))
    A_ub, b_ub, A_eq, b_eq = family.constraint_system()
    labels = tuple("X{" + ",".join(str(t) for t in sorted(s)) + "}" for s in family.sets)
    coupling = CouplingConstraints(A_ub, b_ub, A_eq, b_eq, labels, ("ground",))
    return ProblemInstance(costs, tuple(boxes), coupling, {"problem": "laminar"}, family)


def submodularity_check(r: Callable[[frozenset], float], T: int, tol: float = 1e-9) -> bool:
    """Brute-force ``r(X|Y) + r(X&Y) <= r(X) + r(Y)`` over all pairs (``T <= 12``)."""
    if T > 12:
        raise ModelError("brute-force submodularity check limited to T <= 12")
    subsets = [frozenset(c) for k in range(T + 1) for c in itertools.combinations(range(T), k)]
    values = {s: float(r(s)) for s in subsets}
    if abs(values[frozenset()]) > tol:
        return False
    for X, Y in itertools.combinations(subsets, 2):
        if values[X | Y] + values[X & Y] > values[X] + values[Y] + tol:
            return False
    return True


def tight_sets(r: Callable[[frozenset], float], x, T: int, tol: float = 1e-9) -> list:
    """Subsets ``X`` with ``x(X) = r(X)`` (brute force, ``T <= 12``)."""
    if T > 12:
        raise ModelError("brute-force tight-set enumeration limited to T <= 12")
    x = np.asarray(x, dtype=float).reshape(-1)
    out = []
    for k in range(T + 1):
        for c in itertools.combinations(range(T), k):
            s = frozenset(c)
            if abs(float(x[list(c)].sum()) - float(r(s))) <= tol * max(1.0, abs(float(r(s)))):
                out.append(s)
    return out


def tight_sets_closed(r: Callable[[frozenset], float], x, T: int, tol: float = 1e-9) -> bool:
    """For ``x`` in the submodular polyhedron of ``r``: tight sets are closed under union and intersection."""
    tight = set(tight_sets(r, x, T, tol))
    return all((X | Y) in tight and (X & Y) in tight for X, Y in itertools.combinations(tight, 2))
