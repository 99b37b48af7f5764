"""Instance generators: battery scheduling, inventory management, example E and
random laminar instances with increasing costs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (CouplingConstraints, Exponential, LaminarFamily, Linear, ModelError, Power, ProblemInstance,
                    Quadratic, ScaledShifted, StageSet, embed_laminar)

# ---------------------------------------------------------------------------
# Battery scheduling


@dataclass(frozen=True, eq=False)
class BatteryParams:
    """Battery data; SoC bounds cover stages ``0..T-2`` and ``C_end`` pins the last."""

    T: int
    dt: float
    l: np.ndarray
    u: np.ndarray
    C_lo: np.ndarray
    C_hi: np.ndarray
    C_end: float = 0.0
    p: np.ndarray | None = None
    kind = "battery"

    def __post_init__(self):
        T = int(self.T)
        for name, size in (("l", T), ("u", T), ("C_lo", T - 1), ("C_hi", T - 1)):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (size,)).copy()
            object.__setattr__(self, name, arr)
        if self.p is not None:
            p = np.asarray(self.p, dtype=float).reshape(-1)
            if p.size != T:
                raise ModelError("consumption vector needs length T")
            object.__setattr__(self, "p", p)
        if np.any(self.l > self.u):
            raise ModelError("battery rate bounds have l > u")
        if self.dt <= 0:
            raise ModelError("interval length must be positive")

    def with_consumption(self, p) -> "BatteryParams":
        return replace(self, p=np.asarray(p, dtype=float))

    def to_dict(self):
        return {"kind": "battery", "T": self.T, "dt": self.dt, "l": self.l.tolist(), "u": self.u.tolist(),
                "C_lo": self.C_lo.tolist(), "C_hi": self.C_hi.tolist(), "C_end": self.C_end}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["T"]), float(d["dt"]), d["l"], d["u"], d["C_lo"], d["C_hi"], float(d["C_end"]))


def battery_defaults() -> BatteryParams:
    """One day at 15 minute resolution with the field-test battery."""
    return BatteryParams(T=96, dt=0.25, l=-8.67e3, u=8.67e3, C_lo=-5.89e3, C_hi=5.89e3, C_end=0.0)


def battery_coupling(params: BatteryParams) -> CouplingConstraints:
    """Rows scaled by ``1/dt``: lower SoC bounds first, then upper, then the terminal equality."""
    T, dt = params.T, params.dt
    L = np.tril(np.ones((T - 1, T)))
    A_ub = np.vstack([-L, L])
    b_ub = np.concatenate([-params.C_lo / dt, params.C_hi / dt])
    labels = tuple(f"soc_lo[{t}]" for t in range(T - 1)) + tuple(f"soc_hi[{t}]" for t in range(T - 1))
    return CouplingConstraints(A_ub, b_ub, np.ones((1, T)), np.array([params.C_end / dt]), labels, ("soc_end",))


def battery_instance(params: BatteryParams, p=None, metadata=None) -> ProblemInstance:
    p = params.p if p is None else np.asarray(p, dtype=float)
    if p is None:
        raise ModelError("battery instance needs a consumption vector")
    costs = tuple(Quadratic([v]) for v in p)
    boxes = tuple(StageSet([params.l[t]], [params.u[t]]) for t in range(params.T))
    meta = {"problem": "battery"}
    meta.update(metadata or {})
    return ProblemInstance(costs, boxes, battery_coupling(params), meta, params.with_consumption(p))


def battery_multipliers(mu_minus, mu_plus, lam):
    """Pack battery multipliers in the row order used by :func:`battery_coupling`."""
    from .model import MultiplierVector
    return MultiplierVector(np.concatenate([np.asarray(mu_minus, float), np.asarray(mu_plus, float)]),
                            np.atleast_1d(np.asarray(lam, float)))


WEATHER_RHO = 0.7


def _household_profiles(seed, households):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    return {
        "base": rng.uniform(150.0, 350.0, households),
        "morning_amp": rng.uniform(200.0, 700.0, households),
        "morning_at": rng.normal(7.5, 0.6, households),
        "evening_amp": rng.uniform(400.0, 1400.0, households),
        "evening_at": rng.normal(18.5, 0.8, households),
        "pv_peak": np.where(rng.uniform(size=households) < 0.4, rng.uniform(2000.0, 5000.0, households), 0.0),
    }


def _weather(seed, day_index):
    """AR(1) weather index across days; day 0 starts from the stationary law."""
    w = 0.0
    for d in range(day_index + 1):
        eps = np.random.default_rng(np.random.SeedSequence([seed, 1, d])).standard_normal()
        w = eps if d == 0 else WEATHER_RHO * w + math.sqrt(1 - WEATHER_RHO**2) * eps
    return w


def synthetic_consumption(seed, day_index, households=72, shift=False, T=96, l_bound=-8.67e3):
    """Net consumption (W) of a group of households for one day.

    Per household: base load plus Gaussian morning and evening bumps, scaled
    by ``1 + 0.15 w`` for the day's weather index ``w``, minus a solar profile
    scaled by ``clip(0.55 - 0.25 w, 0.05, 1)``, plus 10% multiplicative noise.
    With ``shift`` the profile is lifted so that ``p + l_bound >= 0``.
    """
    if households <= 0:
        return np.zeros(T)
    prof = _household_profiles(seed, households)
    w = _weather(seed, day_index)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, day_index]))
    hours = (np.arange(T) + 0.5) * 24.0 / T
    bump = lambda at, width: np.exp(-0.5 * ((hours[None, :] - at[:, None]) / width) ** 2)  # noqa: E731
    load = (prof["base"][:, None]
            + prof["morning_amp"][:, None] * bump(prof["morning_at"], 1.0)
            + prof["evening_amp"][:, None] * bump(prof["evening_at"], 1.5))
    load *= 1.0 + 0.15 * w
    load *= np.maximum(1.0 + 0.1 * rng.standard_normal(load.shape), 0.0)
    sun = np.clip(np.sin(np.pi * (hours - 6.0) / 14.0), 0.0, None)
    pv = prof["pv_peak"][:, None] * sun[None, :] * float(np.clip(0.55 - 0.25 * w, 0.05, 1.0))
    p = (load - pv).sum(axis=0)
    if shift:
        p = p + max(0.0, -(p.min() + l_bound))
    return p


def generate_battery_instance(seed, day_index, households=72, shift=False) -> ProblemInstance:
    params = battery_defaults()
    p = synthetic_consumption(seed, day_index, households, shift=shift, T=params.T, l_bound=params.l.min())
    return battery_instance(params, p, {"seed": int(seed), "day": int(day_index)})


# ---------------------------------------------------------------------------
# Inventory management

IM_T, IM_N = 24, 3
IM_E = np.array([1.0, 1.5, 2.0])


def im_demand(t) -> float:
    """Demand of period ``t`` (1-based)."""
    return 1000.0 * (1.0 + 0.5 * math.sin(math.pi * (t - 1) / 12.0))


def im_nominal_cost(t, i) -> float:
    """Expected unit cost of factory ``i`` in period ``t`` (both 1-based)."""
    return float(IM_E[i - 1]) * (1.0 - 0.5 * math.sin(math.pi * (t - 1) / 12.0))


@dataclass(frozen=True, eq=False)
class IMParams:
    c: np.ndarray
    T: int = IM_T
    N: int = IM_N
    d: np.ndarray = field(default_factory=lambda: np.array([im_demand(t) for t in range(1, IM_T + 1)]))
    u: float = 567.0
    C: np.ndarray = field(default_factory=lambda: np.full(IM_N, 13600.0))
    L: float = 500.0
    U: float = 2000.0
    S: float = 500.0
    kind = "im"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(self.T, self.N)
        object.__setattr__(self, "c", c)
        if np.any(np.asarray(self.d) < 0):
            raise ModelError("demand must be nonnegative")
        if not 0 <= self.L <= self.S <= self.U:
            raise ModelError("need 0 <= L <= S <= U")


def im_nominal_costs() -> np.ndarray:
    return np.array([[im_nominal_cost(t, i) for i in range(1, IM_N + 1)] for t in range(1, IM_T + 1)])


def sample_im_costs(rng) -> np.ndarray:
    cbar = im_nominal_costs()
    return rng.uniform(0.8 * cbar, 1.2 * cbar)


def im_coupling(params: IMParams) -> CouplingConstraints:
    """Horizon capacities, then lower stock bounds, then upper stock bounds."""
    T, N = params.T, params.N
    n = T * N
    cap = np.zeros((N, n))
    for i in range(N):
        cap[i, i::N] = 1.0
    cum = np.zeros((T, n))
    for t in range(T):
        cum[t, : (t + 1) * N] = 1.0
    D = np.cumsum(params.d)
    A_ub = np.vstack([cap, -cum, cum])
    b_ub = np.concatenate([params.C, params.S - params.L - D, params.U - params.S + D])
    labels = tuple(f"capacity[{i}]" for i in range(N)) + tuple(f"stock_lo[{t}]" for t in range(T)) \
        + tuple(f"stock_hi[{t}]" for t in range(T))
    return CouplingConstraints(A_ub, b_ub, np.zeros((0, n)), np.zeros(0), labels, ())


def im_instance(params: IMParams, metadata=None) -> ProblemInstance:
    costs = tuple(Linear(params.c[t]) for t in range(params.T))
    boxes = tuple(StageSet(np.zeros(params.N), np.full(params.N, params.u)) for _ in range(params.T))
    meta = {"problem": "im"}
    meta.update(metadata or {})
    return ProblemInstance(costs, boxes, im_coupling(params), meta, params)


def generate_im_instance(seed) -> ProblemInstance:
    rng = np.random.default_rng(seed)
    return im_instance(IMParams(sample_im_costs(rng)), {"seed": int(seed)})


# ---------------------------------------------------------------------------
# Example E and random laminar instances

EXAMPLE_E_Y = (-4.0, 1.0, -5.0)


def example_e(Y=EXAMPLE_E_Y) -> ProblemInstance:
    """``min sum x_t^2 + Y_t x_t  s.t.  sum x = 10, 0 <= x <= 6``."""
    Y = np.asarray(Y, dtype=float)
    costs = tuple(Quadratic([y / 2.0], const=-(y**2) / 4.0) for y in Y)
    boxes = tuple(StageSet([0.0], [6.0]) for _ in Y)
    coupling = CouplingConstraints(np.zeros((0, 3)), np.zeros(0), np.ones((1, 3)), np.array([10.0]),
                                   (), ("total",))
    return ProblemInstance(costs, boxes, coupling, {"problem": "example-e"})


def random_laminar_family(rng, T, upper_range=(1.0, 3.0)) -> LaminarFamily:
    """Random laminar family with zero lower bounds and feasible capacities."""
    upper = rng.uniform(*upper_range, T)
    lower = np.zeros(T)
    perm = list(rng.permutation(T))
    sets: list = []

    def split(block):
        if len(block) <= 1:
            return
        k = int(rng.integers(2, min(3, len(block)) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(block)), size=k - 1, replace=False))
        parts = np.split(np.array(block), cuts)
        for part in parts:
            part = [int(v) for v in part]
            if len(part) < T and rng.uniform() < (0.5 if len(part) == 1 else 0.75):
                sets.append(frozenset(part))
            split(part)

    split(perm)
    sets = list(dict.fromkeys(sets))
    caps = {}
    for s in sorted(sets, key=len):
        # room left after the largest family subsets of s
        inner = [x for x in sets if x < s and not any(x < y < s for y in sets)]
        covered = set().union(*inner) if inner else set()
        room = sum(caps[x] for x in inner) + sum(upper[t] for t in s - covered)
        low = sum(lower[t] for t in s)
        caps[s] = low + rng.uniform(0.3, 1.0) * (room - low)
    top = [x for x in sets if not any(x < y for y in sets)]
    covered = set().union(*top) if top else set()
    room = sum(caps[x] for x in top) + sum(upper[t] for t in set(range(T)) - covered)
    total = rng.uniform(0.2, 0.9) * room
    return LaminarFamily(T, sets, [caps[s] for s in sets], total, lower, upper)


def random_increasing_costs(rng, T, kind="mixed"):
    """Costs increasing on ``x >= 0``.

    ``kind``: ``quadratic``, ``power`` (own base per stage), ``shared-power``
    (one power base for all stages), ``exponential`` or ``mixed``.
    """
    costs = []
    if kind == "shared-power":
        base = Power(rng.uniform(0.5, 2.0), rng.uniform(1.5, 3.0))
    elif kind == "exponential":
        base = Exponential(rng.uniform(0.5, 2.0))
    for _ in range(T):
        pick = kind if kind != "mixed" else ("quadratic" if rng.uniform() < 0.5 else "power")
        if pick == "quadratic":
            costs.append(Quadratic([rng.uniform(0.0, 2.0)]))
        elif pick == "power":
            costs.append(ScaledShifted(Power(rng.uniform(0.5, 2.0), rng.uniform(1.5, 3.0)),
                                       [rng.uniform(0.5, 2.0)], [rng.uniform(0.1, 1.0)]))
        elif pick in ("shared-power", "exponential"):
            costs.append(ScaledShifted(base, [rng.uniform(0.5, 2.0)], [rng.uniform(0.1, 1.0)]))
        else:
            raise ModelError(f"unknown cost kind {kind!r}")
    return costs


def random_isub_instance(seed, T_range=(2, 10), kind="mixed", max_tries=50):
    """Random laminar instance whose optimal dual pressures are all positive.

    Positive ``nu*`` keeps every local solution in the increasing region of
    its cost, which the bound calculators require.
    """
    from .lagrangian import nu_vector
    from .offline import solve_offline

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    for _ in range(max_tries):
        T = int(rng.integers(T_range[0], T_range[1] + 1))
        family = random_laminar_family(rng, T)
        inst = embed_laminar(family, random_increasing_costs(rng, T, kind))
        sol = solve_offline(inst)
        if np.all(nu_vector(inst, sol.multipliers) > 1e-6):
            meta = dict(inst.metadata, seed=int(seed))
            return ProblemInstance(inst.costs, inst.boxes, inst.coupling, meta, inst.structure), sol
    raise ModelError("could not draw an instance with positive dual pressures")


def random_underprediction(rng, m_star):
    """Component-wise under-prediction: ``mu`` scaled down, ``lam`` shifted down."""
    from .model import MultiplierVector

    mu = m_star.mu * rng.uniform(0.0, 1.0, m_star.mu.size)
    lam = m_star.lam - np.abs(rng.normal(0.0, 0.5 * (1.0 + np.abs(m_star.lam))))
    return MultiplierVector(mu, lam)


def random_battery_toy(rng, T_range=(2, 6), max_tries=100) -> BatteryParams:
    """Small feasible battery with random rates, SoC band and quadratic shifts."""
    from .projection import battery_projection_bounds

    for _ in range(max_tries):
        T = int(rng.integers(T_range[0], T_range[1] + 1))
        dt = float(rng.choice([0.25, 0.5, 1.0]))
        u = rng.uniform(1.0, 3.0, T)
        l = -rng.uniform(1.0, 3.0, T)
        C_hi = rng.uniform(0.5, 4.0, T - 1)
        C_lo = -rng.uniform(0.5, 4.0, T - 1)
        C_end = float(rng.uniform(-1.0, 1.0))
        params = BatteryParams(T, dt, l, u, C_lo, C_hi, C_end, p=rng.uniform(-2.0, 2.0, T))
        try:
            battery_projection_bounds(params)
        except ModelError:
            continue
        return params
    raise ModelError("could not draw a feasible battery toy")
