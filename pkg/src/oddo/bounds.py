"""Bounds on the online-offline gap under multiplier under-prediction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lagrangian import nu_vector
from .model import DomainError, ModelError, MultiplierVector, Power, ProblemInstance, ScaledShifted


@dataclass
class BoundReport:
    bound_value: float
    realized_gap: float
    premise_satisfied: bool

    @property
    def holds(self) -> bool:
        return self.realized_gap <= self.bound_value + 1e-8

    def to_dict(self):
        return {"bound": self.bound_value, "gap": self.realized_gap, "premise": self.premise_satisfied}


def check_underprediction(m_hat: MultiplierVector, m_star: MultiplierVector) -> bool:
    a, b = m_hat.to_array(), m_star.to_array()
    if a.shape != b.shape:
        raise ModelError("multiplier dimensions differ")
    return bool(np.all(a <= b))


def _unclipped_cost(instance, nus):
    total = 0.0
    for t, f in enumerate(instance.costs):
        sl = instance.stage_slice(t)
        try:
            total += f.value(f.inverse_gradient(nus[sl]))
        except DomainError as exc:
            raise DomainError(str(exc), stage=t) from None
    return total


def theorem1_bound(instance: ProblemInstance, m_hat, m_star) -> float:
    """``sum f(grad f^{-1}(nu(m_hat))) - sum f(grad f^{-1}(nu(m_star)))``."""
    if any(d != 1 for d in instance.dims):
        raise ModelError("the bound is stated for one-dimensional stages")
    return _unclipped_cost(instance, nu_vector(instance, m_hat)) - \
        _unclipped_cost(instance, nu_vector(instance, m_star))


def premise_holds(instance: ProblemInstance, m_hat, m_star) -> bool:
    """Laminar structure, under-prediction, and ``nu* >= 0``.

    The last condition places every unclipped local solution where the cost
    is increasing, which the bound's derivation uses.
    """
    if getattr(instance.structure, "kind", None) not in ("laminar", "battery"):
        return False
    if not check_underprediction(m_hat, m_star):
        return False
    return bool(np.all(nu_vector(instance, m_star) >= 0))


def separable_bound(bases, a, nu_hat, nu_star) -> float:
    """``sum a f_bar(grad f_bar^{-1}(nu_hat)) - sum a f_bar(grad f_bar^{-1}(nu_star))``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    nu_hat = np.atleast_1d(np.asarray(nu_hat, dtype=float))
    nu_star = np.atleast_1d(np.asarray(nu_star, dtype=float))
    if not isinstance(bases, (list, tuple)):
        bases = [bases] * a.size
    total = 0.0
    for t, base in enumerate(bases):
        try:
            total += a[t] * (float(base.value(base.inverse_gradient(nu_hat[t])))
                             - float(base.value(base.inverse_gradient(nu_star[t]))))
        except DomainError as exc:
            raise DomainError(str(exc), stage=t) from None
    return float(total)


def separable_bound_for(instance: ProblemInstance, m_hat, m_star) -> float:
    """:func:`separable_bound` with the known parts of scaled-shifted costs."""
    if not all(isinstance(f, ScaledShifted) and f.dim == 1 for f in instance.costs):
        raise ModelError("separable bound needs one-dimensional scaled-shifted costs")
    bases = [f.base for f in instance.costs]
    a = np.array([f.a[0] for f in instance.costs])
    return separable_bound(bases, a, nu_vector(instance, m_hat), nu_vector(instance, m_star))


def power_bound(K, c, a, nu_hat, nu_star) -> float:
    """``K (1/(cK))^{c/(c-1)} (sum a nu_hat^{c/(c-1)} - sum a nu_star^{c/(c-1)})``."""
    if c == 1:
        raise ModelError("power bound is undefined for c = 1")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    nu_hat = np.atleast_1d(np.asarray(nu_hat, dtype=float))
    nu_star = np.atleast_1d(np.asarray(nu_star, dtype=float))
    if np.any(nu_hat <= 0) or np.any(nu_star <= 0):
        raise DomainError("power bound needs positive dual pressures")
    e = c / (c - 1.0)
    return float(K * (1.0 / (c * K)) ** e * (np.sum(a * nu_hat**e) - np.sum(a * nu_star**e)))


def exp_bound(a, nu_hat, nu_star) -> float:
    """``sum a nu_hat - sum a nu_star``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    nu_hat = np.atleast_1d(np.asarray(nu_hat, dtype=float))
    nu_star = np.atleast_1d(np.asarray(nu_star, dtype=float))
    if np.any(nu_hat <= 0) or np.any(nu_star <= 0):
        raise DomainError("exponential bound needs positive dual pressures")
    return float(np.sum(a * nu_hat) - np.sum(a * nu_star))


def bound_report(instance: ProblemInstance, m_hat, m_star, online_objective, offline_objective) -> BoundReport:
    """Theorem bound against the realised gap; the second term is the offline optimum."""
    premise = premise_holds(instance, m_hat, m_star)
    try:
        value = theorem1_bound(instance, m_hat, m_star)
    except DomainError:
        value, premise = float("nan"), False
    return BoundReport(value, float(online_objective - offline_objective), premise)


def power_parameters(instance):
    """``(K, c, a)`` when every stage shares one power base, else ``None``."""
    fs = instance.costs
    if not all(isinstance(f, ScaledShifted) and isinstance(f.base, Power) for f in fs):
        return None
    K, c = fs[0].base.K, fs[0].base.c
    if any(f.base.K != K or f.base.c != c for f in fs):
        return None
    return K, c, np.array([f.a[0] for f in fs])
