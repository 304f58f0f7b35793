"""Heuristic transfer policies and structural condition checkers.

Three heuristics are provided, in increasing order of lookahead:

* myopic: cheapest available facility for the discharged type;
* one-step lookahead: immediate rate plus the expected myopic rate at the
  next state under the candidate action's availability kernel;
* two-step lookahead: the same construction rolled one period further, with
  both future stages discounted by a weight ``w``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (LOSS, Instance, InstanceError, SystemState, action_values,
                    feasible_actions)
from .solve import Policy, SolveResult

__all__ = [
    "ScoreBreakdown",
    "OpCounter",
    "ThresholdReport",
    "myopic_policy",
    "rpr_score",
    "rpr_policy",
    "two_step_policy",
    "explain_state",
    "check_myopic_optimality_condition",
    "check_threshold_condition",
    "verify_threshold_structure",
    "count_operations",
]


@dataclass(frozen=True)
class ScoreBreakdown:
    """Score of one candidate action at one state."""

    action: int
    immediate: float
    lookahead: tuple[float, ...] = ()

    @property
    def total(self) -> float:
        return self.immediate + sum(self.lookahead)

    def to_dict(self) -> dict:
        return {"action": self.action, "immediate": self.immediate,
                "lookahead": list(self.lookahead), "total": self.total}


@dataclass(frozen=True)
class OpCounter:
    """Exact work counters for policy construction."""

    heuristic: str
    score_evaluations: int
    M: int                  # total number of (state, feasible action) pairs
    num_states: int
    num_avail_patterns: int


# ----------------------------------------------------------------------
# heuristic building blocks
# ----------------------------------------------------------------------

def _myopic_value_table(instance: Instance) -> np.ndarray:
    """(k+1, 2**l) immediate cost of the myopic choice at every state; the
    loss penalty where nothing is available and 0 for no-discharge states."""
    q = np.where(instance.feasible_mask, instance.action_costs[:, None, :], np.inf)
    return q.min(axis=2)


def myopic_policy(instance: Instance) -> Policy:
    """Send each discharged patient to the cheapest available admissible
    facility; fall back to the loss action only when none is available."""
    k, l = instance.num_types, instance.num_facilities
    nA = instance.num_avail_patterns
    real = np.where(instance.feasible_mask[:, :, 1:],
                    instance.action_costs[:, None, 1:], np.inf)
    best = real.argmin(axis=2) + 1
    any_real = np.isfinite(real).any(axis=2)
    acts = np.where(any_real, best, LOSS)
    acts[0, :] = LOSS
    return Policy(actions=acts.reshape(-1), kind="myopic")


def _lookahead_scores(instance: Instance, u: np.ndarray) -> np.ndarray:
    """(num_states, l+1): E[u(next state) | action] with the availability
    marginal per action; +inf at infeasible actions.  ``u`` is a value over
    availability patterns (the patient marginal already taken)."""
    l = instance.num_facilities
    if l <= 9:
        fut = instance.avail_kernels @ u
    else:
        fut = np.stack([instance.availability_expectation(a, u) for a in range(l + 1)])
    q = instance.action_costs[:, None, :] + fut.T[None, :, :]
    q = np.where(instance.feasible_mask, q, np.inf)
    return q.reshape(instance.num_states, l + 1)


def rpr_score(instance: Instance, state: SystemState, action: int) -> ScoreBreakdown:
    """One-step lookahead score of a feasible action: the immediate rate plus
    the expected cheapest rate at the next state (loss penalty included when
    the next state has nothing available)."""
    if action not in feasible_actions(instance, state):
        raise InstanceError(
            "action", f"action {action} is not feasible in state {state.key()}")
    m0 = _myopic_value_table(instance)
    u = instance.discharge_probs @ m0
    look = float(instance.availability_expectation(action, u)[state.avail_index()])
    return ScoreBreakdown(action=action,
                          immediate=float(instance.action_costs[state.patient, action]),
                          lookahead=(look,))


def rpr_policy(instance: Instance) -> Policy:
    """Minimize immediate rate plus one-step expected myopic rate."""
    m0 = _myopic_value_table(instance)
    u = instance.discharge_probs @ m0
    q = _lookahead_scores(instance, u)
    return Policy(actions=q.argmin(axis=1), kind="rpr")


def two_step_policy(instance: Instance, w: float) -> Policy:
    """Two-period lookahead with weight ``w`` on each future stage.

    The score of action ``a`` at state ``x`` is::

        r(x, a) + w * E[ min_a' ( r(x', a') + w * E[ min_a'' r(x'', a'') ] ) ]

    where the outer expectation runs under ``a``'s kernel and the inner one
    under the inner minimizer's kernel.  As ``w`` approaches 0 this reduces
    to the myopic rule.
    """
    if not 0.0 < w <= 1.0:
        raise InstanceError("w", "lookahead weight must lie in (0, 1]")
    m0 = _myopic_value_table(instance)
    u0 = w * (instance.discharge_probs @ m0)
    m1 = _lookahead_scores(instance, u0).min(axis=1)
    u1 = w * (instance.discharge_probs @ m1.reshape(instance.num_types + 1, -1))
    q = _lookahead_scores(instance, u1)
    return Policy(actions=q.argmin(axis=1), kind="two_step", weight=w)


def explain_state(instance: Instance, state: SystemState,
                  result: Optional[SolveResult] = None) -> dict:
    """Per-action diagnostics at one state: heuristic score breakdowns plus,
    when a solve result is supplied, the optimality-equation action values."""
    acts = sorted(feasible_actions(instance, state))
    out = {
        "state": state.key(),
        "feasible_actions": acts,
        "myopic": {a: float(instance.action_costs[state.patient, a]) for a in acts},
        "rpr": {a: rpr_score(instance, state, a).to_dict() for a in acts},
    }
    if result is not None:
        q = action_values(instance, result.action_value_vector(),
                          1.0 if result.criterion == "average" else result.alpha)
        x = instance.encode(state)
        out["optimality"] = {a: float(q[x, a]) for a in acts}
    return out


# ----------------------------------------------------------------------
# structural conditions
# ----------------------------------------------------------------------

def check_myopic_optimality_condition(instance: Instance, tol: float = 1e-12) -> bool:
    """True when every real facility's availability kernel is the same under
    every action, in which case the myopic rule is provably optimal."""
    kern = instance.kernels[:, 1:]         # (l+1, l, 2, 2)
    return bool(np.all(np.abs(kern - kern[0]) <= tol))


def _avail_product(instance: Instance, action: int, bits_from: tuple[int, ...],
                   target: int) -> float:
    """Probability that the real availability vector moves from ``bits_from``
    to pattern ``target`` under ``action``."""
    l = instance.num_facilities
    p = 1.0
    for j in range(1, l + 1):
        p *= instance.kernels[action, j, bits_from[j - 1], (target >> (l - j)) & 1]
    return p


def check_threshold_condition(instance: Instance, state: SystemState, a_star: int,
                              state_prime: SystemState, tol: float = 1e-12) -> bool:
    """Second-order kernel condition under which an optimal assignment at the
    richer state carries over to the poorer state.

    Preconditions: both states share the patient type, the candidate
    facility's bit agrees, and availability at ``state`` dominates
    availability at ``state_prime`` componentwise.
    """
    if state.patient != state_prime.patient:
        raise InstanceError("state_prime", "patient types differ")
    if not 0 <= a_star <= instance.num_facilities:
        raise InstanceError("a_star", f"action {a_star} out of range")
    s, sp = state.real_avail, state_prime.real_avail
    if a_star != LOSS and s[a_star - 1] != sp[a_star - 1]:
        raise InstanceError("a_star", f"availability of facility {a_star} must agree")
    for j, (bj, bpj) in enumerate(zip(s, sp), start=1):
        if bj < bpj:
            raise InstanceError(
                "state_prime", f"facility {j}: availability must not exceed state's")
    for a_alt in sorted(feasible_actions(instance, state_prime)):
        for target in range(instance.num_avail_patterns):
            lhs = (_avail_product(instance, a_star, sp, target)
                   - _avail_product(instance, a_alt, sp, target))
            rhs = (_avail_product(instance, a_star, s, target)
                   - _avail_product(instance, a_alt, s, target))
            if lhs > rhs + tol:
                return False
    return True


@dataclass(frozen=True)
class ThresholdReport:
    pairs_checked: int
    condition_held: int
    violations: tuple[dict, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_threshold_structure(instance: Instance, result: SolveResult,
                               tol: float = 1e-8) -> ThresholdReport:
    """Scan all state pairs meeting the threshold preconditions; wherever the
    kernel condition holds and the solved policy assigns a real facility at
    the richer state, that facility must also be optimal at the poorer state
    (within ``tol`` of the minimum of the optimality equations there).
    """
    if result is None:
        raise InstanceError("result", "a solve result is required")
    v = result.action_value_vector()
    alpha = 1.0 if result.criterion == "average" else result.alpha
    q = action_values(instance, v, alpha)
    k, l = instance.num_types, instance.num_facilities
    nA = instance.num_avail_patterns
    checked = held = 0
    violations = []
    for i in range(1, k + 1):
        for s in range(nA):
            x = i * nA + s
            a_star = int(result.policy.actions[x])
            if a_star == LOSS:
                continue
            st = instance.decode(x)
            for sp in range(nA):
                if sp == s or (s | sp) != s:      # require componentwise dominance
                    continue
                stp = instance.decode(i * nA + sp)
                if st.avail[a_star] != stp.avail[a_star]:
                    continue
                checked += 1
                if not check_threshold_condition(instance, st, a_star, stp):
                    continue
                held += 1
                xp = i * nA + sp
                if q[xp, a_star] > q[xp].min() + tol:
                    violations.append({
                        "state": st.key(), "state_prime": stp.key(),
                        "action": a_star,
                        "value": float(q[xp, a_star]),
                        "best": float(q[xp].min()),
                    })
    return ThresholdReport(pairs_checked=checked, condition_held=held,
                           violations=tuple(violations))


# ----------------------------------------------------------------------
# work counters
# ----------------------------------------------------------------------

def count_operations(instance: Instance, heuristic: str) -> OpCounter:
    """Count the rate lookups a naive construction of the heuristic performs.

    The myopic rule examines each feasible action once per state.  The
    one-step rule additionally scans, per (state, action) pair, every next
    state and each of its feasible actions for the inner minimum.
    """
    feas = instance.feasible_lists
    sizes = [len(f) for f in feas]
    M = int(sum(sizes))
    if heuristic == "myopic":
        count = 0
        for f in feas:
            count += len(f)
    elif heuristic == "rpr":
        count = 0
        for f in feas:
            for _a in f:
                for sz in sizes:
                    count += sz
    else:
        raise InstanceError("heuristic", f"unknown heuristic {heuristic!r} "
                                         "(expected 'myopic' or 'rpr')")
    return OpCounter(heuristic=heuristic, score_evaluations=count, M=M,
                     num_states=instance.num_states,
                     num_avail_patterns=instance.num_avail_patterns)
