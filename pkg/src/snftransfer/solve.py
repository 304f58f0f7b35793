"""Exact solvers: discounted value iteration, average-cost policy iteration
with exact gain/bias evaluation, and policy evaluation under both criteria.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import Instance, InstanceError, action_values, bellman_apply

__all__ = [
    "Policy",
    "SolveResult",
    "SolverError",
    "MultichainPolicyError",
    "value_iteration_discounted",
    "policy_iteration_average",
    "relative_value_iteration_average",
    "evaluate_policy_average",
    "evaluate_policy_discounted",
    "unichain_guaranteed",
    "policy_transition_matrix",
    "solve_result_to_dict",
]

# switch an action during policy improvement only on improvement beyond this,
# to prevent cycling between tied optima
IMPROVEMENT_EPS = 1e-10


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class MultichainPolicyError(SolverError):
    """The evaluated policy induces more than one closed recurrent class, so
    its long-run average cost is not a single scalar."""

    def __init__(self, classes: list[list[str]]):
        self.classes = classes
        preview = "; ".join("{" + ", ".join(c[:4]) + (", ..." if len(c) > 4 else "") + "}"
                            for c in classes)
        super().__init__(
            f"policy induces {len(classes)} closed recurrent classes: {preview}")


@dataclass(frozen=True)
class Policy:
    """A stationary deterministic policy over the enumerated state space."""

    actions: np.ndarray
    kind: str = "custom"            # optimal | myopic | rpr | two_step | custom
    weight: Optional[float] = None  # lookahead weight for two_step

    def __post_init__(self):
        acts = np.array(self.actions, dtype=int)
        acts.setflags(write=False)
        object.__setattr__(self, "actions", acts)

    @property
    def label(self) -> str:
        if self.kind == "two_step" and self.weight is not None:
            return f"two_step(w={self.weight:g})"
        return self.kind

    def action(self, instance: Instance, state) -> int:
        return int(self.actions[instance.encode(state)])

    def validate(self, instance: Instance) -> None:
        if self.actions.shape != (instance.num_states,):
            raise InstanceError("policy", f"expected {instance.num_states} actions")
        mask = instance.feasible_mask.reshape(instance.num_states, -1)
        bad = np.flatnonzero(~mask[np.arange(instance.num_states), self.actions])
        if bad.size:
            st = instance.decode(int(bad[0]))
            raise InstanceError(
                "policy", f"infeasible action {self.actions[bad[0]]} at state {st.key()}")


@dataclass(frozen=True)
class SolveResult:
    criterion: str                      # "discounted" | "average"
    policy: Policy
    iterations: int
    residual: float
    alpha: Optional[float] = None       # set for the discounted criterion
    value: Optional[np.ndarray] = None  # discounted value vector
    gain: Optional[float] = None        # average criterion
    bias: Optional[np.ndarray] = None   # average criterion, bias with h[0] = 0

    def action_value_vector(self) -> np.ndarray:
        """The vector driving greedy action choice (v or the bias h)."""
        return self.value if self.criterion == "discounted" else self.bias


# ----------------------------------------------------------------------
# policy evaluation
# ----------------------------------------------------------------------

def unichain_guaranteed(instance: Instance) -> bool:
    """Interior-kernel screen: strictly positive availability transitions for
    every real facility guarantee that every stationary policy is unichain.
    Instances failing the screen are still solvable; evaluation then verifies
    the induced chain's structure by reachability analysis.
    """
    kern = instance.kernels[:, 1:]
    return bool(np.all((kern > 0.0) & (kern < 1.0)))


def policy_transition_matrix(instance: Instance, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    """Dense transition matrix and one-step cost vector of a fixed policy."""
    policy.validate(instance)
    k, l = instance.num_types, instance.num_facilities
    nA = instance.num_avail_patterns
    n = instance.num_states
    lam = instance.discharge_probs
    W = instance.avail_kernels
    acts = policy.actions
    P = np.empty((n, n))
    r = np.empty(n)
    avail_idx = np.arange(n) % nA
    for a in range(l + 1):
        rows = np.flatnonzero(acts == a)
        if rows.size == 0:
            continue
        w_rows = W[a][avail_idx[rows]]                       # (m, nA)
        P[rows] = np.einsum("p,mq->mpq", lam, w_rows).reshape(rows.size, n)
        r[rows] = instance.action_costs[rows // nA, a]
    return P, r


def _closed_classes(instance: Instance, P: np.ndarray) -> list[list[str]]:
    """Closed recurrent classes of a policy chain, as lists of state keys."""
    n = P.shape[0]
    adj = csr_matrix(P > 0.0)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(n), members, assume_unique=False)
        if outside.size == 0 or not np.any(P[np.ix_(members, outside)] > 0.0):
            closed.append([instance.decode(int(x)).key() for x in members])
    return closed


def evaluate_policy_average(instance: Instance, policy: Policy) -> tuple[float, np.ndarray]:
    """Exact long-run average cost and bias of a stationary policy.

    Solves ``g + h = r_f + P_f h`` with ``h`` pinned to 0 at the first
    enumerated state.  Requires the policy chain to be unichain.
    """
    P, r = policy_transition_matrix(instance, policy)
    closed = _closed_classes(instance, P)
    if len(closed) != 1:
        raise MultichainPolicyError(closed)
    n = instance.num_states
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = np.eye(n) - P
    A[:n, n] = 1.0
    A[n, 0] = 1.0
    b = np.concatenate([r, [0.0]])
    try:
        z = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
        raise MultichainPolicyError(closed) from exc
    return float(z[n]), z[:n]


def evaluate_policy_discounted(instance: Instance, policy: Policy, alpha: float) -> np.ndarray:
    """Exact discounted value of a stationary policy: (I - a P_f) v = r_f."""
    if not 0.0 < alpha < 1.0:
        raise InstanceError("alpha", "discount must lie in (0, 1)")
    P, r = policy_transition_matrix(instance, policy)
    n = instance.num_states
    v = np.linalg.solve(np.eye(n) - alpha * P, r)
    resid = np.abs(v - (r + alpha * P @ v)).max()
    if resid > 1e-12 * max(1.0, np.abs(v).max()):
        raise SolverError(f"discounted evaluation residual {resid:.2e} too large")
    return v


# ----------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------

def value_iteration_discounted(instance: Instance, alpha: float, tol: float = 1e-9,
                               max_iterations: int = 10 ** 6) -> SolveResult:
    """Fixed-point iteration of the one-step backup under discounting.

    ``alpha = 0`` is allowed and degenerates to immediate-cost minimization.
    """
    if not 0.0 <= alpha < 1.0:
        raise InstanceError("alpha", "discount must lie in [0, 1)")
    if tol <= 0:
        raise InstanceError("tol", "tolerance must be positive")
    v = np.zeros(instance.num_states)
    for it in range(1, max_iterations + 1):
        tv, greedy = bellman_apply(instance, v, alpha)
        resid = np.abs(tv - v).max()
        v = tv
        if resid <= tol:
            return SolveResult(
                criterion="discounted", alpha=alpha, value=v,
                policy=Policy(actions=greedy, kind="optimal"),
                iterations=it, residual=float(resid))
    raise SolverError(
        f"value iteration did not reach tol={tol} in {max_iterations} "
        f"iterations (last residual {resid:.3e})", residual=float(resid))


def policy_iteration_average(instance: Instance, tol: float = 1e-9,
                             max_iterations: int = 1000) -> SolveResult:
    """Howard policy iteration for the long-run average criterion.

    Each iteration evaluates the current policy exactly (gain and bias via a
    direct linear solve) and then improves greedily against the bias; actions
    switch only on strict improvement so ties cannot cycle.
    """
    if tol <= 0:
        raise InstanceError("tol", "tolerance must be positive")
    from .policies import myopic_policy

    policy = myopic_policy(instance)
    last_gain = np.inf
    for it in range(1, max_iterations + 1):
        g, h = evaluate_policy_average(instance, policy)
        if g > last_gain + 1e-9:
            raise SolverError(
                f"gain increased across policy-iteration steps "
                f"({last_gain:.12g} -> {g:.12g}); evaluation is inconsistent")
        last_gain = g
        q = action_values(instance, h, 1.0)
        current = q[np.arange(instance.num_states), policy.actions]
        best = q.min(axis=1)
        improve = best < current - IMPROVEMENT_EPS
        if not improve.any():
            th = best
            resid = float(np.abs(g + h - th).max())
            if resid > tol:
                raise SolverError(
                    f"policy iteration converged to residual {resid:.3e} > tol={tol}")
            return SolveResult(
                criterion="average", gain=g, bias=h,
                policy=Policy(actions=policy.actions, kind="optimal"),
                iterations=it, residual=resid)
        acts = policy.actions.copy()
        acts[improve] = q.argmin(axis=1)[improve]
        policy = Policy(actions=acts, kind="optimal")
    raise SolverError(f"policy iteration did not converge in {max_iterations} iterations")


def relative_value_iteration_average(instance: Instance, tol: float = 1e-9,
                                     max_iterations: int = 10 ** 6,
                                     damping: float = 0.5) -> SolveResult:
    """Relative value iteration fallback for state spaces too large for the
    dense evaluation solve.  Uses a damped backup to guard against periodic
    chains; the bias is normalized at the first enumerated state.
    """
    if tol <= 0:
        raise InstanceError("tol", "tolerance must be positive")
    if not 0.0 < damping <= 1.0:
        raise InstanceError("damping", "damping must lie in (0, 1]")
    h = np.zeros(instance.num_states)
    for it in range(1, max_iterations + 1):
        th, greedy = bellman_apply(instance, h, 1.0)
        delta = th - h
        span = float(delta.max() - delta.min())
        mixed = (1.0 - damping) * h + damping * th
        h = mixed - mixed[0]
        if span <= tol:
            g = float(0.5 * (delta.max() + delta.min()))
            resid = float(np.abs(g + h - bellman_apply(instance, h, 1.0)[0]).max())
            return SolveResult(
                criterion="average", gain=g, bias=h,
                policy=Policy(actions=greedy, kind="optimal"),
                iterations=it, residual=resid)
    raise SolverError(
        f"relative value iteration did not reach span tol={tol} in "
        f"{max_iterations} iterations (last span {span:.3e})")


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def solve_result_to_dict(instance: Instance, result: SolveResult) -> dict:
    actions = {instance.decode(x).key(): int(a)
               for x, a in enumerate(result.policy.actions)}
    out = {
        "criterion": result.criterion,
        "policy": result.policy.label,
        "actions": actions,
        "iterations": result.iterations,
        "residual": result.residual,
    }
    if result.criterion == "discounted":
        out["alpha"] = result.alpha
        out["value"] = np.asarray(result.value).tolist()
    else:
        out["gain"] = result.gain
        out["bias"] = np.asarray(result.bias).tolist()
    return out
