"""Monte Carlo evaluation of stationary policies.

This path is deliberately independent of the exact solvers: the joint
availability distribution is rebuilt here from the per-facility matrices, so
a bug in the dense-kernel machinery cannot silently agree with itself.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .model import Instance, InstanceError
from .solve import Policy

__all__ = ["SimulationEstimate", "simulate_policy"]

RNG_ALGORITHM = "PCG64"  # numpy default_rng bit generator, recorded for reproducibility
NUM_BATCHES = 20


@dataclass(frozen=True)
class SimulationEstimate:
    mean_cost: float
    stderr: float
    horizon: int
    burn_in: int
    seed: int
    rng_algorithm: str = RNG_ALGORITHM

    def to_dict(self) -> dict:
        return {"mean_cost": self.mean_cost, "stderr": self.stderr,
                "horizon": self.horizon, "burn_in": self.burn_in,
                "seed": self.seed, "rng_algorithm": self.rng_algorithm}


def _avail_row_cdfs(instance: Instance) -> list[list[list[float]]]:
    """cdfs[a][s] = cumulative distribution over next availability patterns,
    built as an explicit product over the per-facility rows."""
    l = instance.num_facilities
    nA = instance.num_avail_patterns
    out = []
    for a in range(l + 1):
        per_action = []
        for s in range(nA):
            probs = [1.0]
            for j in range(1, l + 1):
                bit = (s >> (l - j)) & 1
                row = instance.kernels[a, j, bit]
                probs = [p * row[b] for p in probs for b in (0, 1)]
            cum = []
            acc = 0.0
            for p in probs:
                acc += p
                cum.append(acc)
            per_action.append(cum)
        out.append(per_action)
    return out


def simulate_policy(instance: Instance, policy: Policy, horizon: int = 10 ** 6,
                    burn_in: int = 10 ** 4, seed: int = 0,
                    start=None) -> SimulationEstimate:
    """Run the controlled chain and estimate the long-run cost per period.

    Each period draws the discharged type, applies the policy, accrues the
    immediate rate, and moves every facility's availability through its own
    matrix for the chosen action.  The standard error comes from batch means
    over the post-burn-in path (20 batches).
    """
    if not horizon > burn_in >= 0:
        raise InstanceError("horizon", "need horizon > burn_in >= 0")
    policy.validate(instance)
    nA = instance.num_avail_patterns
    rng = np.random.default_rng(seed)

    patients = rng.choice(instance.num_types + 1, size=horizon,
                          p=instance.discharge_probs)
    uniforms = rng.random(horizon).tolist()

    cdfs = _avail_row_cdfs(instance)
    actions_flat = policy.actions.reshape(instance.num_types + 1, nA).tolist()
    cost_flat = instance.action_costs.tolist()

    if start is None:
        s = nA - 1                       # everything available
    else:
        s = start.avail_index()
    costs = np.empty(horizon)
    patients_list = patients.tolist()
    for t in range(horizon):
        i = patients_list[t]
        a = actions_flat[i][s]
        costs[t] = cost_flat[i][a]
        s = bisect_right(cdfs[a][s], uniforms[t])
        if s >= nA:                      # guard against cdf rounding at 1.0
            s = nA - 1

    tail = costs[burn_in:]
    batches = np.array_split(tail, NUM_BATCHES)
    means = np.array([b.mean() for b in batches])
    stderr = float(means.std(ddof=1) / np.sqrt(len(means))) if len(means) > 1 else 0.0
    return SimulationEstimate(mean_cost=float(tail.mean()), stderr=stderr,
                              horizon=horizon, burn_in=burn_in, seed=seed)
