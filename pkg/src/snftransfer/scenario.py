"""Random instance generation for the dependency-structure experiments.

Baseline availability matrices are sampled facility by facility, then one of
three constructions couples them to the transfer decision:

* scenario 1 scales only the receiving facility's stay-available probability;
* scenario 2 also scales the receiving facility's neighbors along the
  A-B-C-D-E line;
* scenario 3 additionally scales every other facility.

Only the "available" row of a matrix is ever modified, so all generated
kernels remain row-stochastic for admissible parameters.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import Instance, InstanceError, _LOSS_KERNEL
from .policies import myopic_policy, rpr_policy
from .solve import SolverError, evaluate_policy_average, policy_iteration_average

__all__ = [
    "ScenarioSpec",
    "BaselineSet",
    "SweepRecord",
    "SweepResult",
    "SWEEP_CSV_HEADER",
    "sample_baselines",
    "neighbors",
    "apply_scenario1",
    "apply_scenario2",
    "apply_scenario3",
    "apply_scenario",
    "build_scenario_instance",
    "run_sweep",
    "write_sweep_csv",
    "DEFAULT_LOSS_PENALTY",
]

# documented default for experiments whose loss penalty is not pinned down:
# roughly five times the largest packaged readmission rate (percent scale)
DEFAULT_LOSS_PENALTY = 100.0

SWEEP_CSV_HEADER = ("instance_id,seed,scenario,beta,gamma,delta,K,"
                    "g_opt,g_myopic,g_rpr,gap_myopic_pct,gap_rpr_pct")


@dataclass(frozen=True)
class BaselineSet:
    """Per-facility 2x2 availability matrices, action-independent."""

    matrices: np.ndarray        # (l, 2, 2)

    def __post_init__(self):
        m = np.array(self.matrices, dtype=float)
        if m.ndim != 3 or m.shape[1:] != (2, 2):
            raise InstanceError("baselines", f"expected (l, 2, 2), got {m.shape}")
        if np.any(m < 0) or np.any(m > 1):
            raise InstanceError("baselines", "entries must lie in [0, 1]")
        if np.any(np.abs(m.sum(axis=2) - 1.0) > 1e-12):
            raise InstanceError("baselines", "rows must sum to 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    @property
    def num_facilities(self) -> int:
        return self.matrices.shape[0]

    def stay_available(self, j: int) -> float:
        return float(self.matrices[j - 1, 1, 1])


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one dependency construction."""

    scenario: int
    beta: float
    gamma: Optional[float] = None
    delta: Optional[float] = None
    seed: int = 0
    num_facilities: int = 5

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise InstanceError("scenario", "must be 1, 2, or 3")
        if not 0.0 <= self.beta <= 1.0:
            raise InstanceError("beta", "must lie in [0, 1]")
        if self.scenario >= 2:
            if self.gamma is None or self.gamma < 1.0:
                raise InstanceError("gamma", "must be >= 1 for scenarios 2 and 3")
        if self.scenario == 3:
            if self.delta is None or self.delta < 1.0:
                raise InstanceError("delta", "must be >= 1 for scenario 3")
            if self.delta > self.gamma:
                raise InstanceError("delta", "must not exceed gamma")
        if self.num_facilities < 1:
            raise InstanceError("num_facilities", "need at least one facility")

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "beta": self.beta, "gamma": self.gamma,
                "delta": self.delta, "seed": self.seed,
                "num_facilities": self.num_facilities}

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(scenario=int(data["scenario"]), beta=float(data["beta"]),
                   gamma=None if data.get("gamma") is None else float(data["gamma"]),
                   delta=None if data.get("delta") is None else float(data["delta"]),
                   seed=int(data.get("seed", 0)),
                   num_facilities=int(data.get("num_facilities", 5)))


def sample_baselines(num_facilities: int, seed) -> BaselineSet:
    """Draw one baseline matrix per facility: both diagonal entries uniform
    on (0, 1), off-diagonals completing the rows.  ``seed`` may be anything
    ``numpy.random.default_rng`` accepts."""
    if num_facilities < 1:
        raise InstanceError("num_facilities", "need at least one facility")
    rng = np.random.default_rng(seed)
    mats = np.empty((num_facilities, 2, 2))
    for j in range(num_facilities):
        p00 = rng.uniform()
        p11 = rng.uniform()
        mats[j] = [[p00, 1.0 - p00], [1.0 - p11, p11]]
    return BaselineSet(matrices=mats)


def neighbors(j: int, num_facilities: int) -> set[int]:
    """Facilities adjacent to ``j`` in the fixed facility sequence."""
    if not 1 <= j <= num_facilities:
        raise InstanceError("j", f"facility {j} out of range 1..{num_facilities}")
    return {jj for jj in (j - 1, j + 1) if 1 <= jj <= num_facilities}


def _base_kernels(baselines: BaselineSet) -> np.ndarray:
    """(l+1, l+1, 2, 2) kernels equal to the baselines for every action."""
    l = baselines.num_facilities
    kern = np.empty((l + 1, l + 1, 2, 2))
    kern[:, 0] = _LOSS_KERNEL
    for j in range(1, l + 1):
        kern[:, j] = baselines.matrices[j - 1]
    return kern


def _scale_stay(kern: np.ndarray, action: int, j: int, baselines: BaselineSet,
                multiplier: float) -> None:
    """Replace facility ``j``'s available-row under ``action``: the
    stay-available probability becomes ``multiplier`` times its baseline."""
    p = multiplier * baselines.stay_available(j)
    kern[action, j, 1] = (1.0 - p, p)


def apply_scenario1(baselines: BaselineSet, beta1: float) -> np.ndarray:
    """Transfers degrade only the receiving facility's availability."""
    if not 0.0 <= beta1 <= 1.0:
        raise InstanceError("beta1", "must lie in [0, 1]")
    kern = _base_kernels(baselines)
    for a in range(1, baselines.num_facilities + 1):
        _scale_stay(kern, a, a, baselines, beta1)
    return kern


def apply_scenario2(baselines: BaselineSet, beta2: float, gamma2: float) -> np.ndarray:
    """Transfers degrade the receiving facility (multiplier beta2/gamma2) and
    its neighbors (multiplier beta2, each against its own baseline)."""
    if not 0.0 <= beta2 <= 1.0:
        raise InstanceError("beta2", "must lie in [0, 1]")
    if gamma2 < 1.0:
        raise InstanceError("gamma2", "must be >= 1")
    l = baselines.num_facilities
    kern = _base_kernels(baselines)
    for a in range(1, l + 1):
        _scale_stay(kern, a, a, baselines, beta2 / gamma2)
        for j in neighbors(a, l):
            _scale_stay(kern, a, j, baselines, beta2)
    return kern


def apply_scenario3(baselines: BaselineSet, beta3: float, gamma3: float,
                    delta3: float) -> np.ndarray:
    """Transfers degrade every facility: the receiver by beta3*delta3/gamma3
    and all others (neighbors or not) by beta3."""
    if not 0.0 <= beta3 <= 1.0:
        raise InstanceError("beta3", "must lie in [0, 1]")
    if gamma3 < 1.0:
        raise InstanceError("gamma3", "must be >= 1")
    if not 1.0 <= delta3 <= gamma3:
        raise InstanceError("delta3", "must lie in [1, gamma3]")
    l = baselines.num_facilities
    kern = _base_kernels(baselines)
    for a in range(1, l + 1):
        _scale_stay(kern, a, a, baselines, beta3 * delta3 / gamma3)
        for j in range(1, l + 1):
            if j != a:
                _scale_stay(kern, a, j, baselines, beta3)
    return kern


def apply_scenario(spec: ScenarioSpec, baselines: BaselineSet) -> np.ndarray:
    if spec.scenario == 1:
        return apply_scenario1(baselines, spec.beta)
    if spec.scenario == 2:
        return apply_scenario2(baselines, spec.beta, spec.gamma)
    return apply_scenario3(baselines, spec.beta, spec.gamma, spec.delta)


def build_scenario_instance(spec: ScenarioSpec, baselines: BaselineSet,
                            costs: Sequence[Sequence[float]],
                            lambdas: Sequence[float],
                            loss_penalty: float,
                            facility_labels: Sequence[str] = (),
                            type_labels: Sequence[str] = ()) -> Instance:
    """Assemble a full instance from scenario kernels plus cost inputs.

    ``costs`` has one row per type over the real facilities; ``lambdas``
    holds the per-type discharge probabilities.
    """
    costs = np.asarray(costs, dtype=float)
    k = costs.shape[0]
    l = baselines.num_facilities
    if costs.shape != (k, l):
        raise InstanceError("costs", f"expected shape {(k, l)}, got {costs.shape}")
    lam_in = np.asarray(lambdas, dtype=float)
    if lam_in.shape != (k,):
        raise InstanceError("lambdas", f"expected {k} discharge probabilities")
    full_costs = np.zeros((k + 1, l + 1))
    full_costs[1:, 0] = loss_penalty
    full_costs[1:, 1:] = costs
    return Instance(
        num_types=k,
        num_facilities=l,
        discharge_probs=np.concatenate([[1.0 - lam_in.sum()], lam_in]),
        costs=full_costs,
        loss_penalty=loss_penalty,
        feasible=tuple([frozenset({0})] + [frozenset(range(l + 1))] * k),
        kernels=apply_scenario(spec, baselines),
        facility_labels=tuple(facility_labels),
        type_labels=tuple(type_labels),
    )


# ----------------------------------------------------------------------
# batch sweeps
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    instance_id: int
    seed: str
    spec: ScenarioSpec
    loss_penalty: float
    g_opt: float
    g_myopic: float
    g_rpr: float

    @property
    def gap_myopic_pct(self) -> float:
        return (self.g_myopic - self.g_opt) / self.g_opt * 100.0

    @property
    def gap_rpr_pct(self) -> float:
        return (self.g_rpr - self.g_opt) / self.g_opt * 100.0

    def csv_row(self) -> list:
        s = self.spec
        return [self.instance_id, self.seed, s.scenario, s.beta,
                "" if s.gamma is None else s.gamma,
                "" if s.delta is None else s.delta,
                self.loss_penalty, self.g_opt, self.g_myopic, self.g_rpr,
                self.gap_myopic_pct, self.gap_rpr_pct]


@dataclass(frozen=True)
class SweepResult:
    records: tuple[SweepRecord, ...]
    failures: tuple[tuple[int, str], ...] = ()

    def fraction_rpr_beats_myopic(self, slack: float = 1e-9) -> float:
        if not self.records:
            return float("nan")
        wins = sum(1 for r in self.records if r.g_rpr <= r.g_myopic + slack)
        return wins / len(self.records)

    def max_gap_rpr_pct(self) -> float:
        return max((r.gap_rpr_pct for r in self.records), default=float("nan"))


def _run_one(args) -> tuple[int, Optional[SweepRecord], Optional[str]]:
    spec, instance_id, costs, lambdas, loss_penalty = args
    try:
        baselines = sample_baselines(spec.num_facilities, [spec.seed, instance_id])
        inst = build_scenario_instance(spec, baselines, costs, lambdas, loss_penalty)
        opt = policy_iteration_average(inst)
        g_myo, _ = evaluate_policy_average(inst, myopic_policy(inst))
        g_rpr, _ = evaluate_policy_average(inst, rpr_policy(inst))
        rec = SweepRecord(instance_id=instance_id,
                          seed=f"{spec.seed}:{instance_id}",
                          spec=spec, loss_penalty=loss_penalty,
                          g_opt=opt.gain, g_myopic=g_myo, g_rpr=g_rpr)
        return instance_id, rec, None
    except (SolverError, InstanceError) as exc:
        return instance_id, None, str(exc)


def run_sweep(spec: ScenarioSpec, num_instances: int,
              costs: Sequence[Sequence[float]], lambdas: Sequence[float],
              loss_penalty: float = DEFAULT_LOSS_PENALTY,
              jobs: int = 1) -> SweepResult:
    """Solve ``num_instances`` random instances under one scenario spec.

    Per-instance randomness derives from ``(spec.seed, instance_id)``, so
    results are reproducible and independent of the level of concurrency.
    Solver failures are collected, not raised.
    """
    if num_instances < 0:
        raise InstanceError("num_instances", "must be nonnegative")
    tasks = [(spec, i, costs, lambdas, loss_penalty) for i in range(num_instances)]
    if jobs > 1 and num_instances > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_one, tasks,
                                 chunksize=max(1, num_instances // (jobs * 8))))
    else:
        outs = [_run_one(t) for t in tasks]
    outs.sort(key=lambda t: t[0])
    records = tuple(rec for _, rec, _ in outs if rec is not None)
    failures = tuple((i, err) for i, _, err in outs if err is not None)
    return SweepResult(records=records, failures=failures)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_HEADER.split(","))
        for rec in result.records:
            writer.writerow(rec.csv_row())
