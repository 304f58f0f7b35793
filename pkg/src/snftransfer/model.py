"""Core transfer-MDP model: instance data, state space, transition kernel,
and the one-step dynamic-programming backup.

State layout
------------
A system state is ``(patient, availability)`` where ``patient`` is 0 (no
discharge this period) or a type index ``1..k``, and ``availability`` is one
bit per facility.  Facility 0 is the always-available "loss" sink used when
no real facility can take the patient; its bit is pinned to 1 and is not part
of the encoded index.  States are enumerated patient-major with the real
facilities' bits counting in binary (facility 1 is the most significant bit),
so the dense index of ``(i, s)`` is ``i * 2**l + bits(s)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

__all__ = [
    "Instance",
    "InstanceError",
    "SystemState",
    "NextStateDistribution",
    "enumerate_states",
    "feasible_actions",
    "kernel",
    "bellman_apply",
    "action_values",
    "load_instance",
    "load_instance_file",
    "instance_to_dict",
    "instance_digest",
]

LOSS = 0  # index of the loss facility / loss action

# row pattern of the loss facility's availability kernel: always available
_LOSS_KERNEL = ((0.0, 1.0), (0.0, 1.0))


class InstanceError(ValueError):
    """Raised when instance data violates a model invariant."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class SystemState:
    """One system state: discharged patient type and per-facility availability.

    ``avail`` has length ``l + 1`` and includes the loss facility's bit at
    position 0, which is always 1.
    """

    patient: int
    avail: tuple[int, ...]

    def __post_init__(self):
        if self.avail[0] != 1:
            raise InstanceError("avail", "loss facility bit must be 1")

    @property
    def real_avail(self) -> tuple[int, ...]:
        return self.avail[1:]

    def avail_index(self) -> int:
        """Availability bits of the real facilities as an integer (s1 = MSB)."""
        idx = 0
        for b in self.avail[1:]:
            idx = (idx << 1) | b
        return idx

    def key(self) -> str:
        """Stable string key ``(i,s1,...,sl)`` used in serialized tables."""
        return "(" + ",".join(str(v) for v in (self.patient, *self.avail[1:])) + ")"


@dataclass(frozen=True)
class NextStateDistribution:
    """Support of the one-step transition from a (state, action) pair."""

    items: tuple[tuple[SystemState, float], ...]

    def total(self) -> float:
        return sum(p for _, p in self.items)

    def as_dict(self) -> dict[str, float]:
        return {s.key(): p for s, p in self.items}


def _as_matrix22(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (2, 2):
        raise InstanceError(name, f"expected a 2x2 matrix, got shape {arr.shape}")
    if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
        raise InstanceError(name, "entries must lie in [0, 1]")
    rs = arr.sum(axis=1)
    if np.any(np.abs(rs - 1.0) > 1e-12):
        raise InstanceError(name, f"rows must sum to 1 (got {rs.tolist()})")
    return arr


@dataclass(frozen=True)
class Instance:
    """Immutable transfer-MDP instance.

    Parameters
    ----------
    num_types : k, patient types 1..k (0 means "no discharge").
    num_facilities : l, real facilities 1..l (0 is the loss sink).
    discharge_probs : length k+1; entry 0 is the no-discharge probability.
    costs : (k+1, l+1) matrix; ``costs[i][0]`` is the loss penalty for
        i >= 1 and ``costs[0][0]`` is 0.  Entries ``costs[0][j]``, j >= 1,
        are never read.
    loss_penalty : K, must dominate every real readmission rate.
    feasible : per-type frozensets of admissible facilities; 0 is always
        included.
    kernels : (l+1, l+1, 2, 2) array; ``kernels[a][j]`` is facility j's
        availability transition matrix under action a, rows indexed by the
        current bit (0 = unavailable), columns by the next bit.
    """

    num_types: int
    num_facilities: int
    discharge_probs: np.ndarray
    costs: np.ndarray
    loss_penalty: float
    feasible: tuple[frozenset[int], ...]
    kernels: np.ndarray
    facility_labels: tuple[str, ...] = ()
    type_labels: tuple[str, ...] = ()

    def __post_init__(self):
        k, l = self.num_types, self.num_facilities
        if k < 1:
            raise InstanceError("num_types", "need at least one patient type")
        if l < 1:
            raise InstanceError("num_facilities", "need at least one facility")

        # private copies: these are frozen below, and freezing a caller's
        # array in place would be a surprising side effect
        lam = np.array(self.discharge_probs, dtype=float)
        if lam.shape != (k + 1,):
            raise InstanceError("discharge_probs", f"expected length {k + 1}")
        if np.any(lam[1:] <= 0) or np.any(lam[1:] >= 1):
            raise InstanceError("discharge_probs", "type probabilities must lie in (0, 1)")
        if abs(lam.sum() - 1.0) > 1e-12 or lam[0] < -1e-12:
            raise InstanceError("discharge_probs", "must sum to 1 with a nonnegative no-discharge mass")

        costs = np.array(self.costs, dtype=float)
        if costs.shape != (k + 1, l + 1):
            raise InstanceError("costs", f"expected shape {(k + 1, l + 1)}, got {costs.shape}")
        if costs[0, 0] != 0.0:
            raise InstanceError("costs", "no-discharge cost must be 0")
        real = costs[1:, 1:]
        if np.any(~np.isfinite(real)) or np.any(real < 0):
            raise InstanceError("costs", "real-facility rates must be finite and nonnegative")
        if self.loss_penalty <= real.max():
            raise InstanceError(
                "loss_penalty",
                f"K={self.loss_penalty} must exceed the largest rate {real.max()}")
        if np.any(costs[1:, 0] != self.loss_penalty):
            raise InstanceError("costs", "column 0 must equal the loss penalty for every type")

        if len(self.feasible) != k + 1:
            raise InstanceError("feasible", f"expected {k + 1} action sets")
        for i, acts in enumerate(self.feasible):
            if LOSS not in acts:
                raise InstanceError("feasible", f"type {i}: loss action 0 must be feasible")
            if any(a < 0 or a > l for a in acts):
                raise InstanceError("feasible", f"type {i}: facility index out of range")
        if self.feasible[0] != frozenset({LOSS}):
            raise InstanceError("feasible", "type 0 admits only the loss action")

        kern = np.array(self.kernels, dtype=float)
        if kern.shape != (l + 1, l + 1, 2, 2):
            raise InstanceError("kernels", f"expected shape {(l + 1, l + 1, 2, 2)}")
        for a in range(l + 1):
            if not np.array_equal(kern[a, 0], np.asarray(_LOSS_KERNEL)):
                raise InstanceError(f"kernels[{a}][0]", "loss facility must always become available")
            for j in range(1, l + 1):
                _as_matrix22(kern[a, j], f"kernels[{a}][{j}]")

        if self.facility_labels and len(self.facility_labels) != l:
            raise InstanceError("labels", f"expected {l} facility labels")
        if self.type_labels and len(self.type_labels) != k:
            raise InstanceError("labels", f"expected {k} type labels")

        # freeze array payloads so instances are safe to share across workers
        for arr in (lam, costs, kern):
            arr.setflags(write=False)
        object.__setattr__(self, "discharge_probs", lam)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "kernels", kern)

    # ------------------------------------------------------------------
    # derived structure (cached; instances are immutable)
    # ------------------------------------------------------------------

    @property
    def num_states(self) -> int:
        return (self.num_types + 1) << self.num_facilities

    @property
    def num_avail_patterns(self) -> int:
        return 1 << self.num_facilities

    def facility_label(self, j: int) -> str:
        if j == LOSS:
            return "loss"
        if self.facility_labels:
            return self.facility_labels[j - 1]
        return str(j)

    def type_label(self, i: int) -> str:
        if i == 0:
            return "none"
        if self.type_labels:
            return self.type_labels[i - 1]
        return str(i)

    def type_index(self, label) -> int:
        """Resolve a type given as an index, numeric string, or label."""
        if isinstance(label, int):
            idx = label
        elif isinstance(label, str) and label in self.type_labels:
            idx = self.type_labels.index(label) + 1
        else:
            try:
                idx = int(label)
            except (TypeError, ValueError):
                raise InstanceError("patient_type", f"unknown type {label!r}") from None
        if not 1 <= idx <= self.num_types:
            raise InstanceError("patient_type", f"type {label!r} out of range 1..{self.num_types}")
        return idx

    @cached_property
    def action_costs(self) -> np.ndarray:
        """(k+1, l+1) immediate cost of each action by patient type;
        +inf marks actions outside the type's admissible set."""
        k, l = self.num_types, self.num_facilities
        r = np.full((k + 1, l + 1), np.inf)
        r[0, LOSS] = 0.0
        for i in range(1, k + 1):
            r[i, LOSS] = self.loss_penalty
            for j in range(1, l + 1):
                if j in self.feasible[i]:
                    r[i, j] = self.costs[i, j]
        r.setflags(write=False)
        return r

    @cached_property
    def feasible_mask(self) -> np.ndarray:
        """(k+1, 2**l, l+1) boolean: action feasibility by (type, availability)."""
        k, l = self.num_types, self.num_facilities
        nA = self.num_avail_patterns
        mask = np.zeros((k + 1, nA, l + 1), dtype=bool)
        mask[:, :, LOSS] = True
        s = np.arange(nA)
        for j in range(1, l + 1):
            bit = (s >> (l - j)) & 1
            for i in range(1, k + 1):
                if j in self.feasible[i]:
                    mask[i, :, j] = bit.astype(bool)
        mask.setflags(write=False)
        return mask

    @cached_property
    def feasible_lists(self) -> tuple[tuple[int, ...], ...]:
        """Per enumerated state, the sorted tuple of feasible actions."""
        mask = self.feasible_mask
        k, nA = self.num_types, self.num_avail_patterns
        out = []
        for i in range(k + 1):
            for s in range(nA):
                out.append(tuple(np.flatnonzero(mask[i, s])))
        return tuple(out)

    @cached_property
    def avail_kernels(self) -> np.ndarray:
        """(l+1, 2**l, 2**l) joint availability transition matrix per action
        (product over real facilities; facility 1 is the MSB)."""
        l = self.num_facilities
        if l > 12:
            raise InstanceError(
                "num_facilities",
                "dense availability kernels are limited to l <= 12; use the "
                "matrix-free operations for larger systems")
        nA = self.num_avail_patterns
        W = np.empty((l + 1, nA, nA))
        for a in range(l + 1):
            M = np.ones((1, 1))
            for j in range(1, l + 1):
                M = np.kron(M, self.kernels[a, j])
            W[a] = M
        W.setflags(write=False)
        return W

    def availability_expectation(self, action: int, u: np.ndarray) -> np.ndarray:
        """E[u(next availability) | current availability, action] for all
        current patterns.  Matrix-free tensor contraction, O(l 2**l)."""
        l = self.num_facilities
        v = np.asarray(u, dtype=float).reshape((2,) * l)
        for j in range(1, l + 1):
            v = np.moveaxis(np.tensordot(self.kernels[action, j], v, axes=(1, j - 1)), 0, j - 1)
        return v.reshape(-1)

    def encode(self, state: SystemState) -> int:
        return state.patient * self.num_avail_patterns + state.avail_index()

    def decode(self, index: int) -> SystemState:
        nA = self.num_avail_patterns
        l = self.num_facilities
        i, s = divmod(int(index), nA)
        bits = tuple((s >> (l - j)) & 1 for j in range(1, l + 1))
        return SystemState(patient=i, avail=(1, *bits))


# ----------------------------------------------------------------------
# module-level operations
# ----------------------------------------------------------------------

def enumerate_states(instance: Instance) -> list[SystemState]:
    """All reachable states in dense-index order (patient-major, then the
    availability bits counting up in binary)."""
    return [instance.decode(x) for x in range(instance.num_states)]


def feasible_actions(instance: Instance, state: SystemState) -> set[int]:
    """Transfer options at ``state``: the admissible facilities that are
    currently available, plus the loss action 0."""
    if state.patient == 0:
        return {LOSS}
    acts = {LOSS}
    for j in instance.feasible[state.patient]:
        if j != LOSS and state.avail[j] == 1:
            acts.add(j)
    return acts


def kernel(instance: Instance, state: SystemState, action: int) -> NextStateDistribution:
    """One-step distribution over next states for a feasible action.

    The next patient is drawn from the discharge distribution and each real
    facility's availability moves independently through its own 2x2 matrix
    for the chosen action.
    """
    if action not in feasible_actions(instance, state):
        raise InstanceError(
            "action",
            f"action {action} is not feasible in state {state.key()}")
    l = instance.num_facilities
    lam = instance.discharge_probs
    # per-facility next-bit probabilities given the current bits
    rows = [instance.kernels[action, j, state.avail[j]] for j in range(1, l + 1)]
    items = []
    for s_next in range(instance.num_avail_patterns):
        p_avail = 1.0
        for j in range(1, l + 1):
            p_avail *= rows[j - 1][(s_next >> (l - j)) & 1]
        if p_avail == 0.0:
            continue
        bits = tuple((s_next >> (l - j)) & 1 for j in range(1, l + 1))
        for i_next in range(instance.num_types + 1):
            p = lam[i_next] * p_avail
            if p > 0.0:
                items.append((SystemState(patient=i_next, avail=(1, *bits)), p))
    return NextStateDistribution(items=tuple(items))


def action_values(instance: Instance, v: np.ndarray, alpha: float) -> np.ndarray:
    """Q-matrix of the one-step backup: shape (num_states, l+1) with +inf at
    infeasible actions.  ``alpha`` may be 1 for average-cost use."""
    k, l = instance.num_types, instance.num_facilities
    nA = instance.num_avail_patterns
    v = np.asarray(v, dtype=float)
    if v.shape != (instance.num_states,):
        raise InstanceError("v", f"expected value vector of length {instance.num_states}")
    V = v.reshape(k + 1, nA)
    u = instance.discharge_probs @ V          # marginal over the next patient
    if l <= 9:                                # dense kernels get large fast
        fut = instance.avail_kernels @ u      # (l+1, nA)
    else:
        fut = np.stack([instance.availability_expectation(a, u) for a in range(l + 1)])
    q = instance.action_costs[:, None, :] + alpha * fut.T[None, :, :]
    q = np.where(instance.feasible_mask, q, np.inf)
    return q.reshape(instance.num_states, l + 1)


def bellman_apply(instance: Instance, v: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous backup: minimize the Q-matrix over feasible actions.

    Returns the updated value vector and the greedy action per state (ties
    go to the lowest action index).
    """
    if not 0.0 <= alpha <= 1.0:
        raise InstanceError("alpha", "discount must lie in [0, 1]")
    q = action_values(instance, v, alpha)
    return q.min(axis=1), q.argmin(axis=1)


# ----------------------------------------------------------------------
# JSON instance format
# ----------------------------------------------------------------------

def load_instance(data: Mapping) -> Instance:
    """Build an :class:`Instance` from the JSON dictionary format.

    Implicit pieces (not present in the file): the no-discharge probability,
    the loss column of the cost matrix, and the loss facility's kernels.
    """
    try:
        k = int(data["num_types"])
        l = int(data["num_facilities"])
    except KeyError as exc:
        raise InstanceError(str(exc.args[0]), "missing required field") from None

    lam_in = data.get("lambda")
    if lam_in is None or len(lam_in) != k:
        raise InstanceError("lambda", f"expected {k} per-type discharge probabilities")
    lam = np.concatenate([[1.0 - float(np.sum(lam_in))], np.asarray(lam_in, dtype=float)])

    if "loss_penalty" not in data:
        raise InstanceError("loss_penalty", "missing required field")
    K = float(data["loss_penalty"])

    cost_rows = data.get("costs")
    if cost_rows is None or len(cost_rows) != k:
        raise InstanceError("costs", f"expected {k} rows of {l} rates")
    costs = np.zeros((k + 1, l + 1))
    for i, row in enumerate(cost_rows, start=1):
        if len(row) != l:
            raise InstanceError(f"costs[{i - 1}]", f"expected {l} entries, got {len(row)}")
        costs[i, 0] = K
        costs[i, 1:] = row

    feas_in = data.get("feasible")
    if feas_in is None:
        feasible = [frozenset({LOSS})] + [frozenset(range(l + 1)) for _ in range(k)]
    else:
        if len(feas_in) != k:
            raise InstanceError("feasible", f"expected {k} per-type sets")
        feasible = [frozenset({LOSS})] + [frozenset({LOSS, *map(int, f)}) for f in feas_in]

    kern_in = data.get("kernels")
    if kern_in is None:
        raise InstanceError("kernels", "missing required field")
    kern = np.zeros((l + 1, l + 1, 2, 2))
    kern[:, 0] = _LOSS_KERNEL
    seen = set()
    for key, M in kern_in.items():
        try:
            a_s, j_s = key.split(",")
            a, j = int(a_s), int(j_s)
        except ValueError:
            raise InstanceError(f"kernels[{key!r}]", "keys must look like 'a,j'") from None
        if j == 0:
            raise InstanceError(f"kernels[{key!r}]", "loss facility kernels are implicit; omit j=0")
        if not (0 <= a <= l and 1 <= j <= l):
            raise InstanceError(f"kernels[{key!r}]", f"indices out of range for l={l}")
        kern[a, j] = _as_matrix22(M, f"kernels[{key!r}]")
        seen.add((a, j))
    missing = [(a, j) for a in range(l + 1) for j in range(1, l + 1) if (a, j) not in seen]
    if missing:
        raise InstanceError("kernels", f"missing entries for (action, facility) pairs {missing[:5]}")

    labels = data.get("labels", {})
    return Instance(
        num_types=k,
        num_facilities=l,
        discharge_probs=lam,
        costs=costs,
        loss_penalty=K,
        feasible=tuple(feasible),
        kernels=kern,
        facility_labels=tuple(labels.get("facilities", ())),
        type_labels=tuple(labels.get("types", ())),
    )


def load_instance_file(path) -> Instance:
    with open(path) as fh:
        return load_instance(json.load(fh))


def instance_to_dict(instance: Instance) -> dict:
    """Inverse of :func:`load_instance` (canonical form)."""
    l = instance.num_facilities
    out = {
        "num_types": instance.num_types,
        "num_facilities": l,
        "lambda": instance.discharge_probs[1:].tolist(),
        "loss_penalty": instance.loss_penalty,
        "costs": instance.costs[1:, 1:].tolist(),
        "feasible": [sorted(a for a in instance.feasible[i] if a != LOSS)
                     for i in range(1, instance.num_types + 1)],
        "kernels": {f"{a},{j}": instance.kernels[a, j].tolist()
                    for a in range(l + 1) for j in range(1, l + 1)},
    }
    if instance.facility_labels or instance.type_labels:
        out["labels"] = {}
        if instance.facility_labels:
            out["labels"]["facilities"] = list(instance.facility_labels)
        if instance.type_labels:
            out["labels"]["types"] = list(instance.type_labels)
    return out


def instance_digest(instance: Instance) -> str:
    """Short content hash identifying an instance (stable across processes)."""
    import hashlib

    blob = json.dumps(instance_to_dict(instance), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
