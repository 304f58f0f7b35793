import numpy as np
import pytest

from snftransfer import Instance
from snftransfer.fixtures import example_instance


def make_instance(k, l, lambdas, costs_real, loss_penalty, kernels_real,
                  feasible=None, labels=None):
    """Assemble a full Instance from the reduced pieces tests work with.

    ``kernels_real[a][j]`` covers a in 0..l, j in 1..l; the loss facility's
    column is filled in here.
    """
    lam = np.concatenate([[1.0 - float(np.sum(lambdas))], np.asarray(lambdas, float)])
    costs = np.zeros((k + 1, l + 1))
    costs[1:, 0] = loss_penalty
    costs[1:, 1:] = costs_real
    kern = np.zeros((l + 1, l + 1, 2, 2))
    kern[:, 0] = [[0.0, 1.0], [0.0, 1.0]]
    for a in range(l + 1):
        for j in range(1, l + 1):
            kern[a, j] = kernels_real[a][j - 1]
    if feasible is None:
        feas = tuple([frozenset({0})] + [frozenset(range(l + 1))] * k)
    else:
        feas = tuple([frozenset({0})] + [frozenset({0, *f}) for f in feasible])
    kwargs = {}
    if labels:
        kwargs = labels
    return Instance(num_types=k, num_facilities=l, discharge_probs=lam,
                    costs=costs, loss_penalty=loss_penalty, feasible=feas,
                    kernels=kern, **kwargs)


def random_instance(rng, k=None, l=None, action_independent=False,
                    random_feasible=False):
    """Random well-conditioned instance (all kernel entries interior)."""
    k = int(rng.integers(1, 5)) if k is None else k
    l = int(rng.integers(1, 5)) if l is None else l
    raw = rng.uniform(0.05, 1.0, size=k)
    lambdas = raw * (rng.uniform(0.5, 0.95) / raw.sum())
    costs = rng.uniform(1.0, 20.0, size=(k, l))
    loss_penalty = float(costs.max() * rng.uniform(2.0, 6.0))

    def draw_matrix():
        p0 = rng.uniform(0.02, 0.98)
        p1 = rng.uniform(0.02, 0.98)
        return [[p0, 1 - p0], [1 - p1, p1]]

    if action_independent:
        shared = [draw_matrix() for _ in range(l)]
        kernels = [[ [row[:] for row in shared[j]] for j in range(l)]
                   for _ in range(l + 1)]
    else:
        kernels = [[draw_matrix() for _ in range(l)] for _ in range(l + 1)]

    feasible = None
    if random_feasible:
        feasible = []
        for _ in range(k):
            subset = [j for j in range(1, l + 1) if rng.random() < 0.7]
            feasible.append(subset)
    return make_instance(k, l, lambdas, costs, loss_penalty, kernels,
                         feasible=feasible)


@pytest.fixture
def example1():
    return example_instance(1)


@pytest.fixture
def example2():
    return example_instance(2)
