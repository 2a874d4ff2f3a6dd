import numpy as np
import pytest

from satlearn.treeopt import RoutingTree, tree_from_edges


def decode_pruefer(sequence: list[int], n: int) -> list[tuple[int, int]]:
    """Standard Pruefer decoding; uniform over labeled trees."""
    degree = [1] * n
    for v in sequence:
        degree[v] += 1
    edges = []
    candidates = sorted(v for v in range(n) if degree[v] == 1)
    seq = list(sequence)
    for v in seq:
        leaf = candidates.pop(0)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            # keep candidate list sorted for determinism
            import bisect

            bisect.insort(candidates, v)
    edges.append((candidates[0], candidates[1]))
    return edges


def random_tree(n: int, rng: np.random.Generator) -> RoutingTree:
    if n == 1:
        return tree_from_edges(1, [])
    if n == 2:
        return tree_from_edges(2, [(0, 1)])
    seq = rng.integers(0, n, size=n - 2).tolist()
    return tree_from_edges(n, decode_pruefer(seq, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
