"""Inter-plane aggregation engines and the mixing-matrix analyzer.

RelaySum: every node relays undecayed sums of its neighbors' buffered
updates along the fixed tree, together with counters saying how many
per-node updates each sum contains. After the warmup phase each node holds
the exact uniform average of one (delayed) update per node; during warmup
the not-yet-arrived contributions are substituted by the shared initial
model, which makes the identity

    x_i^{t+1} = (1/N) sum_j x_j^{(t - tau_ij) + 1/2}

hold at every round (entries with negative time index read as the initial
model). Gossip and tree all-reduce are the reference baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .treeopt import RoutingTree


@dataclass
class RelayNodeState:
    """Per-plane model plus per-neighbor relay buffers and counters."""

    node: int
    model: np.ndarray
    recv_updates: dict[int, np.ndarray]
    recv_counters: dict[int, int]
    n_received: int
    initial_model: np.ndarray


def init_relay_states(tree: RoutingTree, initial_model: np.ndarray) -> list[RelayNodeState]:
    x0 = np.asarray(initial_model, dtype=np.float64)
    adj = tree.neighbors()
    return [
        RelayNodeState(
            node=i,
            model=x0.copy(),
            recv_updates={j: np.zeros_like(x0) for j in adj[i]},
            recv_counters={j: 0 for j in adj[i]},
            n_received=0,
            initial_model=x0,
        )
        for i in range(tree.n_vertices)
    ]


def messages_per_round(tree: RoutingTree) -> int:
    """One message per tree edge per direction."""
    return 2 * len(tree.edges)


def relaysum_round(
    states: list[RelayNodeState],
    intra_updates: list[np.ndarray],
    tree: RoutingTree,
) -> list[RelayNodeState]:
    """One synchronous RelaySum exchange; returns the post-round states."""
    n = tree.n_vertices
    if len(states) != n or len(intra_updates) != n:
        raise ValueError("states/updates length does not match the tree")
    adj = tree.neighbors()
    for st in states:
        if sorted(st.recv_updates) != adj[st.node]:
            raise ValueError(f"node {st.node} buffers do not match its tree neighbors")

    updates = [np.asarray(u, dtype=np.float64) for u in intra_updates]
    out_updates: dict[tuple[int, int], np.ndarray] = {}
    out_counters: dict[tuple[int, int], int] = {}
    for i in range(n):
        st = states[i]
        for j in adj[i]:
            b = updates[i].copy()
            c = 1
            for l in adj[i]:
                if l == j:
                    continue
                b += st.recv_updates[l]
                c += st.recv_counters[l]
            out_updates[(i, j)] = b
            out_counters[(i, j)] = c

    new_states = []
    for i in range(n):
        recv_u = {j: out_updates[(j, i)] for j in adj[i]}
        recv_c = {j: out_counters[(j, i)] for j in adj[i]}
        n_i = 1 + sum(recv_c.values())
        total = updates[i].copy()
        for j in adj[i]:
            total += recv_u[j]
        # updates not yet relayed this far are substituted by the shared start
        model = (total + (n - n_i) * states[i].initial_model) / n
        new_states.append(
            RelayNodeState(
                node=i,
                model=model,
                recv_updates=recv_u,
                recv_counters=recv_c,
                n_received=n_i,
                initial_model=states[i].initial_model,
            )
        )
    return new_states


def delayed_average_oracle(
    update_history: list[list[np.ndarray]],
    tau: np.ndarray,
    initial_model: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Expected per-node models after round t = len(update_history) - 1.

    update_history[s][j] is node j's intra-plane update of round s. Entries
    older than the history are substituted by `initial_model`; without it
    the oracle refuses.
    """
    if not update_history:
        raise ValueError("empty update history")
    t = len(update_history) - 1
    n = tau.shape[0]
    models = []
    for i in range(n):
        acc = None
        for j in range(n):
            s = t - int(tau[i, j])
            if s >= 0:
                term = np.asarray(update_history[s][j], dtype=np.float64)
            elif initial_model is not None:
                term = np.asarray(initial_model, dtype=np.float64)
            else:
                raise ValueError("insufficient history and no initial model to substitute")
            acc = term.copy() if acc is None else acc + term
        models.append(acc / n)
    return models


def metropolis_weights(tree: RoutingTree) -> np.ndarray:
    """Doubly stochastic Metropolis-Hastings gossip matrix on the tree."""
    n = tree.n_vertices
    adj = tree.neighbors()
    deg = [len(a) for a in adj]
    g = np.zeros((n, n))
    for i in range(n):
        for j in adj[i]:
            g[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
        g[i, i] = 1.0 - g[i].sum()
    return g


def gossip_round(states: np.ndarray, gossip_matrix: np.ndarray) -> np.ndarray:
    """X <- GX for a doubly stochastic G."""
    g = np.asarray(gossip_matrix, dtype=np.float64)
    x = np.asarray(states, dtype=np.float64)
    if g.shape[0] != g.shape[1] or g.shape[0] != x.shape[0]:
        raise ValueError("gossip matrix shape does not match the states")
    if g.min() < 0 or np.abs(g.sum(axis=1) - 1.0).max() > 1e-12 or np.abs(
        g.sum(axis=0) - 1.0
    ).max() > 1e-12:
        raise ValueError("gossip matrix must be doubly stochastic")
    return g @ x


def allreduce_tree(states: np.ndarray, tree: RoutingTree) -> tuple[np.ndarray, int]:
    """Exact mean on every node; costs an up-sweep plus a down-sweep.

    Each sweep takes hop-diameter message phases, so rounds_used =
    2 * hop_diameter (0 for a single node).
    """
    x = np.asarray(states, dtype=np.float64)
    if x.shape[0] != tree.n_vertices:
        raise ValueError("states length does not match the tree")
    mean = x.mean(axis=0)
    out = np.tile(mean, (tree.n_vertices,) + (1,) * (x.ndim - 1))
    return out, 2 * tree.hop_diameter


@dataclass(frozen=True, eq=False)
class MixingMatrices:
    """Stacked-history mixers of the RelaySum dynamics Y^{t+1} = W Y^t - eta W~ G^t."""

    W: np.ndarray
    W_grad: np.ndarray
    pi: np.ndarray
    q: float
    rho: float
    contraction_power: int


def build_mixing_matrices(tree: RoutingTree, contraction_cap: int = 512) -> MixingMatrices:
    """Assemble W / W~ from tau and analyze their spectrum.

    W block (0, tau_ij) carries 1/N averaging entries; blocks (tau, tau-1)
    carry identity shifts. pi is the left eigenvector of W for eigenvalue 1
    normalized to sum 1; q = (1 - |lambda_2|)/2; rho = q/m with m the
    smallest power at which the (1-q)^m contraction onto the pi-projection
    holds in spectral norm.
    """
    n = tree.n_vertices
    tau = tree.hop_delay
    blocks = tree.tau_max + 1
    size = n * blocks
    w = np.zeros((size, size))
    w_grad = np.zeros((size, size))
    for i in range(n):
        for j in range(n):
            w[i, int(tau[i, j]) * n + j] = 1.0 / n
            w_grad[i, int(tau[i, j]) * n + j] = 1.0 / n
    for blk in range(1, blocks):
        for i in range(n):
            w[blk * n + i, (blk - 1) * n + i] = 1.0

    if size == 1:
        return MixingMatrices(
            W=w, W_grad=w_grad, pi=np.ones(1), q=0.5, rho=0.5, contraction_power=1
        )

    try:
        vals, vecs = np.linalg.eig(w.T)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-solve failed on the mixing matrix: {exc}") from exc
    order = np.argsort(np.abs(vals - 1.0))
    pi = np.real(vecs[:, order[0]])
    pi = pi / pi.sum()
    residual = np.abs(pi @ w - pi).max()
    if residual > 1e-8:
        raise NumericalError(f"left eigenvector residual too large: {residual:.3e}")

    mods = np.sort(np.abs(vals))[::-1]
    lambda2 = mods[1]
    q = (1.0 - float(lambda2)) / 2.0

    projector = np.outer(np.ones(size), pi)
    power = np.eye(size)
    m = None
    for k in range(1, contraction_cap + 1):
        power = power @ w
        if np.linalg.norm(power - projector, 2) <= (1.0 - q) ** k:
            m = k
            break
    if m is None:
        raise NumericalError("no contraction power found below the cap")
    return MixingMatrices(W=w, W_grad=w_grad, pi=pi, q=q, rho=q / m, contraction_power=m)
