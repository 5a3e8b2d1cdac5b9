"""Block selection schedules and the block-wise push-sum protocol.

Each iteration every agent picks one block to broadcast.  For a given block
the induced mixing matrix keeps the base column for senders and a unit
self-column for everyone else, so it stays column stochastic no matter which
subset of agents happened to pick that block.  Agents that hear nothing about
a block simply hold their previous value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import Digraph, is_strongly_connected


class ProtocolViolationError(RuntimeError):
    """A push-sum invariant (e.g. positive weights) was broken."""


@dataclass(frozen=True)
class BlockLayout:
    """Partition of an ``num_blocks * block_dim`` vector into equal blocks.

    Block ``l`` (0-based) covers coordinates
    ``l*block_dim .. (l+1)*block_dim - 1``.
    """

    num_blocks: int
    block_dim: int

    def __post_init__(self):
        if self.num_blocks < 1 or self.block_dim < 1:
            raise ValueError(
                f"need num_blocks >= 1 and block_dim >= 1, got "
                f"({self.num_blocks}, {self.block_dim})"
            )

    @property
    def total_dim(self):
        return self.num_blocks * self.block_dim

    def block_slice(self, block):
        d = self.block_dim
        return slice(block * d, (block + 1) * d)

    @classmethod
    def for_dim(cls, total_dim, num_blocks):
        if total_dim % num_blocks != 0:
            raise ValueError(
                f"dimension {total_dim} is not divisible into "
                f"{num_blocks} equal blocks"
            )
        return cls(num_blocks=num_blocks, block_dim=total_dim // num_blocks)


ROUND_ROBIN = "round_robin"
SHIFTED_ROUND_ROBIN = "shifted_round_robin"
RANDOM_PERMUTATION = "random_permutation"

SCHEDULE_RULES = (ROUND_ROBIN, SHIFTED_ROUND_ROBIN, RANDOM_PERMUTATION)


@dataclass(frozen=True)
class BlockSchedule:
    """Essentially cyclic block-selection rule shared by all agents.

    Every rule guarantees that within any window of ``period`` consecutive
    iterations each agent selects every block at least once:

    - ``round_robin``:        agent-independent ``t mod B``; period ``B``.
    - ``shifted_round_robin``: agent ``i`` starts at block ``i mod B``;
      period ``B``.
    - ``random_permutation``: per agent, each aligned cycle of ``B``
      iterations uses a fresh seeded permutation; period ``2B - 1`` (a
      window that long always contains one complete cycle).
    """

    rule: str
    num_blocks: int
    seed: int = 0

    def __post_init__(self):
        if self.rule not in SCHEDULE_RULES:
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if self.num_blocks < 1:
            raise ValueError("need at least one block")

    @property
    def period(self):
        """Window length T_i within which every block is selected."""
        if self.rule == RANDOM_PERMUTATION:
            return 2 * self.num_blocks - 1
        return self.num_blocks


def next_block(schedule, agent, t):
    """Block (0-based) selected by ``agent`` at iteration ``t``."""
    if t < 0:
        raise ValueError(f"iteration must be nonnegative, got {t}")
    B = schedule.num_blocks
    if schedule.rule == ROUND_ROBIN:
        return t % B
    if schedule.rule == SHIFTED_ROUND_ROBIN:
        return (agent + t) % B
    cycle, offset = divmod(t, B)
    rng = np.random.default_rng(
        np.random.SeedSequence([schedule.seed, agent, cycle])
    )
    return int(rng.permutation(B)[offset])


def selections_at(schedule, n, t):
    """Array of the blocks all ``n`` agents select at iteration ``t``."""
    return np.array([next_block(schedule, i, t) for i in range(n)], dtype=np.int64)


def build_block_weights(base, selections, block):
    """Mixing matrix for one block given each agent's selection.

    Column ``j`` equals the base column when agent ``j`` selected ``block``
    and the canonical basis vector ``e_j`` otherwise; the result is always
    column stochastic.
    """
    base_mat = base.matrix
    n = base_mat.shape[0]
    sel = np.asarray(selections)
    if sel.shape != (n,):
        raise ValueError(f"need one selection per agent, got shape {sel.shape}")
    mat = np.eye(n)
    sending = sel == block
    mat[:, sending] = base_mat[:, sending]
    return mat


def consensus_step(phi, u, weights):
    """One push-sum update of weights ``phi`` and values ``u``.

    Returns ``(phi_new, u_new)`` where ``phi_new = A phi`` and
    ``u_new[i]`` is the phi-weighted mix of the neighbors' values.  The
    total weight ``sum(phi)`` is preserved.
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0.0):
        raise ProtocolViolationError("push-sum weights must stay positive")
    u = np.asarray(u, dtype=float)
    phi_new = weights @ phi
    if np.any(phi_new <= 0.0):
        raise ProtocolViolationError("mixing produced a nonpositive weight")
    mass = weights @ (phi[:, None] * u.reshape(len(phi), -1))
    u_new = (mass / phi_new[:, None]).reshape(u.shape)
    return phi_new, u_new


def run_block_consensus(graph, base, schedule, layout, x0, phi0=None,
                        max_iters=10_000, tol=None):
    """Run the pure block-wise push-sum protocol from state ``x0``.

    ``x0`` has shape ``(n, total_dim)``.  Returns ``(x, phi, errors)``
    where ``errors[t]`` is the max over agents and blocks of the sup-norm
    distance to the phi-weighted network average (constant over time).
    Stops early once the error drops below ``tol``.
    """
    n = graph.n
    x = np.array(x0, dtype=float)
    phi = np.ones((n, layout.num_blocks)) if phi0 is None else np.array(phi0, dtype=float)
    if np.any(phi <= 0.0):
        raise ProtocolViolationError("push-sum weights must stay positive")

    target = weighted_average(phi, x, layout)
    errors = [_max_block_error(x, target)]
    for t in range(max_iters):
        sel = selections_at(schedule, n, t)
        for block in range(layout.num_blocks):
            w = build_block_weights(base, sel, block)
            s = layout.block_slice(block)
            phi[:, block], x[:, s] = consensus_step(phi[:, block], x[:, s], w)
        errors.append(_max_block_error(x, target))
        if tol is not None and errors[-1] < tol:
            break
    return x, phi, np.array(errors)


def weighted_average(phi, x, layout):
    """Phi-weighted average of the agents' vectors, block by block.

    With total weight ``n`` per block (the push-sum invariant) this is the
    quantity the protocol drives every agent toward.
    """
    n = x.shape[0]
    out = np.empty(layout.total_dim)
    for block in range(layout.num_blocks):
        s = layout.block_slice(block)
        out[s] = phi[:, block] @ x[:, s] / n
    return out


def _max_block_error(x, target):
    return float(np.max(np.abs(x - target[None, :])))


def check_T_connectivity(schedule, graph, block, window):
    """Whether unions of ``window`` consecutive induced graphs connect.

    The induced graph of ``block`` at time ``t`` keeps exactly the edges
    whose sender selected that block.  Checks every window start within one
    full schedule period (plus one period of lookahead), which covers all
    starts for the periodic rules implemented here.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    n = graph.n
    period = schedule.period if schedule.rule != RANDOM_PERMUTATION \
        else schedule.num_blocks
    # random_permutation repeats only statistically; test two periods of starts
    starts = period if schedule.rule != RANDOM_PERMUTATION else 2 * period
    for t0 in range(starts):
        edges = set()
        for s in range(window):
            sel = selections_at(schedule, n, t0 + s)
            for j, i in graph.edges:
                if sel[j] == block:
                    edges.add((j, i))
        if not is_strongly_connected(Digraph(n=n, edges=frozenset(edges))):
            return False
    return True


@dataclass(frozen=True, eq=False)
class DecayEstimate:
    """Fitted geometric bound ``spread(T) <= c * rho**T`` on window products."""

    c: float
    rho: float
    spreads: np.ndarray


def measure_geometric_decay(schedule, base, block, horizon, floor=1e-13):
    """Fit the geometric decay of block mixing-matrix products.

    Forms the products ``A_block^{T-1} ... A_block^0`` for growing ``T``,
    measures the max column deviation from the mean column, and fits
    ``log spread = log c + T log rho`` by least squares over the spreads
    above ``floor``.  A fitted ``rho >= 1`` means the expected decay
    property failed and raises.
    """
    n = base.matrix.shape[0]
    prod = np.eye(n)
    spreads = []
    for t in range(horizon):
        sel = selections_at(schedule, n, t)
        prod = build_block_weights(base, sel, block) @ prod
        mean_col = prod.mean(axis=1)
        spreads.append(float(np.max(np.abs(prod - mean_col[:, None]))))
    spreads = np.array(spreads)

    if n == 1 or spreads.max() <= floor:
        return DecayEstimate(c=0.0, rho=0.0, spreads=spreads)

    usable = spreads > floor
    horizons = np.arange(1, horizon + 1)[usable]
    logs = np.log(spreads[usable])
    if len(logs) < 2:
        return DecayEstimate(c=float(np.exp(logs[0])), rho=0.0, spreads=spreads)
    slope, intercept = np.polyfit(horizons, logs, 1)
    rho = float(np.exp(slope))
    if rho >= 1.0:
        raise ProtocolViolationError(
            f"no geometric decay: fitted rho={rho:.6f} >= 1 over "
            f"horizon {horizon}"
        )
    return DecayEstimate(c=float(math.exp(intercept)), rho=rho, spreads=spreads)
