"""The block-iterative distributed optimization loop.

Every iteration has two phases with a barrier between them.  In the
optimization phase each agent solves a strongly convex subproblem on the one
block it selected and takes a damped step toward the solution.  In the
communication phase each agent broadcasts that block's value, weight and
tracking entry to its out-neighbors, and every block of every local state is
refreshed by push-sum mixing; the tracking variable additionally absorbs the
local gradient change so its weighted network sum always equals the sum of
the agents' current gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .block_consensus import (
    BlockLayout,
    ProtocolViolationError,
    selections_at,
    weighted_average,
)
from .metrics import MetricsLog, disagreement
from .surrogates import solve_block_subproblem
from .topology import build_column_stochastic


class DivergenceError(RuntimeError):
    """Iterates left the guard region; the configuration is broken."""


def step_size_next(gamma, mu):
    """Diminishing step-size recursion ``gamma * (1 - mu * gamma)``."""
    return gamma * (1.0 - mu * gamma)


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule with ratio bound ``1 - mu * gamma0`` per iteration."""

    gamma0: float
    mu: float

    def __post_init__(self):
        if not 0.0 < self.gamma0 <= 1.0:
            raise ValueError(f"gamma0 must be in (0,1], got {self.gamma0}")
        if not 0.0 < self.mu < 1.0 / self.gamma0:
            raise ValueError(
                f"mu must be in (0, 1/gamma0)=(0, {1.0 / self.gamma0:g}), "
                f"got {self.mu}"
            )

    def sequence(self, steps):
        """The first ``steps`` step sizes, starting from ``gamma0``."""
        out = np.empty(steps)
        g = self.gamma0
        for t in range(steps):
            out[t] = g
            g = step_size_next(g, self.mu)
        return out


@dataclass(frozen=True, eq=False)
class AgentStates:
    """Stacked per-agent state: rows index agents.

    ``x``/``v``/``y``/``pi`` are ``(n, B*d)``; ``phi`` is ``(n, B)``;
    ``grad`` caches each agent's own-cost gradient at its current ``x``.
    """

    x: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    y: np.ndarray
    pi: np.ndarray
    grad: np.ndarray
    layout: BlockLayout

    @property
    def n_agents(self):
        return self.x.shape[0]

    def agent(self, i):
        """Read-only view of one agent's state."""
        return AgentView(x=self.x[i], v=self.v[i], phi=self.phi[i],
                         y=self.y[i], pi=self.pi[i], grad=self.grad[i])


@dataclass(frozen=True, eq=False)
class AgentView:
    x: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    y: np.ndarray
    pi: np.ndarray
    grad: np.ndarray


@dataclass(frozen=True, eq=False)
class Message:
    """One broadcast: the sender's selected block of ``(v, phi, y)``."""

    sender: int
    block: int
    v_block: np.ndarray
    phi: float
    y_block: np.ndarray


def broadcast_messages(states, selections):
    """The one message each agent broadcasts this iteration."""
    layout = states.layout
    out = []
    for i, block in enumerate(selections):
        s = layout.block_slice(block)
        out.append(Message(sender=i, block=int(block),
                           v_block=states.v[i, s].copy(),
                           phi=float(states.phi[i, block]),
                           y_block=states.y[i, s].copy()))
    return out


def init_states(problem, x0=None):
    """States at t=0: unit weights, tracking seeded with the own gradient."""
    n = problem.n_agents
    layout = problem.layout
    m = layout.total_dim
    if x0 is None:
        x = np.zeros((n, m))
    else:
        x = np.tile(np.asarray(x0, dtype=float), (n, 1)) if np.ndim(x0) == 1 \
            else np.array(x0, dtype=float)
    x = problem.box.clip(x)
    grad = problem.grads(x)
    y = grad.copy()
    pi = (n - 1.0) * grad
    return AgentStates(x=x, v=x.copy(), phi=np.ones((n, layout.num_blocks)),
                       y=y, pi=pi, grad=grad, layout=layout)


def optimization_step(states, problem, selections, gamma, subproblem_tol=1e-10):
    """Solve each agent's selected-block subproblem and damp the move.

    Returns the new ``v`` array: the selected block moves by
    ``gamma * (solution - x_block)``, every other block copies ``x``.
    """
    layout = states.layout
    v = states.x.copy()
    for i, block in enumerate(selections):
        s = layout.block_slice(block)
        sub = problem.subproblem(i, block, states.x[i], states.pi[i, s],
                                 grad_full=states.grad[i])
        xt = solve_block_subproblem(sub, tol=subproblem_tol)
        v[i, s] = problem.box.clip(states.x[i, s] + gamma * (xt - states.x[i, s]))
    return v


def communication_step(states, problem, selections, base):
    """Block-wise push-sum mixing of ``(phi, v, y)`` plus gradient tracking.

    Consumes the frozen iteration-t state (with ``v`` already set by the
    optimization phase) and returns the t+1 state.
    """
    layout = states.layout
    d = layout.block_dim
    a = base.matrix
    sel = np.ascontiguousarray(selections, dtype=np.int64)

    phi_new = _kernels.push_mix_phi(a, sel, states.phi)
    if np.any(phi_new <= 0.0):
        raise ProtocolViolationError("mixing produced a nonpositive weight")
    phi_exp = np.repeat(phi_new, d, axis=1)

    x_new = _kernels.push_mix_mass(a, sel, states.phi, states.v, d) / phi_exp
    x_new = problem.box.clip(x_new)

    grad_new = problem.grads(x_new)
    y_mass = _kernels.push_mix_mass(a, sel, states.phi, states.y, d)
    y_new = (y_mass + grad_new - states.grad) / phi_exp
    pi_new = states.n_agents * y_new - grad_new

    return replace(states, x=x_new, phi=phi_new, y=y_new, pi=pi_new,
                   grad=grad_new)


def run(problem, graph, schedule, step_schedule, max_iters, tol=None,
        d_tol=None, x0=None, subproblem_tol=1e-10, merit=None,
        divergence_limit=1e8, callback=None):
    """Run the full loop, recording one metrics row per iteration.

    ``merit`` maps the weighted network average to the stationarity
    residual recorded as ``J`` (``nan`` when omitted); ``D`` is the max
    distance of any agent from that average.  Stops after ``max_iters``
    iterations or as soon as ``J < tol`` (and ``D < d_tol``, when given).
    ``callback(t, states)`` runs after every iteration, e.g. for
    invariant monitoring.
    """
    if graph.n != problem.n_agents:
        raise ValueError(
            f"graph has {graph.n} nodes but problem has {problem.n_agents} agents"
        )
    layout = problem.layout
    base = build_column_stochastic(graph)
    states = init_states(problem, x0=x0)
    msgs_per_iter = graph.num_directed_edges
    payload = 2 * layout.block_dim + 1  # v block + y block + phi

    log = MetricsLog(num_blocks=layout.num_blocks)
    gamma = step_schedule.gamma0

    def record(t, msgs, reals):
        z = weighted_average(states.phi, states.x, layout)
        j = float(merit(z)) if merit is not None else float("nan")
        dd = disagreement(states.x, z)
        log.append(t=t, j=j, d=dd, gamma=gamma, msgs=msgs, reals_tx=reals)
        return j, dd

    j, dd = record(0, 0, 0)
    reals_cum = 0
    for t in range(max_iters):
        if tol is not None and j < tol and (d_tol is None or dd < d_tol):
            break
        sel = selections_at(schedule, graph.n, t)
        v = optimization_step(states, problem, sel, gamma, subproblem_tol)
        states = replace(states, v=v)
        states = communication_step(states, problem, sel, base)
        gamma = step_size_next(gamma, step_schedule.mu)
        reals_cum += msgs_per_iter * payload
        j, dd = record(t + 1, msgs_per_iter, reals_cum)
        peak = float(np.max(np.abs(states.x)))
        if peak > divergence_limit:
            raise DivergenceError(
                f"|x| reached {peak:.3e} > {divergence_limit:.0e} at "
                f"iteration {t + 1}; check the configuration"
            )
        if callback is not None:
            callback(t + 1, states)
    return log
