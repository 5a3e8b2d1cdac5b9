"""Merit functions, per-iteration logging, and the full-vector baseline.

The stationarity residual measures how far the weighted network average is
from being a fixed point of the prox-projection map of the composite
problem; it is zero exactly at stationary points.  The disagreement is the
worst agent's distance from that average.  The baseline is a projected
subgradient method with full-vector push-sum mixing, which transmits the
whole decision vector every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .block_consensus import ProtocolViolationError, weighted_average
from .regression import dg0_minus, eta, soft_threshold
from .topology import build_column_stochastic

TRACE_HEADER = "t,t_norm,J,D,gamma,msgs,reals_tx"
SUMMARY_HEADER = "B,t_end,t_end_norm,reals_tx"


class TraceFormatError(ValueError):
    """A trace CSV did not match the declared schema."""


@dataclass
class MetricsLog:
    """Per-iteration records of one run.

    Row ``t`` holds the state after ``t`` communication rounds; ``msgs``
    counts the block messages sent in round ``t`` and ``reals_tx`` the
    cumulative real numbers transmitted.
    """

    num_blocks: int
    t: list = field(default_factory=list)
    j: list = field(default_factory=list)
    d: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    msgs: list = field(default_factory=list)
    reals_tx: list = field(default_factory=list)

    def append(self, t, j, d, gamma, msgs, reals_tx):
        if self.t and t <= self.t[-1]:
            raise ValueError(f"iterations must increase, got {t} after {self.t[-1]}")
        if msgs < 0 or reals_tx < 0:
            raise ValueError("counters must be nonnegative")
        if self.reals_tx and reals_tx < self.reals_tx[-1]:
            raise ValueError("cumulative counters cannot decrease")
        self.t.append(int(t))
        self.j.append(float(j))
        self.d.append(float(d))
        self.gamma.append(float(gamma))
        self.msgs.append(int(msgs))
        self.reals_tx.append(int(reals_tx))

    def __len__(self):
        return len(self.t)

    def t_norm(self, idx):
        return self.t[idx] / self.num_blocks


def completion_time(log, tol):
    """First iteration with residual below ``tol``, or ``None``."""
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    for t, j in zip(log.t, log.j):
        if j < tol:
            return t
    return None


def make_stationarity_merit(instance):
    """Residual of the prox-projection fixed-point map at unit step.

    Evaluates ``|| z - P_box(soft(z - grad_F(z) + lam * grad_Gminus(z),
    lam*eta)) ||_inf`` with the agent costs stacked once up front.
    """
    d_all = np.vstack(instance.design)
    b_all = np.concatenate(instance.observations)
    lam, theta, box = instance.lam, instance.theta, instance.box
    thr = lam * eta(theta)

    def merit(z):
        g = 2.0 * (d_all.T @ (d_all @ z - b_all))
        if lam > 0.0:
            g = g - lam * dg0_minus(z, theta)
        step = box.clip(soft_threshold(z - g, thr))
        return float(np.max(np.abs(z - step)))

    return merit


def stationarity_residual(z, instance):
    """One-shot form of :func:`make_stationarity_merit`."""
    return make_stationarity_merit(instance)(np.asarray(z, dtype=float))


def disagreement(x_all, z):
    """Largest l2 distance of any agent's estimate from the average ``z``."""
    return float(np.max(np.linalg.norm(x_all - z[None, :], axis=1)))


def network_average(states):
    """Phi-weighted average of the agents' estimates (the tracked point)."""
    return weighted_average(states.phi, states.x, states.layout)


def dgrad_step(x_all, phi, instance, base, gamma):
    """One baseline iteration: local projected subgradient then push-sum.

    Every agent moves against its own gradient plus a subgradient of the
    full penalty, projects onto the box, then mixes the full vector with
    the column-stochastic weights.
    """
    if np.any(phi <= 0.0):
        raise ProtocolViolationError("push-sum weights must stay positive")
    lam, theta = instance.lam, instance.theta
    n = x_all.shape[0]
    z = np.empty_like(x_all)
    for i in range(n):
        g = instance.f_grad(i, x_all[i])
        if lam > 0.0:
            sub = eta(theta) * np.sign(x_all[i]) - dg0_minus(x_all[i], theta)
            g = g + lam * sub
        z[i] = instance.box.clip(x_all[i] - gamma * g)
    a = base.matrix
    phi_new = a @ phi
    if np.any(phi_new <= 0.0):
        raise ProtocolViolationError("mixing produced a nonpositive weight")
    x_new = (a @ (phi[:, None] * z)) / phi_new[:, None]
    return x_new, phi_new


def run_dgrad(instance, graph, step_schedule, max_iters, tol=None, x0=None):
    """Run the full-vector baseline, logging the same trace schema.

    Each iteration transmits ``dim + 1`` reals per directed edge (the
    projected step and the push-sum weight).
    """
    n = instance.num_agents
    m = instance.dim
    base = build_column_stochastic(graph)
    merit = make_stationarity_merit(instance)
    x = np.zeros((n, m)) if x0 is None else np.array(x0, dtype=float)
    x = instance.box.clip(x)
    phi = np.ones(n)
    msgs_per_iter = graph.num_directed_edges
    payload = m + 1

    log = MetricsLog(num_blocks=1)
    gamma = step_schedule.gamma0

    def record(t, msgs, reals):
        z = phi @ x / n
        log.append(t=t, j=merit(z), d=disagreement(x, z), gamma=gamma,
                   msgs=msgs, reals_tx=reals)
        return log.j[-1]

    j = record(0, 0, 0)
    reals_cum = 0
    for t in range(max_iters):
        if tol is not None and j < tol:
            break
        x, phi = dgrad_step(x, phi, instance, base, gamma)
        gamma = gamma * (1.0 - step_schedule.mu * gamma)
        reals_cum += msgs_per_iter * payload
        j = record(t + 1, msgs_per_iter, reals_cum)
    return log


def _fmt(v):
    return f"{v:.17g}"


def write_trace(log, path):
    """Write the trace CSV with the exact declared header."""
    lines = [TRACE_HEADER]
    for i in range(len(log)):
        lines.append(",".join([
            str(log.t[i]), _fmt(log.t_norm(i)), _fmt(log.j[i]), _fmt(log.d[i]),
            _fmt(log.gamma[i]), str(log.msgs[i]), str(log.reals_tx[i]),
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path):
    """Read a trace CSV back into a :class:`MetricsLog`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceFormatError(
            f"{path}:1: expected header {TRACE_HEADER!r}"
        )
    num_blocks = 1
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 7:
            raise TraceFormatError(
                f"{path}:{lineno}: expected 7 fields, got {len(parts)}"
            )
        try:
            t = int(parts[0])
            t_norm = float(parts[1])
            vals = [float(p) for p in parts[2:5]]
            msgs = int(parts[5])
            reals = int(parts[6])
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
        if t > 0 and t_norm > 0:
            num_blocks = round(t / t_norm)
        rows.append((t, vals[0], vals[1], vals[2], msgs, reals))
    log = MetricsLog(num_blocks=num_blocks)
    for t, j, d, gamma, msgs, reals in rows:
        log.append(t=t, j=j, d=d, gamma=gamma, msgs=msgs, reals_tx=reals)
    return log


def write_summary(rows, path):
    """Write the block-sweep summary CSV: one row per block count."""
    lines = [SUMMARY_HEADER]
    for b, t_end, reals in rows:
        if t_end is None:
            lines.append(f"{b},,,{reals}")
        else:
            lines.append(f"{b},{t_end},{_fmt(t_end / b)},{reals}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
