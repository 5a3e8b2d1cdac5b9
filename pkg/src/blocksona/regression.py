"""Distributed sparse regression with a log-penalty DC regularizer.

Each agent holds a row-normalized random design matrix and noisy linear
observations of a common sparse signal.  The nonconvex log penalty is split
into a weighted l1 part (kept in the subproblems as the nonsmooth term) and
a smooth concave part whose gradient enters the surrogates as a linear
correction.  Two surrogate families are provided: partial linearization
(keep the local least-squares block exactly) and full linearization, the
latter with a closed-form block update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .block_consensus import BlockLayout
from .surrogates import (
    Box,
    CompositeBlockProblem,
    QuadraticStructure,
    SmoothFunction,
    SubproblemError,
    SurrogateModel,
)

TAU_PL_DEFAULT = 3.5
TAU_L_DEFAULT = 4.5

PARTIAL_LINEAR = "pl"
LINEAR = "l"
PROX_LINEAR = "prox_linear"
SURROGATE_KINDS = (PARTIAL_LINEAR, LINEAR, PROX_LINEAR)


def eta(theta):
    """Slope of the l1 majorant of the log penalty: theta / log(1+theta)."""
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    return theta / math.log1p(theta)


def g0(x, theta):
    """Normalized log penalty log(1 + theta|x|) / log(1 + theta)."""
    return np.log1p(theta * np.abs(x)) / math.log1p(theta)


def g0_minus(x, theta):
    """Smooth convex part of the DC split: eta(theta)|x| - g0(x)."""
    return eta(theta) * np.abs(x) - g0(x, theta)


def dg0_minus(x, theta):
    """Derivative of the smooth DC part: sign(x) theta^2 |x| / (log(1+theta)(1+theta|x|))."""
    ax = np.abs(x)
    return np.sign(x) * theta * theta * ax / (math.log1p(theta) * (1.0 + theta * ax))


def soft_threshold(v, thr):
    """Coordinate-wise shrinkage sign(v) * max(|v| - thr, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


@dataclass(frozen=True, eq=False)
class RegressionInstance:
    """Per-agent data of one sparse-regression problem.

    ``design[i]`` is the (rows_i, dim) matrix of agent ``i`` and
    ``observations[i]`` its measurement vector.  ``lam`` weights the log
    penalty with sharpness ``theta``; the feasible set is ``box``.
    """

    design: tuple
    observations: tuple
    ground_truth: np.ndarray
    lam: float
    theta: float
    box: Box = field(default_factory=lambda: Box(-10.0, 10.0))

    def __post_init__(self):
        if len(self.design) != len(self.observations):
            raise ValueError("one observation vector per design matrix required")
        if not self.design:
            raise ValueError("need at least one agent")
        m = self.design[0].shape[1]
        for d_i, b_i in zip(self.design, self.observations):
            if d_i.ndim != 2 or d_i.shape[1] != m:
                raise ValueError("all design matrices must share the column count")
            if b_i.shape != (d_i.shape[0],):
                raise ValueError("observation length must match the row count")
        if self.lam < 0.0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")

    @property
    def num_agents(self):
        return len(self.design)

    @property
    def dim(self):
        return self.design[0].shape[1]

    def f_value(self, agent, x):
        r = self.design[agent] @ x - self.observations[agent]
        return float(r @ r)

    def f_grad(self, agent, x):
        d = self.design[agent]
        return 2.0 * (d.T @ (d @ x - self.observations[agent]))

    def total_grad(self, x):
        return sum(self.f_grad(i, x) for i in range(self.num_agents))


def generate_instance(n_agents, dim, rows_per_agent, sparsity, noise_var, seed,
                      lam=0.1, theta=20.0, box=None):
    """Draw a random instance; fully determined by ``seed``.

    The ground truth is standard normal with its smallest entries (by
    magnitude, a ``sparsity`` fraction) zeroed.  Designs are standard
    normal with l2-normalized rows; observations add N(0, noise_var) noise.
    """
    if n_agents < 1 or dim < 1 or rows_per_agent < 1:
        raise ValueError("n_agents, dim and rows_per_agent must be positive")
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity must be in [0,1], got {sparsity}")
    if noise_var < 0.0:
        raise ValueError(f"noise_var must be nonnegative, got {noise_var}")

    rng_truth = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    rng_design = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    rng_noise = np.random.default_rng(np.random.SeedSequence([seed, 2]))

    x0 = rng_truth.standard_normal(dim)
    num_nonzero = int(math.ceil((1.0 - sparsity) * dim - 1e-9))
    order = np.argsort(np.abs(x0), kind="stable")
    x0[order[: dim - num_nonzero]] = 0.0

    design = []
    observations = []
    sd = math.sqrt(noise_var)
    for _ in range(n_agents):
        d_i = rng_design.standard_normal((rows_per_agent, dim))
        d_i /= np.linalg.norm(d_i, axis=1, keepdims=True)
        design.append(d_i)
        observations.append(d_i @ x0 + sd * rng_noise.standard_normal(rows_per_agent))

    return RegressionInstance(
        design=tuple(design), observations=tuple(observations),
        ground_truth=x0, lam=lam, theta=theta,
        box=box if box is not None else Box(-10.0, 10.0),
    )


def smooth_with_dc(instance, agent):
    """The smooth cost surrogates approximate: f_i minus lam * sum g0_minus."""
    lam, theta = instance.lam, instance.theta

    def value(x):
        return instance.f_value(agent, x) - lam * float(np.sum(g0_minus(x, theta)))

    def grad(x):
        return instance.f_grad(agent, x) - lam * dg0_minus(x, theta)

    return SmoothFunction(value=value, grad=grad)


def _dc_correction(instance, x_block, apply_lambda):
    w = dg0_minus(x_block, instance.theta)
    return instance.lam * w if apply_lambda else w


def pl_surrogate(instance, agent, block, x_t, tau=TAU_PL_DEFAULT, layout=None,
                 apply_lambda=True, hess=None, lip=None, grad_full=None):
    """Partial linearization: exact block least squares + proximal term +
    linearized concave penalty part.

    ``hess``/``lip``/``grad_full`` let a caller pass precomputed pieces;
    they must match the instance (no checks, hot path).
    """
    layout = _default_layout(instance, layout)
    s = layout.block_slice(block)
    x_t = np.asarray(x_t, dtype=float)
    xb = x_t[s].copy()
    d_bl = instance.design[agent][:, s]
    if hess is None:
        hess = 2.0 * (d_bl.T @ d_bl) + tau * np.eye(layout.block_dim)
        lip = float(np.linalg.eigvalsh(hess)[-1])
    if grad_full is None:
        grad_full = instance.f_grad(agent, x_t)
    corr = _dc_correction(instance, xb, apply_lambda)
    lin = grad_full[s] - hess @ xb - corr

    b_i = instance.observations[agent]
    d_i = instance.design[agent]
    x_rest = x_t.copy()

    def value(w):
        r = d_bl @ (w - xb) + (d_i @ x_rest - b_i)
        dw = w - xb
        return float(r @ r + 0.5 * tau * (dw @ dw) - corr @ dw)

    def gradient(w):
        return hess @ w + lin

    quad = QuadraticStructure(hess=hess, lin=lin, lip=lip, strong=tau)
    return SurrogateModel(block=block, anchor=x_t.copy(), tau=tau, strong=tau,
                          value=value, gradient=gradient, quadratic=quad)


def l_surrogate(instance, agent, block, x_t, tau=TAU_L_DEFAULT, layout=None,
                apply_lambda=True, grad_full=None):
    """Full linearization: block gradient + proximal term + linearized
    concave penalty part.  Its subproblem has a closed-form solution."""
    layout = _default_layout(instance, layout)
    return _linearized_surrogate(instance, agent, block, x_t, tau, layout,
                                 apply_lambda, grad_full, prox_coeff=0.5)


def proxlin_surrogate(instance, agent, block, x_t, tau=1.0, layout=None,
                      apply_lambda=True, grad_full=None):
    """Classical proximal-gradient surrogate (prox term ``tau * ||.||^2``)."""
    layout = _default_layout(instance, layout)
    return _linearized_surrogate(instance, agent, block, x_t, tau, layout,
                                 apply_lambda, grad_full, prox_coeff=1.0)


def _linearized_surrogate(instance, agent, block, x_t, tau, layout,
                          apply_lambda, grad_full, prox_coeff):
    s = layout.block_slice(block)
    x_t = np.asarray(x_t, dtype=float)
    xb = x_t[s].copy()
    if grad_full is None:
        grad_full = instance.f_grad(agent, x_t)
    corr = _dc_correction(instance, xb, apply_lambda)
    c = grad_full[s].copy()
    curv = 2.0 * prox_coeff * tau  # Hessian of the proximal term

    def value(w):
        dw = w - xb
        return float(c @ dw + prox_coeff * tau * (dw @ dw) - corr @ dw)

    def gradient(w):
        return c + curv * (w - xb) - corr

    hess = curv * np.eye(layout.block_dim)
    quad = QuadraticStructure(hess=hess, lin=c - corr - curv * xb,
                              lip=curv, strong=curv)
    return SurrogateModel(block=block, anchor=x_t.copy(), tau=tau, strong=curv,
                          value=value, gradient=gradient, quadratic=quad)


def make_subproblem(instance, agent, block, x_t, pi_block, kind,
                    tau=None, layout=None, apply_lambda=True,
                    grad_full=None, hess=None, lip=None):
    """Assemble one agent's composite block subproblem.

    The nonsmooth term is ``lam * eta(theta) * ||w||_1`` plus the box.  For
    the linearized families (whose surrogate Hessian is a multiple of the
    identity) the exact soft-threshold-and-project update is registered as
    the closed form.
    """
    if kind not in SURROGATE_KINDS:
        raise ValueError(f"unknown surrogate kind {kind!r}")
    layout = _default_layout(instance, layout)
    pi_block = np.asarray(pi_block, dtype=float)

    if kind == PARTIAL_LINEAR:
        tau = TAU_PL_DEFAULT if tau is None else tau
        sur = pl_surrogate(instance, agent, block, x_t, tau, layout,
                           apply_lambda, hess=hess, lip=lip, grad_full=grad_full)
        closed = None
    else:
        if kind == LINEAR:
            tau = TAU_L_DEFAULT if tau is None else tau
            sur = l_surrogate(instance, agent, block, x_t, tau, layout,
                              apply_lambda, grad_full=grad_full)
        else:
            tau = 1.0 if tau is None else tau
            sur = proxlin_surrogate(instance, agent, block, x_t, tau, layout,
                                    apply_lambda, grad_full=grad_full)
        curv = sur.quadratic.lip  # multiple of the identity
        step_lin = sur.quadratic.lin + pi_block
        l1_w = instance.lam * eta(instance.theta)
        box = instance.box

        def closed():
            return box.clip(soft_threshold(-step_lin / curv, l1_w / curv))

    return CompositeBlockProblem(
        surrogate=sur, linear=pi_block,
        anchor_block=np.asarray(x_t, dtype=float)[layout.block_slice(block)].copy(),
        l1=instance.lam * eta(instance.theta), box=instance.box,
        closed_form=closed,
    )


def _default_layout(instance, layout):
    return layout if layout is not None else BlockLayout(1, instance.dim)


class RegressionProblem:
    """Binding of an instance to a block layout and surrogate family.

    Precomputes per-block design slices, surrogate Hessians and their
    spectral bounds so the simulator's per-iteration work stays cheap.
    This is the problem interface the run loop consumes.
    """

    def __init__(self, instance, layout, kind=PARTIAL_LINEAR, tau=None,
                 apply_lambda=True):
        if kind not in SURROGATE_KINDS:
            raise ValueError(f"unknown surrogate kind {kind!r}")
        if layout.total_dim != instance.dim:
            raise ValueError(
                f"layout covers {layout.total_dim} coordinates, "
                f"instance has {instance.dim}"
            )
        self.instance = instance
        self.layout = layout
        self.kind = kind
        if tau is None:
            tau = {PARTIAL_LINEAR: TAU_PL_DEFAULT, LINEAR: TAU_L_DEFAULT,
                   PROX_LINEAR: 1.0}[kind]
        self.tau = tau
        self.apply_lambda = apply_lambda
        self.box = instance.box
        self.n_agents = instance.num_agents

        if kind == PARTIAL_LINEAR:
            self._hess = []
            self._lip = []
            for i in range(instance.num_agents):
                rows_h, rows_l = [], []
                for block in range(layout.num_blocks):
                    d_bl = instance.design[i][:, layout.block_slice(block)]
                    h = 2.0 * (d_bl.T @ d_bl) + tau * np.eye(layout.block_dim)
                    rows_h.append(np.ascontiguousarray(h))
                    rows_l.append(float(np.linalg.eigvalsh(h)[-1]))
                self._hess.append(rows_h)
                self._lip.append(rows_l)

    def grad(self, agent, x):
        return self.instance.f_grad(agent, x)

    def grads(self, x_all):
        """Stacked per-agent gradients, each evaluated at its own point."""
        out = np.empty_like(x_all)
        for i in range(self.n_agents):
            out[i] = self.instance.f_grad(i, x_all[i])
        return out

    def subproblem(self, agent, block, x, pi_block, grad_full=None):
        hess = lip = None
        if self.kind == PARTIAL_LINEAR:
            hess = self._hess[agent][block]
            lip = self._lip[agent][block]
        return make_subproblem(
            self.instance, agent, block, x, pi_block, self.kind,
            tau=self.tau, layout=self.layout, apply_lambda=self.apply_lambda,
            grad_full=grad_full, hess=hess, lip=lip,
        )


def centralized_reference_solve(instance, tol=1e-10, convexify=False,
                                max_iter=500_000):
    """Centralized proximal-gradient oracle for convex configurations.

    Requires ``lam == 0`` or ``convexify=True`` (which keeps only the
    convex l1 majorant of the penalty).  Plain, unaccelerated iteration,
    kept independent of the simulator's solver paths on purpose.
    """
    if instance.lam > 0.0 and not convexify:
        raise ValueError("reference solve needs lam=0 or convexify=True")
    d_all = np.vstack(instance.design)
    b_all = np.concatenate(instance.observations)
    m = instance.dim
    lip = 2.0 * float(np.linalg.eigvalsh(d_all.T @ d_all)[-1])
    lip = max(lip, 1e-12)
    step = 1.0 / lip
    thr = step * instance.lam * eta(instance.theta) if convexify else 0.0
    box = instance.box

    x = np.zeros(m)
    for _ in range(max_iter):
        g = 2.0 * (d_all.T @ (d_all @ x - b_all))
        x_new = box.clip(soft_threshold(x - step * g, thr))
        if np.max(np.abs(x_new - x)) <= tol:
            return x_new
        x = x_new
    raise SubproblemError(
        f"reference solve did not converge in {max_iter} iterations",
        residual=float(np.max(np.abs(x_new - x))),
    )


def save_instance(instance, path):
    """Text dump: header with sizes and parameters, then full-precision reals."""
    lines = [
        f"{instance.num_agents} {instance.dim} {instance.lam:.17g} "
        f"{instance.theta:.17g} {instance.box.lo:.17g} {instance.box.hi:.17g}",
        " ".join(str(d.shape[0]) for d in instance.design),
        _fmt(instance.ground_truth),
    ]
    for d_i, b_i in zip(instance.design, instance.observations):
        lines.append(_fmt(d_i.ravel()))
        lines.append(_fmt(b_i))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path):
    """Read an instance written by :func:`save_instance`."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    head = raw[0].split()
    n, m = int(head[0]), int(head[1])
    lam, theta, lo, hi = (float(v) for v in head[2:6])
    rows = [int(v) for v in raw[1].split()]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} row counts, got {len(rows)}")
    x0 = np.array([float(v) for v in raw[2].split()])
    design, observations = [], []
    for i in range(n):
        d_i = np.array([float(v) for v in raw[3 + 2 * i].split()])
        design.append(d_i.reshape(rows[i], m))
        observations.append(np.array([float(v) for v in raw[4 + 2 * i].split()]))
    return RegressionInstance(
        design=tuple(design), observations=tuple(observations),
        ground_truth=x0, lam=lam, theta=theta, box=Box(lo, hi),
    )


def _fmt(arr):
    return " ".join(f"{v:.17g}" for v in arr)
