"""Strongly convex block surrogates and the composite subproblem solver.

A surrogate replaces the (possibly nonconvex) local cost on one block by a
strongly convex model anchored at the current iterate, whose gradient at the
anchor matches the true block gradient.  Four constructors are provided:
full linearization with a proximal term, a second-order model, the
keep-the-block-cost variant, and a difference-of-convex split.

The block subproblem adds a linear tracking term, an optional weighted l1
term and a box, and is solved either by a registered closed form, by the
accelerated prox-gradient kernel when the surrogate is an explicit
quadratic, or by a generic backtracking FISTA on the callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels


class SurrogateConstructionError(ValueError):
    """The premises of a surrogate family were violated."""


class SubproblemError(RuntimeError):
    """Subproblem solver failed to reach the requested residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SmoothFunction:
    """Smooth cost with a gradient and, optionally, block Hessians."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    block_hessian: Optional[Callable[[np.ndarray, int], np.ndarray]] = None


@dataclass(frozen=True)
class Box:
    """Coordinate-wise box ``[lo, hi]``; infinite bounds mean unconstrained."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty box [{self.lo}, {self.hi}]")

    def clip(self, v):
        return np.clip(v, self.lo, self.hi)

    def contains(self, v):
        return bool(np.all(v >= self.lo) and np.all(v <= self.hi))


UNBOUNDED = Box()


@dataclass(frozen=True, eq=False)
class QuadraticStructure:
    """Explicit form ``grad(w) = hess @ w + lin`` with spectral bounds."""

    hess: np.ndarray
    lin: np.ndarray
    lip: float
    strong: float


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """Strongly convex model of one block of a smooth cost.

    ``tau`` is the constructor's proximal parameter; ``strong`` the
    guaranteed strong-convexity modulus of ``value`` (second-derivative
    sense).  ``gradient`` at the anchor block equals the block gradient of
    the approximated cost.
    """

    block: int
    anchor: np.ndarray
    tau: float
    strong: float
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    quadratic: Optional[QuadraticStructure] = None

    def __post_init__(self):
        if self.tau <= 0.0:
            raise SurrogateConstructionError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True, eq=False)
class CompositeBlockProblem:
    """One agent's block subproblem: surrogate + linear term + l1 + box."""

    surrogate: SurrogateModel
    linear: np.ndarray
    anchor_block: np.ndarray
    l1: float = 0.0
    box: Box = UNBOUNDED
    closed_form: Optional[Callable[[], np.ndarray]] = None

    def objective(self, w):
        val = self.surrogate.value(w)
        val += float(self.linear @ (w - self.anchor_block))
        if self.l1 > 0.0:
            val += self.l1 * float(np.sum(np.abs(w)))
        return val


def _embed(x_full, block_slice, w):
    full = x_full.copy()
    full[block_slice] = w
    return full


def make_prox_linear(f, x_t, block, tau, layout):
    """Linearize the cost on the block and add ``tau * ||w - anchor||^2``."""
    s = layout.block_slice(block)
    anchor = np.asarray(x_t, dtype=float).copy()
    a = anchor[s]
    g0 = np.asarray(f.grad(anchor), dtype=float)[s].copy()
    d = layout.block_dim

    def value(w):
        dw = w - a
        return float(g0 @ dw + tau * (dw @ dw))

    def gradient(w):
        return g0 + 2.0 * tau * (w - a)

    hess = 2.0 * tau * np.eye(d)
    quad = QuadraticStructure(hess=hess, lin=g0 - 2.0 * tau * a,
                              lip=2.0 * tau, strong=2.0 * tau)
    return SurrogateModel(block=block, anchor=anchor, tau=tau, strong=2.0 * tau,
                          value=value, gradient=gradient, quadratic=quad)


def make_second_order(f, x_t, block, tau, layout):
    """Second-order model of a block-wise convex cost plus a proximal term."""
    if f.block_hessian is None:
        raise SurrogateConstructionError("cost provides no block Hessian")
    s = layout.block_slice(block)
    anchor = np.asarray(x_t, dtype=float).copy()
    a = anchor[s]
    g0 = np.asarray(f.grad(anchor), dtype=float)[s].copy()
    hll = np.asarray(f.block_hessian(anchor, block), dtype=float)
    hll = 0.5 * (hll + hll.T)
    eigs = np.linalg.eigvalsh(hll)
    if eigs[0] < -1e-10 * max(1.0, abs(eigs[-1])):
        raise SurrogateConstructionError(
            f"block Hessian is not positive semidefinite (min eig {eigs[0]:.3e})"
        )
    f0 = float(f.value(anchor))

    def value(w):
        dw = w - a
        return f0 + float(g0 @ dw + 0.5 * dw @ (hll @ dw) + tau * (dw @ dw))

    def gradient(w):
        dw = w - a
        return g0 + hll @ dw + 2.0 * tau * dw

    hess = hll + 2.0 * tau * np.eye(layout.block_dim)
    quad = QuadraticStructure(
        hess=hess, lin=g0 - hess @ a,
        lip=float(eigs[-1]) + 2.0 * tau, strong=max(float(eigs[0]), 0.0) + 2.0 * tau,
    )
    return SurrogateModel(block=block, anchor=anchor, tau=tau, strong=2.0 * tau,
                          value=value, gradient=gradient, quadratic=quad)


def make_partial_convexity(f, x_t, block, tau, layout):
    """Keep the cost exact in the block (assumed convex there) plus proximal."""
    s = layout.block_slice(block)
    anchor = np.asarray(x_t, dtype=float).copy()
    a = anchor[s]

    def value(w):
        dw = w - a
        return float(f.value(_embed(anchor, s, w)) + tau * (dw @ dw))

    def gradient(w):
        return np.asarray(f.grad(_embed(anchor, s, w)))[s] + 2.0 * tau * (w - a)

    return SurrogateModel(block=block, anchor=anchor, tau=tau, strong=2.0 * tau,
                          value=value, gradient=gradient)


def make_dc_split(f_convex, f_concave_part, x_t, block, tau, layout):
    """Difference-of-convex model: keep the first part, linearize the second.

    Approximates ``f_convex - f_concave_part`` (both convex) on the block.
    """
    s = layout.block_slice(block)
    anchor = np.asarray(x_t, dtype=float).copy()
    a = anchor[s]
    gb = np.asarray(f_concave_part.grad(anchor), dtype=float)[s].copy()

    def value(w):
        dw = w - a
        return float(f_convex.value(_embed(anchor, s, w)) - gb @ dw + tau * (dw @ dw))

    def gradient(w):
        return (np.asarray(f_convex.grad(_embed(anchor, s, w)))[s]
                - gb + 2.0 * tau * (w - a))

    return SurrogateModel(block=block, anchor=anchor, tau=tau, strong=2.0 * tau,
                          value=value, gradient=gradient)


def verify_gradient_consistency(surrogate, f, x_t, layout, step=1e-5):
    """Max relative error between the surrogate gradient at the anchor and
    central finite differences of ``f`` restricted to the block."""
    s = layout.block_slice(surrogate.block)
    x_t = np.asarray(x_t, dtype=float)
    a = x_t[s]
    gs = np.asarray(surrogate.gradient(a), dtype=float)
    fd = np.empty(layout.block_dim)
    for k in range(layout.block_dim):
        hi = x_t.copy()
        lo = x_t.copy()
        hi[s.start + k] += step
        lo[s.start + k] -= step
        fd[k] = (f.value(hi) - f.value(lo)) / (2.0 * step)
    denom = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(gs - fd))) / denom


def solve_block_subproblem(problem, tol=1e-10, max_iter=50_000,
                           force_iterative=False):
    """Minimize the composite block subproblem to the requested residual.

    Uses, in order of preference, a registered closed form, the quadratic
    prox-gradient kernel, or generic backtracking FISTA on the surrogate
    callables.  The result is always inside the box.  Raises
    :class:`SubproblemError` (carrying the final residual) when the
    iterative solver does not converge.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    if problem.closed_form is not None and not force_iterative:
        return problem.box.clip(problem.closed_form())

    quad = problem.surrogate.quadratic
    if quad is not None:
        q = np.ascontiguousarray(quad.lin + problem.linear)
        w, res, _ = _kernels.fista_box_l1(
            np.ascontiguousarray(quad.hess), q, float(problem.l1),
            float(problem.box.lo), float(problem.box.hi),
            np.ascontiguousarray(problem.anchor_block, dtype=float),
            float(quad.lip), float(quad.strong), float(tol), int(max_iter),
        )
        if res > tol:
            raise SubproblemError(
                f"quadratic subproblem stalled at residual {res:.3e} > {tol:.3e}",
                residual=res,
            )
        return w

    return _fista_backtracking(problem, tol, max_iter)


def _fista_backtracking(problem, tol, max_iter):
    sur = problem.surrogate
    box = problem.box
    l1 = problem.l1
    lin = problem.linear

    def grad(w):
        return np.asarray(sur.gradient(w), dtype=float) + lin

    def val(w):
        return float(sur.value(w)) + float(lin @ w)

    def prox(v, step):
        return box.clip(np.sign(v) * np.maximum(np.abs(v) - step * l1, 0.0))

    w = box.clip(np.asarray(problem.anchor_block, dtype=float).copy())
    w_prev = w.copy()
    z = w.copy()
    lip = max(sur.strong, 1.0)
    mu = sur.strong
    res = math.inf
    for k in range(1, max_iter + 1):
        gz = grad(z)
        vz = val(z)
        # backtracking on the local curvature bound
        while True:
            step = 1.0 / lip
            w = prox(z - step * gz, step)
            dw = w - z
            if val(w) <= vz + float(gz @ dw) + 0.5 * lip * float(dw @ dw) + 1e-14:
                break
            lip *= 2.0
        if np.max(np.abs(w - w_prev)) <= tol:
            t = prox(w - grad(w) / lip, 1.0 / lip)
            res = float(np.max(np.abs(w - t)))
            if res <= tol:
                return w
        sl, sm = math.sqrt(lip), math.sqrt(min(mu, lip))
        beta = (sl - sm) / (sl + sm)
        z = w + beta * (w - w_prev)
        w_prev = w
    raise SubproblemError(
        f"subproblem did not converge in {max_iter} iterations "
        f"(residual {res:.3e})",
        residual=res,
    )
