"""Full-batch Adam with a halving learning-rate schedule and multistart pretraining.

Training protocol: a number of independently seeded networks are first
trained for a short burst; the one reaching the lowest loss continues as
the main run with the learning rate starting at lr0 and halving every
halve_every iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional import FdRule, LossKernel, QuadratureMesh
from .network import Architecture, NetworkParams, init_params
from .problems import ProblemSpec

__all__ = ["AdamState", "TrainConfig", "lr_schedule", "adam_step", "pretrain_select", "train"]

DIVERGENCE_LIMIT = 1e12


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n))


@dataclass
class TrainConfig:
    iters: int
    lr0: float = 0.004
    halve_every: int = 50000
    pretrain_restarts: int = 10
    pretrain_iters: int = 5000
    seed: int = 0
    log_every: int = 1000
    threads: int = 1

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        if self.lr0 <= 0.0:
            raise ValueError("lr0 must be positive")
        if self.halve_every <= 0 or self.pretrain_restarts <= 0 or self.pretrain_iters < 0:
            raise ValueError("schedule parameters must be positive")


def lr_schedule(cfg: TrainConfig, iteration: int) -> float:
    """lr0 * 2^-floor(iter / halve_every)."""
    if iteration < 0:
        raise ValueError("iteration must be nonnegative")
    return cfg.lr0 * 2.0 ** (-(iteration // cfg.halve_every))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float):
    """One Adam update; returns (new_params, state) with state updated in place."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state length mismatch")
    if not np.all(np.isfinite(grads)):
        raise FloatingPointError("non-finite gradient")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps), state


class DivergenceError(RuntimeError):
    """Loss became non-finite or exceeded the divergence guard.

    Carries the last network whose loss was still finite, so callers can
    checkpoint it.
    """

    def __init__(self, message: str, last_good: NetworkParams | None = None):
        super().__init__(message)
        self.last_good = last_good


def _run_adam(kern: LossKernel, net: NetworkParams, cfg: TrainConfig, iters: int,
              state: AdamState | None = None, history=None, callback=None):
    """Adam loop on one network; returns (net, state, last LossBreakdown)."""
    params = net.params.copy()
    last_good = net
    if state is None:
        state = AdamState.fresh(len(params))
    bd = None
    for it in range(iters):
        current = NetworkParams(net.arch, params)
        bd, grad = kern.loss_and_grad(current)
        if not np.isfinite(bd.total) or bd.total > DIVERGENCE_LIMIT:
            raise DivergenceError(f"loss {bd.total!r} at iteration {it}", last_good)
        last_good = current
        lr = lr_schedule(cfg, it)
        if history is not None and it % cfg.log_every == 0:
            history.append((it, lr, bd.interior_term, bd.boundary_term, bd.total))
        if callback is not None:
            callback(it, bd, params)
        params, state = adam_step(params, grad, state, lr)
    final = NetworkParams(net.arch, params)
    if iters > 0:
        bd = kern.loss(final)
    return final, state, bd


def pretrain_select(arch: Architecture, spec: ProblemSpec, mesh: QuadratureMesh,
                    rule: FdRule, cfg: TrainConfig, kern: LossKernel | None = None):
    """Train pretrain_restarts nets from seeds seed+0.. and keep the best.

    Returns (net, per_restart_losses); diverged restarts score +inf.  Ties
    break toward the lowest seed offset.
    """
    own = kern is None
    if own:
        kern = LossKernel(spec, mesh, rule, threads=cfg.threads)
    try:
        best = None
        losses = []
        for off in range(cfg.pretrain_restarts):
            net0 = init_params(arch, cfg.seed + off)
            try:
                net, _, bd = _run_adam(kern, net0, cfg, cfg.pretrain_iters)
                score = bd.total if bd is not None else kern.loss(net).total
            except DivergenceError:
                net, score = net0, np.inf
            losses.append(score)
            if best is None or score < best[1]:
                best = (net, score)
        return best[0], losses
    finally:
        if own:
            kern.close()


def train(arch: Architecture, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule,
          cfg: TrainConfig, callback=None):
    """Full protocol: multistart pretraining, then cfg.iters Adam steps.

    Returns (net, history, pretrain_losses) where history holds
    (iter, lr, interior, boundary, total) rows every cfg.log_every steps
    plus a final row.  The learning-rate schedule restarts at the
    beginning of the main run.
    """
    kern = LossKernel(spec, mesh, rule, threads=cfg.threads)
    try:
        net, pre_losses = pretrain_select(arch, spec, mesh, rule, cfg, kern=kern)
        history = []
        net, _, bd = _run_adam(kern, net, cfg, cfg.iters, history=history, callback=callback)
        if bd is None:
            bd = kern.loss(net)
        history.append((cfg.iters, lr_schedule(cfg, max(cfg.iters - 1, 0)),
                        bd.interior_term, bd.boundary_term, bd.total))
        return net, history, pre_losses
    finally:
        kern.close()
