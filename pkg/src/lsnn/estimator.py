"""Scikit-learn style front end for the least-squares network solver.

LSNNSolver packages mesh construction, multistart pretraining, and Adam
training behind fit/predict/score so the solver composes with standard
tooling (get_params, set_params, cloning).  fit takes no data: the
"training set" is the collocation mesh generated from (problem, h).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import metrics
from .functional import FdRule, LossKernel, build_mesh
from .network import Architecture, forward_batch
from .optim import TrainConfig, train
from .problems import make_benchmark

__all__ = ["LSNNSolver", "ProtocolDefaults", "protocol_defaults"]


@dataclass(frozen=True)
class ProtocolDefaults:
    """Per-benchmark experiment protocol (architecture, schedule, FD step)."""

    arch: str
    iters: int
    rho_divisor: float
    halve_every: int


_DEFAULTS = {
    1: ProtocolDefaults("2-20-20-1", 50000, 4.0, 50000),
    2: ProtocolDefaults("2-20-20-1", 50000, 4.0, 50000),
    3: ProtocolDefaults("2-40-40-1", 100000, 4.0, 50000),
    4: ProtocolDefaults("2-40-40-1", 300000, 4.0, 100000),
    5: ProtocolDefaults("2-60-60-1", 300000, 15.0, 50000),
    6: ProtocolDefaults("3-30-30-1", 100000, 4.0, 50000),
}


def protocol_defaults(problem_id: int) -> ProtocolDefaults:
    return _DEFAULTS[int(problem_id)]


class LSNNSolver(BaseEstimator):
    """Least-squares ReLU network solver for one benchmark problem.

    Parameters left at None fall back to the benchmark's protocol
    defaults (architecture, iteration count, FD step divisor, learning
    rate halving period).
    """

    def __init__(self, problem: int = 1, arch: str | None = None, h: float = 0.01,
                 rho_divisor: float | None = None, iters: int | None = None,
                 halve_every: int | None = None, lr0: float = 0.004,
                 pretrain_restarts: int = 10, pretrain_iters: int = 5000,
                 seed: int = 0, log_every: int = 1000, threads: int = 1):
        self.problem = problem
        self.arch = arch
        self.h = h
        self.rho_divisor = rho_divisor
        self.iters = iters
        self.halve_every = halve_every
        self.lr0 = lr0
        self.pretrain_restarts = pretrain_restarts
        self.pretrain_iters = pretrain_iters
        self.seed = seed
        self.log_every = log_every
        self.threads = threads

    def _resolved(self):
        d = protocol_defaults(self.problem)
        arch = Architecture.parse(self.arch or d.arch)
        rho_div = self.rho_divisor if self.rho_divisor is not None else d.rho_divisor
        iters = self.iters if self.iters is not None else d.iters
        halve = self.halve_every if self.halve_every is not None else d.halve_every
        cfg = TrainConfig(iters=iters, lr0=self.lr0, halve_every=halve,
                          pretrain_restarts=self.pretrain_restarts,
                          pretrain_iters=self.pretrain_iters, seed=self.seed,
                          log_every=self.log_every, threads=self.threads)
        return arch, rho_div, cfg

    def fit(self, X=None, y=None):
        """Train on the collocation mesh; X and y are ignored (sklearn API)."""
        spec = make_benchmark(self.problem)
        arch, rho_div, cfg = self._resolved()
        mesh = build_mesh(spec, self.h)
        rule = FdRule(self.h / rho_div)
        net, history, pre_losses = train(arch, spec, mesh, rule, cfg)
        self.spec_ = spec
        self.mesh_ = mesh
        self.rule_ = rule
        self.net_ = net
        self.history_ = history
        self.pretrain_losses_ = pre_losses
        self.report_ = metrics.evaluate(self._fn, spec, arch, mesh, rule)
        return self

    @property
    def _fn(self):
        return lambda x: forward_batch(self.net_.arch, self.net_.params, np.atleast_2d(x))[0]

    def predict(self, X):
        """Evaluate the trained network at points X of shape (N, dim)."""
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.net_.arch.input_dim:
            raise ValueError(
                f"X has {X.shape[1]} columns, network expects {self.net_.arch.input_dim}"
            )
        return forward_batch(self.net_.arch, self.net_.params, X)[0]

    def score(self, X=None, y=None) -> float:
        """Negative relative L2 error against the exact solution (higher is better)."""
        check_is_fitted(self, "net_")
        return -self.report_.rel_l2

    def loss(self):
        """Final discrete LS functional value."""
        check_is_fitted(self, "net_")
        kern = LossKernel(self.spec_, self.mesh_, self.rule_, threads=self.threads)
        try:
            return kern.loss(self.net_)
        finally:
            kern.close()
