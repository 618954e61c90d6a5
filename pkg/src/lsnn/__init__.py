"""Least-squares ReLU network solver for linear advection-reaction equations."""

from .estimator import LSNNSolver, protocol_defaults
from .functional import FdRule, LossBreakdown, QuadratureMesh, build_mesh, discrete_loss, loss_gradient
from .metrics import ErrorReport, evaluate, ls_ratio, relative_graph_norm, relative_l2
from .network import Architecture, NetworkParams, forward, forward_batch, grad_params, init_params, param_count
from .optim import AdamState, TrainConfig, adam_step, lr_schedule, pretrain_select, train
from .persistence import Checkpoint, load_checkpoint, save_checkpoint
from .problems import ProblemSpec, inflow_points, make_benchmark, residual_check

__version__ = "0.1.0"

__all__ = [
    "Architecture", "NetworkParams", "param_count", "init_params", "forward",
    "forward_batch", "grad_params",
    "ProblemSpec", "make_benchmark", "inflow_points", "residual_check",
    "FdRule", "LossBreakdown", "QuadratureMesh", "build_mesh", "discrete_loss", "loss_gradient",
    "AdamState", "TrainConfig", "lr_schedule", "adam_step", "pretrain_select", "train",
    "ErrorReport", "relative_l2", "relative_graph_norm", "ls_ratio", "evaluate",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
    "LSNNSolver", "protocol_defaults",
    "__version__",
]
