"""Error metrics matching the benchmark report columns.

Three ratios per trained network: relative L2 error, relative graph-norm
error (L2 plus advective-derivative mismatch), and the square-root ratio
of the LS functional with and without data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional import FdRule, QuadratureMesh, discrete_loss
from .network import Architecture, param_count
from .problems import ProblemSpec

__all__ = ["ErrorReport", "relative_l2", "relative_graph_norm", "ls_ratio", "evaluate"]


@dataclass(frozen=True)
class ErrorReport:
    problem_id: int
    arch: Architecture
    rel_l2: float
    rel_graph: float
    ls_ratio: float

    @property
    def params(self) -> int:
        return param_count(self.arch)

    def row(self) -> dict:
        return {
            "problem": self.problem_id,
            "arch": str(self.arch),
            "rel_l2": self.rel_l2,
            "rel_graph": self.rel_graph,
            "ls_ratio": self.ls_ratio,
            "params": self.params,
        }


def relative_l2(v, spec: ProblemSpec, mesh: QuadratureMesh) -> float:
    """||u - v||_0 / ||u||_0 over the interior quadrature nodes."""
    x = mesh.interior
    u = np.asarray(spec.exact(x))
    vv = np.asarray(v(x))
    den = float(np.sum(u * u))
    if den == 0.0:
        raise ZeroDivisionError("exact solution vanishes on the evaluation mesh")
    return float(np.sqrt(np.sum((u - vv) ** 2) / den))


def _stencil_mask(spec: ProblemSpec, x: np.ndarray, rho: float) -> np.ndarray:
    """True where the backward FD stencil stays on one side of the interface.

    Points are dropped when the two stencil endpoints sit on opposite sides
    or either endpoint lies within tau_I = 2*rho of the jump set; the exact
    solution's advective derivative is only defined piecewise.
    """
    b = spec.beta(x)
    nb = np.linalg.norm(b, axis=1)
    back = x - rho * b / nb[:, None]
    tau = 2.0 * rho
    same_side = spec.interface_side(x) == spec.interface_side(back)
    clear = (spec.interface_distance(x) > tau) & (spec.interface_distance(back) > tau)
    return same_side & clear


def relative_graph_norm(v, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule) -> float:
    """Graph-norm error ratio with FD advective derivatives.

    Interior nodes whose stencil straddles the interface are excluded from
    numerator and denominator alike.
    """
    x = mesh.interior
    keep = _stencil_mask(spec, x, rule.rho)
    x = x[keep]
    b = spec.beta(x)
    nb = np.linalg.norm(b, axis=1)
    back = x - rule.rho * b / nb[:, None]

    u, ub = np.asarray(spec.exact(x)), np.asarray(spec.exact(back))
    vv, vb = np.asarray(v(x)), np.asarray(v(back))
    du = nb * (u - ub) / rule.rho
    dv = nb * (vv - vb) / rule.rho
    num = np.sum((u - vv) ** 2) + np.sum((du - dv) ** 2)
    den = np.sum(u * u) + np.sum(du * du)
    if den == 0.0:
        raise ZeroDivisionError("exact solution vanishes on the evaluation mesh")
    return float(np.sqrt(num / den))


def ls_ratio(v, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule) -> float:
    """sqrt(L(v; f, g)) / sqrt(L(v; 0, 0))."""
    num = discrete_loss(v, spec, mesh, rule).total
    den = discrete_loss(v, spec, mesh, rule, f=0.0, g=0.0).total
    if den == 0.0:
        raise ZeroDivisionError("homogeneous functional of v is zero")
    return float(np.sqrt(num / den))


def evaluate(v, spec: ProblemSpec, arch: Architecture, mesh: QuadratureMesh, rule: FdRule) -> ErrorReport:
    """All three metrics in one report."""
    return ErrorReport(
        problem_id=spec.problem_id,
        arch=arch,
        rel_l2=relative_l2(v, spec, mesh),
        rel_graph=relative_graph_norm(v, spec, mesh, rule),
        ls_ratio=ls_ratio(v, spec, mesh, rule),
    )
