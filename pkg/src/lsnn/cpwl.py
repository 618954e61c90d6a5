"""Analytic CPWL approximants of a discontinuous cylinder cap, and their norms.

On the strip (0,1) x (0, eps1), a step of height 1 across the vertical
line x = x0 is approximated by a width-2*eps2 linear ramp, and the
sloped cap d*y on the left side by a two-term ReLU wedge.  The squared
L2 distances have closed forms, which are cross-checked here against
composite-midpoint quadrature, along with the graph-norm bound
sqrt(eps1^3/24 + B^2/4) * |d| * sqrt(eps1*eps2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Architecture, NetworkParams

__all__ = [
    "CpwlParams",
    "eval_p0",
    "eval_p0_mirrored",
    "eval_p1",
    "eval_b",
    "p0_network",
    "p1_network",
    "norm_b_minus_p1_sq",
    "norm_chi0_minus_p0",
    "verify_lemma_bound",
    "tile_p",
]


@dataclass(frozen=True)
class CpwlParams:
    """Strip geometry and ramp parameters for the CPWL approximants."""

    x0: float
    eps1: float
    eps2: float
    d: float
    B: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.x0 < 1.0):
            raise ValueError(f"x0 must lie in (0,1), got {self.x0}")
        if self.eps1 < 0.0 or self.eps2 <= 0.0:
            raise ValueError("eps1 must be >= 0 and eps2 > 0")
        if self.eps2 >= min(self.x0, 1.0 - self.x0):
            raise ValueError("eps2 must be < min(x0, 1-x0)")

    @property
    def c(self) -> float:
        return self.d / (2.0 * self.eps2)

    @property
    def w1(self) -> np.ndarray:
        return np.array([-1.0, -self.eps2])

    @property
    def w2(self) -> np.ndarray:
        return np.array([-1.0, self.eps2])


def _xy(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    return x[:, 0], x[:, 1]


def eval_p0(x, p: CpwlParams):
    """Literal ramp (sigma(x-x0+eps2) - sigma(x-x0-eps2)) / (2*eps2); 1 on the x > x0 side."""
    xx, _ = _xy(x)
    val = (np.maximum(xx - p.x0 + p.eps2, 0.0) - np.maximum(xx - p.x0 - p.eps2, 0.0)) / (2.0 * p.eps2)
    return val if val.size > 1 else float(val[0])


def eval_p0_mirrored(x, p: CpwlParams):
    """Ramp reflected about x = x0; 1 on the x < x0 side, matching the step it approximates."""
    xx, yy = _xy(x)
    m = np.column_stack([2.0 * p.x0 - xx, yy])
    return eval_p0(m, p)


def eval_p1(x, p: CpwlParams):
    """Two-ReLU wedge -c*sigma(w1.x + x0) + c*sigma(w2.x + x0); equals d*y deep inside x < x0."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    val = -p.c * np.maximum(x @ p.w1 + p.x0, 0.0) + p.c * np.maximum(x @ p.w2 + p.x0, 0.0)
    return float(val[0]) if single else val


def eval_b(x, p: CpwlParams):
    """Discontinuous cap: d*y for x < x0, zero for x >= x0."""
    xx, yy = _xy(x)
    val = np.where(xx < p.x0, p.d * yy, 0.0)
    return val if val.size > 1 else float(val[0])


def p0_network(p: CpwlParams, mirrored: bool = False) -> NetworkParams:
    """The ramp as an explicit 2-2-1 ReLU network (z = W x - b convention)."""
    s = -1.0 if mirrored else 1.0
    # mirrored: sigma(x0 - x + eps2) - sigma(x0 - x - eps2), same scale
    w_row = [s, 0.0]
    b1 = [s * p.x0 - p.eps2, s * p.x0 + p.eps2]
    buf = np.array(
        w_row + w_row  # first-layer weights, row-major
        + b1  # first-layer biases
        + [1.0 / (2.0 * p.eps2), -1.0 / (2.0 * p.eps2)]  # output weights
        + [0.0]  # output bias
    )
    return NetworkParams(Architecture((2, 2, 1)), buf)


def p1_network(p: CpwlParams) -> NetworkParams:
    """The wedge as an explicit 2-2-1 ReLU network."""
    buf = np.array(
        list(p.w1) + list(p.w2)
        + [-p.x0, -p.x0]
        + [-p.c, p.c]
        + [0.0]
    )
    return NetworkParams(Architecture((2, 2, 1)), buf)


def _midpoint_grid(p: CpwlParams, quad_n: int):
    """Composite-midpoint nodes and cell area on (0,1) x (0, eps1)."""
    xs = (np.arange(quad_n) + 0.5) / quad_n
    ys = (np.arange(quad_n) + 0.5) * (p.eps1 / quad_n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return pts, (1.0 / quad_n) * (p.eps1 / quad_n)


def norm_b_minus_p1_sq(p: CpwlParams, quad_n: int = 512):
    """(numeric, closed_form) for ||b - p1||^2 over the strip; closed form d^2*eps1^4*eps2/24.

    The integrand kinks along x = x0 and x = x0 -+ eps2*y, so each row of
    the midpoint rule is split at those abscissas; cells then never
    straddle a kink and the rule converges at full rate.
    """
    if quad_n < 64:
        raise ValueError("quad_n must be at least 64")
    n = quad_n
    m = max(n // 4, 16)
    ys = (np.arange(n) + 0.5) * (p.eps1 / n)
    wy = p.eps1 / n
    numeric = 0.0
    offsets = (np.arange(m) + 0.5) / m
    for y in ys:
        knots = np.array([0.0, p.x0 - p.eps2 * y, p.x0, p.x0 + p.eps2 * y, 1.0])
        row = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            xs = a + offsets * (b - a)
            pts = np.column_stack([xs, np.full(m, y)])
            diff = eval_b(pts, p) - eval_p1(pts, p)
            row += np.sum(diff * diff) * (b - a) / m
        numeric += row * wy
    closed = p.d ** 2 * p.eps1 ** 4 * p.eps2 / 24.0
    return float(numeric), closed


def norm_chi0_minus_p0(p: CpwlParams, quad_n: int = 1024):
    """(numeric, closed_form) for ||chi0 - p0||_0 with the mirrored ramp; closed form sqrt(eps1*eps2/6).

    chi0 is the unit step that is 1 for x < x0; the mirrored ramp has the
    matching orientation, which is what reproduces the closed form.
    """
    if quad_n < 64:
        raise ValueError("quad_n must be at least 64")
    pts, area = _midpoint_grid(p, quad_n)
    chi0 = np.where(pts[:, 0] < p.x0, 1.0, 0.0)
    diff = chi0 - eval_p0_mirrored(pts, p)
    numeric = float(np.sqrt(np.sum(diff * diff) * area))
    closed = float(np.sqrt(p.eps1 * p.eps2 / 6.0))
    return numeric, closed


def _beta_derivatives(pts: np.ndarray, p: CpwlParams, v2):
    """Exact advective derivatives of b and p1 for beta = (0, v2(x))."""
    xx, yy = pts[:, 0], pts[:, 1]
    v = v2(pts) if callable(v2) else np.full(len(pts), float(v2))
    b_beta = np.where(xx < p.x0, p.d * v, 0.0)
    act1 = (pts @ p.w1 + p.x0) > 0.0
    act2 = (pts @ p.w2 + p.x0) > 0.0
    # w1.beta = -eps2*v2, w2.beta = eps2*v2
    p1_beta = p.c * p.eps2 * v * (act1.astype(float) + act2.astype(float))
    return b_beta, p1_beta


def verify_lemma_bound(p: CpwlParams, quad_n: int = 512, v2=None):
    """Numeric graph-norm distance of (b, p1) against the closed-form bound.

    Returns (lhs, rhs, holds).  v2 defaults to the constant worst case B.
    """
    if v2 is None:
        v2 = p.B
    pts, area = _midpoint_grid(p, quad_n)
    l2_sq, _ = norm_b_minus_p1_sq(p, quad_n)
    b_beta, p1_beta = _beta_derivatives(pts, p, v2)
    deriv_sq = float(np.sum((b_beta - p1_beta) ** 2) * area)
    lhs = float(np.sqrt(l2_sq + deriv_sq))
    rhs = float(np.sqrt(p.eps1 ** 3 / 24.0 + p.B ** 2 / 4.0) * abs(p.d) * np.sqrt(p.eps1 * p.eps2))
    return lhs, rhs, lhs <= rhs * (1.0 + 1e-6)


def tile_p(p_list, m: int, amplitudes=None):
    """Stack strip approximants over (0,1) x (j/m, (j+1)/m); returns a callable on (0,1)^2.

    Strip j evaluates amp_j * mirrored-ramp + wedge in strip-local
    coordinates (x, y - j/m).  amplitudes defaults to 1 per strip; pass
    the jump heights at the strip bases when approximating a function
    whose jump is not unit height.
    """
    p_list = list(p_list)
    if len(p_list) != m:
        raise ValueError(f"expected {m} strip parameter sets, got {len(p_list)}")
    if amplitudes is None:
        amplitudes = np.ones(m)
    amplitudes = np.asarray(amplitudes, dtype=np.float64)

    def evaluate(x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x.reshape(1, -1)
        j = np.clip((x[:, 1] * m).astype(int), 0, m - 1)
        out = np.empty(len(x))
        for jj in range(m):
            sel = j == jj
            if not np.any(sel):
                continue
            pj = p_list[jj]
            local = np.column_stack([x[sel, 0], x[sel, 1] - jj / m])
            out[sel] = amplitudes[jj] * np.atleast_1d(eval_p0_mirrored(local, pj)) \
                + np.atleast_1d(eval_p1(local, pj))
        return float(out[0]) if single else out

    return evaluate
