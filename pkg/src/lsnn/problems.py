"""Benchmark advection-reaction problems on the unit square/cube.

Each problem instance bundles the advective velocity field, reaction
coefficient, source, inflow data, and the closed-form solution, all as
vectorized callables over (N, dim) point arrays.  All closed forms are
defined on all of R^dim so finite-difference stencils may step slightly
outside the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ProblemSpec", "InflowPoint", "make_benchmark", "inflow_points", "residual_check"]

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ProblemSpec:
    """One advection-reaction benchmark: u_beta + gamma*u = f, u = g on the inflow boundary."""

    problem_id: int
    dim: int
    beta: Callable  # (N, dim) -> (N, dim)
    gamma: Callable  # (N, dim) -> (N,)
    f: Callable  # (N, dim) -> (N,)
    g: Callable  # (N, dim) boundary points -> (N,)
    exact: Callable  # (N, dim) -> (N,)
    interface_distance: Callable  # (N, dim) -> (N,) approximate distance to the jump set
    interface_side: Callable  # (N, dim) -> (N,) integer subdomain label
    name: str = ""


@dataclass(frozen=True)
class InflowPoint:
    """A boundary quadrature point on the inflow part of the boundary."""

    location: np.ndarray
    normal: np.ndarray
    weight_factor: float  # |beta . n| at the location


def _pts(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    return x


def _const_gamma(x):
    return np.ones(len(_pts(x)))


def _make_p1():
    def beta(x):
        x = _pts(x)
        b = np.zeros_like(x)
        b[:, 1] = 1.0
        return b

    def f(x):
        return np.ones(len(_pts(x)))

    def g(x):
        x = _pts(x)
        return np.where(x[:, 0] < 0.5, 1.0, 2.0)

    def exact(x):
        x = _pts(x)
        return np.where(x[:, 0] < 0.5, 1.0, 1.0 + np.exp(-x[:, 1]))

    def iface_dist(x):
        return np.abs(_pts(x)[:, 0] - 0.5)

    def iface_side(x):
        return np.where(_pts(x)[:, 0] < 0.5, 1, 2)

    return ProblemSpec(1, 2, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="constant advection, constant left state")


def _make_p2():
    def beta(x):
        x = _pts(x)
        b = np.zeros_like(x)
        b[:, 1] = 1.0
        return b

    def f(x):
        return np.ones(len(_pts(x)))

    def g(x):
        x = _pts(x)
        return np.where(x[:, 0] < 0.5, 0.0, 2.0)

    def exact(x):
        x = _pts(x)
        return np.where(x[:, 0] < 0.5, 1.0 - np.exp(-x[:, 1]), 1.0 + np.exp(-x[:, 1]))

    def iface_dist(x):
        return np.abs(_pts(x)[:, 0] - 0.5)

    def iface_side(x):
        return np.where(_pts(x)[:, 0] < 0.5, 1, 2)

    return ProblemSpec(2, 2, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="constant advection, two smooth states")


def _make_p3():
    def beta(x):
        x = _pts(x)
        b = np.zeros_like(x)
        b[:, 1] = 1.0
        return b

    def f(x):
        return np.ones(len(_pts(x)))

    def g(x):
        x = _pts(x)
        return np.where(x[:, 0] < 0.5, 1.0 - np.sin(2.0 * np.pi * x[:, 0]), 2.5 - x[:, 0])

    def exact(x):
        x = _pts(x)
        ey = np.exp(-x[:, 1])
        return np.where(
            x[:, 0] < 0.5,
            1.0 - np.sin(2.0 * np.pi * x[:, 0]) * ey,
            1.0 + (1.5 - x[:, 0]) * ey,
        )

    def iface_dist(x):
        return np.abs(_pts(x)[:, 0] - 0.5)

    def iface_side(x):
        return np.where(_pts(x)[:, 0] < 0.5, 1, 2)

    return ProblemSpec(3, 2, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="constant advection, piecewise smooth inflow")


def _make_p4():
    # Upsilon_1 = {y >= x} gets beta = (-1, sqrt(2)-1); Upsilon_2 = {y < x}
    # gets beta = (1-sqrt(2), 1).  Points exactly on y = x take the
    # Upsilon_1 value.
    def beta(x):
        x = _pts(x)
        up1 = x[:, 1] >= x[:, 0]
        b = np.empty_like(x)
        b[up1, 0] = -1.0
        b[up1, 1] = SQRT2 - 1.0
        b[~up1, 0] = 1.0 - SQRT2
        b[~up1, 1] = 1.0
        return b

    def f(x):
        return np.zeros(len(_pts(x)))

    def g(x):
        x = _pts(x)
        # inflow facets are {y=0} and {x=1}
        on_bottom = x[:, 1] <= 1e-12
        return np.where(
            on_bottom,
            x[:, 0] * np.exp(x[:, 0] / (SQRT2 - 1.0)),
            (11.0 + (SQRT2 - 1.0) * x[:, 1]) * np.exp(1.0 / (SQRT2 - 1.0)),
        )

    def exact(x):
        x = _pts(x)
        xx, yy = x[:, 0], x[:, 1]
        up1 = yy >= xx
        below11 = yy < (1.0 - SQRT2) * xx + 1.0
        below21 = yy < (xx - 1.0) / (1.0 - SQRT2)
        e1 = np.exp(SQRT2 * xx + yy)
        e2 = np.exp(xx / (SQRT2 - 1.0))
        v11 = (yy + (SQRT2 - 1.0) * xx) * e1
        v12 = (yy + (SQRT2 - 1.0) * xx + 10.0) * e1
        v21 = (xx + (SQRT2 - 1.0) * yy) * e2
        v22 = (xx + (SQRT2 - 1.0) * yy + 10.0) * e2
        return np.where(up1, np.where(below11, v11, v12), np.where(below21, v21, v22))

    def iface_dist(x):
        # interface: segment from (1,0) to (1/sqrt2,1/sqrt2) in Upsilon_2,
        # then from there to (0,1) in Upsilon_1; both lines have unit-normal
        # distance |y - (1-sqrt2)x - 1|/sqrt(1+(sqrt2-1)^2) etc.
        x = _pts(x)
        xx, yy = x[:, 0], x[:, 1]
        d1 = np.abs(yy - (1.0 - SQRT2) * xx - 1.0) / np.sqrt(1.0 + (SQRT2 - 1.0) ** 2)
        d2 = np.abs(yy - (xx - 1.0) / (1.0 - SQRT2)) / np.sqrt(1.0 + (SQRT2 + 1.0) ** 2)
        return np.where(yy >= xx, d1, d2)

    def iface_side(x):
        x = _pts(x)
        xx, yy = x[:, 0], x[:, 1]
        inner = np.where(yy >= xx, yy < (1.0 - SQRT2) * xx + 1.0, yy < (xx - 1.0) / (1.0 - SQRT2))
        return np.where(inner, 1, 2)

    return ProblemSpec(4, 2, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="piecewise constant advection, bent interface")


def _make_p5():
    def beta(x):
        x = _pts(x)
        b = np.empty_like(x)
        b[:, 0] = 1.0
        b[:, 1] = 2.0 * x[:, 0]
        return b

    def f(x):
        return np.zeros(len(_pts(x)))

    def g(x):
        x = _pts(x)
        on_left_upper = (x[:, 0] <= 0.0) & (x[:, 1] >= 0.2)
        return np.where(
            on_left_upper,
            x[:, 1] + 2.0,
            (x[:, 1] - x[:, 0] ** 2) * np.exp(-x[:, 0]),
        )

    def exact(x):
        x = _pts(x)
        xx, yy = x[:, 0], x[:, 1]
        ex = np.exp(-xx)
        return np.where(yy < xx ** 2 + 0.2, (yy - xx ** 2) * ex, (yy - xx ** 2 + 2.0) * ex)

    def iface_dist(x):
        # normal distance to the parabola y = x^2 + 1/5, first order
        x = _pts(x)
        xx, yy = x[:, 0], x[:, 1]
        return np.abs(yy - xx ** 2 - 0.2) / np.sqrt(1.0 + 4.0 * xx ** 2)

    def iface_side(x):
        x = _pts(x)
        return np.where(x[:, 1] < x[:, 0] ** 2 + 0.2, 1, 2)

    return ProblemSpec(5, 2, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="variable advection, curved interface")


def _make_p6():
    def beta(x):
        x = _pts(x)
        b = np.zeros_like(x)
        b[:, 0] = 1.0
        return b

    def f(x):
        return np.ones(len(_pts(x)))

    def g(x):
        x = _pts(x)
        return np.where(x[:, 1] < 0.5, 1.0 - 4.0 * x[:, 1], 5.0 - 4.0 * x[:, 1])

    def exact(x):
        x = _pts(x)
        ex = np.exp(-x[:, 0])
        return np.where(
            x[:, 1] < 0.5,
            1.0 - 4.0 * x[:, 1] * ex,
            1.0 + (4.0 - 4.0 * x[:, 1]) * ex,
        )

    def iface_dist(x):
        return np.abs(_pts(x)[:, 1] - 0.5)

    def iface_side(x):
        return np.where(_pts(x)[:, 1] < 0.5, 1, 2)

    return ProblemSpec(6, 3, beta, _const_gamma, f, g, exact, iface_dist, iface_side,
                       name="3-D constant advection")


_FACTORIES = {1: _make_p1, 2: _make_p2, 3: _make_p3, 4: _make_p4, 5: _make_p5, 6: _make_p6}


def make_benchmark(problem_id: int) -> ProblemSpec:
    """Return benchmark 1..6."""
    try:
        return _FACTORIES[int(problem_id)]()
    except KeyError:
        raise ValueError(f"unknown benchmark id {problem_id!r}; valid ids are 1..6") from None


def inflow_points(spec: ProblemSpec, h: float) -> list:
    """Face midpoints of the uniform boundary partition where beta.n < 0.

    The boundary of (0,1)^dim is split per facet into (dim-1)-faces of size
    h^(dim-1); the midpoint of each face is kept iff beta.n < 0 there.
    """
    n = _cells(h)
    d = spec.dim
    mids = (np.arange(n) + 0.5) * h
    out = []
    for axis in range(d):
        for side in (0.0, 1.0):
            normal = np.zeros(d)
            normal[axis] = -1.0 if side == 0.0 else 1.0
            grids = np.meshgrid(*([mids] * (d - 1)), indexing="ij")
            face = np.stack([g.ravel() for g in grids], axis=-1) if d > 1 else np.zeros((1, 0))
            locs = np.empty((len(face), d))
            other = [a for a in range(d) if a != axis]
            locs[:, axis] = side
            for j, a in enumerate(other):
                locs[:, a] = face[:, j]
            bn = spec.beta(locs) @ normal
            for loc, val in zip(locs, bn):
                if val < 0.0:
                    out.append(InflowPoint(loc.copy(), normal.copy(), float(-val)))
    return out


def _cells(h: float) -> int:
    n = 1.0 / h
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h={h}")
    return int(round(n))


def residual_check(spec: ProblemSpec, x, rho: float) -> float:
    """|D_rho u(x) + gamma*u - f| for the exact solution; O(rho) away from the interface.

    Raises if the backward stencil straddles the discontinuity interface.
    """
    x = _pts(x)
    b = spec.beta(x)
    nb = np.linalg.norm(b, axis=1)
    back = x - rho * b / nb[:, None]
    if np.any(spec.interface_side(x) != spec.interface_side(back)):
        raise ValueError("finite-difference stencil straddles the interface")
    ux = spec.exact(x)
    d_rho = nb * (ux - spec.exact(back)) / rho
    res = np.abs(d_rho + spec.gamma(x) * ux - spec.f(x))
    return float(res[0]) if len(res) == 1 else res
