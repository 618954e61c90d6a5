"""Breaking-hyperplane extraction for partition plots.

First-layer units give genuine lines w.x - b = 0, clipped to the unit
square algebraically.  Second-layer units have continuous piecewise
linear pre-activations; their zero sets are traced by marching squares
with linear interpolation on a regular sampling grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import NetworkParams, split_params

__all__ = ["Polyline", "first_layer_lines", "second_layer_polylines"]


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray  # (k, 2)
    layer: int
    unit_index: int


def _clip_line_to_square(w: np.ndarray, b: float):
    """Intersection segment of {w.x = b} with [0,1]^2, or None."""
    pts = []
    wx, wy = w
    # intersections with the four edges
    for x_fixed in (0.0, 1.0):
        if wy != 0.0:
            y = (b - wx * x_fixed) / wy
            if 0.0 <= y <= 1.0:
                pts.append((x_fixed, y))
    for y_fixed in (0.0, 1.0):
        if wx != 0.0:
            x = (b - wy * y_fixed) / wx
            if 0.0 <= x <= 1.0:
                pts.append((x, y_fixed))
    # dedupe corners hit twice
    uniq = []
    for p in pts:
        if not any(abs(p[0] - q[0]) < 1e-12 and abs(p[1] - q[1]) < 1e-12 for q in uniq):
            uniq.append(p)
    if len(uniq) < 2:
        return None
    uniq.sort()
    return np.array([uniq[0], uniq[-1]])


def first_layer_lines(net: NetworkParams, slice_z: float | None = None) -> list:
    """Exact first-layer breaking lines clipped to the unit square.

    For 3-D networks, slice_z restricts each hyperplane to the plane
    z = slice_z before clipping.
    """
    d = net.arch.input_dim
    if d == 3 and slice_z is None:
        raise ValueError("3-D network: a slice plane (slice_z) is required")
    if d not in (2, 3):
        raise ValueError(f"plot plane extraction supports dim 2 or 3, got {d}")
    w1, b1 = split_params(net.arch, net.params)[0]
    out = []
    for i in range(w1.shape[0]):
        w = w1[i]
        b = b1[i]
        if d == 3:
            b = b - w[2] * slice_z
            w = w[:2]
        if np.all(w == 0.0):
            continue  # degenerate unit: no line (whole plane if b == 0)
        seg = _clip_line_to_square(w, b)
        if seg is not None:
            out.append(Polyline(seg, layer=1, unit_index=i))
    return out


def _second_layer_field(net: NetworkParams, unit: int, xy: np.ndarray, slice_z: float | None):
    """Pre-activation of one second-layer unit at 2-D sample points."""
    layers = split_params(net.arch, net.params)
    (w1, b1), (w2, b2) = layers[0], layers[1]
    if net.arch.input_dim == 3:
        pts = np.column_stack([xy, np.full(len(xy), slice_z)])
    else:
        pts = xy
    a1 = np.maximum(pts @ w1.T - b1, 0.0)
    return a1 @ w2[unit] - b2[unit]


def _marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Zero-level segments of a sampled scalar field; values shape (nx, ny)."""
    segs = []
    nx, ny = values.shape
    for i in range(nx - 1):
        for j in range(ny - 1):
            corners = [
                (values[i, j], xs[i], ys[j]),
                (values[i + 1, j], xs[i + 1], ys[j]),
                (values[i + 1, j + 1], xs[i + 1], ys[j + 1]),
                (values[i, j + 1], xs[i], ys[j + 1]),
            ]
            crossings = []
            for k in range(4):
                v0, x0, y0 = corners[k]
                v1, x1, y1 = corners[(k + 1) % 4]
                if (v0 < 0.0) != (v1 < 0.0):
                    t = v0 / (v0 - v1)
                    crossings.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
            if len(crossings) == 2:
                segs.append((crossings[0], crossings[1]))
            elif len(crossings) == 4:
                # saddle cell: pair edge crossings in order (0-1, 2-3)
                segs.append((crossings[0], crossings[1]))
                segs.append((crossings[2], crossings[3]))
    return segs


def _stitch(segs, tol=1e-9):
    """Chain segments sharing endpoints into polylines, deterministically."""
    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    adj = {}
    for si, (a, b) in enumerate(segs):
        adj.setdefault(key(a), []).append((si, 0))
        adj.setdefault(key(b), []).append((si, 1))
    used = [False] * len(segs)
    chains = []
    for si in range(len(segs)):
        if used[si]:
            continue
        used[si] = True
        chain = [segs[si][0], segs[si][1]]
        # grow forward then backward
        for end in (1, 0):
            while True:
                k = key(chain[-1] if end == 1 else chain[0])
                nxt = next(((sj, e) for sj, e in adj.get(k, []) if not used[sj]), None)
                if nxt is None:
                    break
                sj, e = nxt
                used[sj] = True
                new_pt = segs[sj][1 - e]
                if end == 1:
                    chain.append(new_pt)
                else:
                    chain.insert(0, new_pt)
        chains.append(np.array(chain))
    return chains


def second_layer_polylines(net: NetworkParams, grid_n: int = 64, slice_z: float | None = None) -> list:
    """Traced zero sets of all second-layer pre-activations on [0,1]^2."""
    if net.arch.n_hidden_layers < 2:
        raise ValueError("network has no second hidden layer")
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    if net.arch.input_dim == 3 and slice_z is None:
        raise ValueError("3-D network: a slice plane (slice_z) is required")
    xs = np.linspace(0.0, 1.0, grid_n + 1)
    ys = np.linspace(0.0, 1.0, grid_n + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    xy = np.column_stack([gx.ravel(), gy.ravel()])
    out = []
    n2 = net.arch.dims[2]
    for unit in range(n2):
        field = _second_layer_field(net, unit, xy, slice_z).reshape(grid_n + 1, grid_n + 1)
        segs = _marching_squares(field, xs, ys)
        for chain in _stitch(segs):
            out.append(Polyline(chain, layer=2, unit_index=unit))
    return out
