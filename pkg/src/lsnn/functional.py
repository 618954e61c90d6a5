"""Discrete least-squares functional on a uniform collocation mesh.

Interior quadrature sits at the strict-interior grid nodes with weight
h^dim (lexicographic order by grid index); inflow quadrature at boundary
face midpoints with weight h^(dim-1)*|beta.n|.  The advective derivative
is the backward finite-difference quotient |beta|(v(x)-v(x-rho*beta/|beta|))/rho.

All point sums are evaluated block-wise (fixed block size) and merged by
a pairwise tree in fixed block order, so losses and gradients are
bit-identical regardless of the number of worker threads.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .network import Architecture, NetworkParams, split_params
from .problems import ProblemSpec, inflow_points

__all__ = [
    "FdRule",
    "LossBreakdown",
    "QuadratureMesh",
    "build_mesh",
    "directional_derivative_fd",
    "discrete_loss",
    "loss_gradient",
    "LossKernel",
]

BLOCK = 2048  # interior nodes per block; the fused pass batches 2*BLOCK rows


@dataclass(frozen=True)
class FdRule:
    """Backward finite-difference step for the advective derivative."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class LossBreakdown:
    """Interior residual term, inflow mismatch term, and their sum."""

    interior_term: float
    boundary_term: float

    @property
    def total(self) -> float:
        return self.interior_term + self.boundary_term


@dataclass(frozen=True)
class QuadratureMesh:
    """Interior grid nodes plus weighted inflow boundary midpoints."""

    h: float
    dim: int
    interior: np.ndarray  # (N, dim), lexicographic by grid index
    interior_weight: float  # h^dim, shared by all interior nodes
    inflow: np.ndarray  # (M, dim) face midpoints
    inflow_weights: np.ndarray  # (M,) h^(dim-1) * |beta.n|


def build_mesh(spec: ProblemSpec, h: float) -> QuadratureMesh:
    """Uniform mesh for one problem: 1/h must be an integer."""
    n = 1.0 / h
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"1/h must be an integer, got h={h}")
    n = int(round(n))
    d = spec.dim
    axis = np.arange(1, n) * h
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    interior = np.stack([g.ravel() for g in grids], axis=-1)
    pts = inflow_points(spec, h)
    if pts:
        inflow = np.stack([p.location for p in pts])
        weights = np.array([p.weight_factor for p in pts]) * h ** (d - 1)
    else:
        inflow = np.zeros((0, d))
        weights = np.zeros(0)
    return QuadratureMesh(h, d, interior, h ** d, inflow, weights)


def directional_derivative_fd(v, x, beta_at_x, rho: float):
    """|beta| * (v(x) - v(x - rho*beta/|beta|)) / rho at one point or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, -1)
    b = np.asarray(beta_at_x, dtype=np.float64)
    if b.ndim == 1:
        b = np.broadcast_to(b, x.shape)
    nb = np.linalg.norm(b, axis=1)
    if np.any(nb == 0.0):
        raise ValueError("advection vector must be nonzero")
    back = x - rho * b / nb[:, None]
    out = nb * (np.asarray(v(x)) - np.asarray(v(back))) / rho
    return float(out[0]) if single else out


def _tree_merge(parts: list):
    """Pairwise reduction in fixed order; deterministic for any worker count."""
    parts = list(parts)
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i]
                 for i in range(0, len(parts), 2)]
    return parts[0] if parts else 0.0


class _Workspace:
    """Reusable per-thread buffers for the fused forward/backward pass."""

    def __init__(self, arch: Architecture, rows: int):
        hidden = arch.dims[1:-1]
        self.z = [np.empty((rows, n)) for n in hidden]
        self.a = [np.empty((rows, n)) for n in hidden]
        self.delta = [np.empty((rows, n)) for n in hidden]


class LossKernel:
    """Precomputed quadrature data for repeated loss/gradient evaluation.

    Each interior block evaluates its grid nodes and their backward
    stencil points in one batch, accumulating loss and gradient in a
    single pass; boundary blocks do the same for the inflow mismatch.
    """

    def __init__(self, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule, threads: int = 1):
        if mesh.dim != spec.dim:
            raise ValueError("mesh dimension does not match problem dimension")
        self.spec = spec
        self.mesh = mesh
        self.rule = rule
        self.threads = max(1, int(threads))

        xi = mesh.interior
        b = spec.beta(xi)
        nb = np.linalg.norm(b, axis=1)
        back = xi - rule.rho * b / nb[:, None]
        gam = spec.gamma(xi)
        f = spec.f(xi)
        coef_here = nb / rule.rho + gam
        coef_back = -nb / rule.rho
        self.n_int = len(xi)
        self.w_int = mesh.interior_weight
        self.g = spec.g(mesh.inflow) if len(mesh.inflow) else np.zeros(0)
        self.w_bnd = mesh.inflow_weights
        self.points = np.concatenate([xi, back, mesh.inflow], axis=0)

        # per-block contiguous batches: interior blocks carry (node, stencil)
        # rows stacked, boundary blocks carry face midpoints
        self._int_blocks = []
        for i in range(0, len(xi), BLOCK):
            j = min(i + BLOCK, len(xi))
            self._int_blocks.append({
                "x": np.ascontiguousarray(np.concatenate([xi[i:j], back[i:j]])),
                "ch": coef_here[i:j].copy(),
                "cb": coef_back[i:j].copy(),
                "f": f[i:j].copy(),
            })
        self._bnd_blocks = []
        for i in range(0, len(mesh.inflow), 2 * BLOCK):
            j = min(i + 2 * BLOCK, len(mesh.inflow))
            self._bnd_blocks.append({
                "x": np.ascontiguousarray(mesh.inflow[i:j]),
                "g": self.g[i:j].copy(),
                "w": self.w_bnd[i:j].copy(),
            })
        self._pool = None
        self._tls = threading.local()

    # -- batching helpers ---------------------------------------------------

    def _ws(self, arch: Architecture) -> _Workspace:
        rows = 2 * BLOCK
        ws = getattr(self._tls, "ws", None)
        if ws is None or ws.z[0].shape[0] < rows or [b.shape[1] for b in ws.z] != list(arch.dims[1:-1]):
            ws = _Workspace(arch, rows)
            self._tls.ws = ws
        return ws

    def _map(self, fn, tasks):
        if self.threads == 1 or len(tasks) <= 1:
            return [fn(t) for t in tasks]
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        return list(self._pool.map(fn, tasks))

    def _forward_block(self, layers, x, ws):
        """Fused forward; returns (values, hidden activations list)."""
        m = len(x)
        a = x
        zs = []
        for l, (w, b) in enumerate(layers[:-1]):
            z = np.dot(a, w.T, out=ws.z[l][:m])
            z -= b
            zs.append(z)
            a = np.maximum(z, 0.0, out=ws.a[l][:m])
        w, b = layers[-1]
        return np.dot(a, w[0]) - b[0], zs

    def _backward_block(self, layers, x, zs, cot, ws, grad_out):
        """Accumulate the VJP for one block into grad_out (flat)."""
        m = len(x)
        acts = [x] + [ws.a[l][:m] for l in range(len(zs))]
        gl = split_params_grad(grad_out, layers)
        # output layer
        w_last, _ = layers[-1]
        gw, gb = gl[-1]
        gw[0] += cot @ acts[-1]
        gb[0] -= cot.sum()
        delta = None
        for l in range(len(zs) - 1, -1, -1):
            if delta is None:
                d = np.multiply(cot[:, None], w_last, out=ws.delta[l][:m])
            else:
                w_up, _ = layers[l + 1]
                d = np.dot(delta, w_up, out=ws.delta[l][:m])
            d *= zs[l] > 0.0
            gw, gb = gl[l]
            gw += d.T @ acts[l]
            gb -= d.sum(axis=0)
            delta = d
        return grad_out

    # -- public evaluation --------------------------------------------------

    def loss(self, net: NetworkParams) -> LossBreakdown:
        return self._evaluate(net, want_grad=False)[0]

    def loss_and_grad(self, net: NetworkParams):
        """One full-batch evaluation: (LossBreakdown, flat gradient)."""
        return self._evaluate(net, want_grad=True)

    def _evaluate(self, net: NetworkParams, want_grad: bool):
        arch, params = net.arch, net.params
        layers = split_params(arch, params)

        def run_int(blk):
            ws = self._ws(arch)
            v, zs = self._forward_block(layers, blk["x"], ws)
            m = len(blk["f"])
            r = blk["ch"] * v[:m] + blk["cb"] * v[m:] - blk["f"]
            part = self.w_int * float(np.sum(r * r))
            if not want_grad:
                return part, None
            cot = np.empty(2 * m)
            cot[:m] = (2.0 * self.w_int) * r * blk["ch"]
            cot[m:] = (2.0 * self.w_int) * r * blk["cb"]
            grad = np.zeros_like(params)
            self._backward_block(layers, blk["x"], zs, cot, ws, grad)
            return part, grad

        def run_bnd(blk):
            ws = self._ws(arch)
            v, zs = self._forward_block(layers, blk["x"], ws)
            db = v - blk["g"]
            part = float(np.sum(blk["w"] * db * db))
            if not want_grad:
                return part, None
            cot = 2.0 * blk["w"] * db
            grad = np.zeros_like(params)
            self._backward_block(layers, blk["x"], zs, cot, ws, grad)
            return part, grad

        res_int = self._map(run_int, self._int_blocks)
        res_bnd = self._map(run_bnd, self._bnd_blocks)
        bd = LossBreakdown(_tree_merge([p for p, _ in res_int]),
                           _tree_merge([p for p, _ in res_bnd]))
        if not want_grad:
            return bd, None
        grad = _tree_merge([g for _, g in res_int] + [g for _, g in res_bnd])
        return bd, grad

    def loss_of_callable(self, v) -> LossBreakdown:
        """Loss of an arbitrary vectorized function evaluated on the stacked points."""
        values = np.asarray(v(self.points), dtype=np.float64)
        n = self.n_int
        v1, v2, vb = values[:n], values[n : 2 * n], values[2 * n :]
        int_parts = []
        off = 0
        for blk in self._int_blocks:
            m = len(blk["f"])
            r = blk["ch"] * v1[off : off + m] + blk["cb"] * v2[off : off + m] - blk["f"]
            int_parts.append(self.w_int * float(np.sum(r * r)))
            off += m
        bnd_parts = []
        off = 0
        for blk in self._bnd_blocks:
            m = len(blk["g"])
            db = vb[off : off + m] - blk["g"]
            bnd_parts.append(float(np.sum(blk["w"] * db * db)))
            off += m
        return LossBreakdown(_tree_merge(int_parts), _tree_merge(bnd_parts))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def split_params_grad(grad: np.ndarray, layers) -> list:
    """Views of a flat gradient buffer matching a split_params layer list."""
    out = []
    off = 0
    for w, b in layers:
        n = w.size
        out.append((grad[off : off + n].reshape(w.shape), grad[off + n : off + n + b.size]))
        off += n + b.size
    return out


def discrete_loss(v, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule,
                  f=None, g=None, threads: int = 1) -> LossBreakdown:
    """Discrete LS functional of a vectorized callable v.

    f and g override the problem's source and inflow data (pass 0.0 for the
    homogeneous functional used in the LS-ratio metric).
    """
    kern = LossKernel(_override(spec, f, g), mesh, rule, threads=threads)
    try:
        return kern.loss_of_callable(v)
    finally:
        kern.close()


def loss_gradient(net: NetworkParams, spec: ProblemSpec, mesh: QuadratureMesh, rule: FdRule,
                  threads: int = 1) -> np.ndarray:
    """Exact parameter gradient of discrete_loss at v = forward(net, .)."""
    kern = LossKernel(spec, mesh, rule, threads=threads)
    try:
        return kern.loss_and_grad(net)[1]
    finally:
        kern.close()


def _override(spec: ProblemSpec, f, g) -> ProblemSpec:
    if f is None and g is None:
        return spec
    from dataclasses import replace

    def const(c):
        return lambda x: np.full(len(np.atleast_2d(x)), float(c))

    kw = {}
    if f is not None:
        kw["f"] = f if callable(f) else const(f)
    if g is not None:
        kw["g"] = g if callable(g) else const(g)
    return replace(spec, **kw)
