import numpy as np
import pytest

from lsnn.functional import (FdRule, LossKernel, build_mesh,
                             directional_derivative_fd, discrete_loss,
                             loss_gradient)
from lsnn.network import Architecture, NetworkParams, init_params
from lsnn.problems import make_benchmark

from conftest import make_synthetic_spec


class TestFdRule:
    def test_rejects_nonpositive_rho(self):
        with pytest.raises(ValueError):
            FdRule(0.0)


class TestDirectionalDerivative:
    def test_exact_on_linear(self):
        v = lambda x: x[:, 1]
        for rho in (0.1, 0.0025):
            assert directional_derivative_fd(v, [0.3, 0.6], [0.0, 1.0], rho) == pytest.approx(1.0)

    def test_zero_on_constant(self):
        v = lambda x: np.full(len(x), 3.7)
        assert directional_derivative_fd(v, [0.3, 0.6], [2.0, 1.0], 0.01) == 0.0

    def test_quadratic_hand_value(self):
        v = lambda x: x[:, 1] ** 2
        got = directional_derivative_fd(v, [0.1, 0.5], [0.0, 1.0], 0.0025)
        assert got == pytest.approx((0.25 - 0.4975 ** 2) / 0.0025, rel=1e-12)
        assert got == pytest.approx(0.9975, rel=1e-12)

    def test_zero_advection_rejected(self):
        v = lambda x: x[:, 0]
        with pytest.raises(ValueError):
            directional_derivative_fd(v, [0.5, 0.5], [0.0, 0.0], 0.01)


class TestBuildMesh:
    def test_single_interior_point(self):
        mesh = build_mesh(make_benchmark(1), 0.5)
        np.testing.assert_array_equal(mesh.interior, [[0.5, 0.5]])
        assert mesh.interior_weight == 0.25

    def test_fine_2d_count(self):
        mesh = build_mesh(make_benchmark(1), 0.01)
        assert len(mesh.interior) == 99 ** 2
        assert len(mesh.interior) * mesh.interior_weight <= 1.0

    def test_3d_count_and_weights(self):
        mesh = build_mesh(make_benchmark(6), 0.1)
        assert len(mesh.interior) == 9 ** 3
        assert mesh.interior_weight == pytest.approx(1e-3)

    def test_points_strictly_interior(self):
        mesh = build_mesh(make_benchmark(6), 0.25)
        assert np.all(mesh.interior > 0.0) and np.all(mesh.interior < 1.0)

    def test_non_integral_h(self):
        with pytest.raises(ValueError):
            build_mesh(make_benchmark(1), 0.3)


class TestDiscreteLoss:
    def test_zero_on_interpolating_affine(self):
        # beta=(0,1), gamma=0, f=1, g=0: v(x,y)=y solves the problem and the
        # FD rule is exact on affine functions
        spec = make_synthetic_spec(gamma=0.0, f=1.0, g=0.0)
        mesh = build_mesh(spec, 0.25)
        bd = discrete_loss(lambda x: x[:, 1], spec, mesh, FdRule(0.0625))
        assert bd.interior_term == 0.0
        assert bd.boundary_term == 0.0
        assert bd.total == 0.0

    def test_constant_v_hand_sum(self):
        spec = make_synthetic_spec(gamma=0.0, f=1.0, g=0.0)
        mesh = build_mesh(spec, 0.5)
        bd = discrete_loss(lambda x: np.zeros(len(x)), spec, mesh, FdRule(0.125))
        assert bd.interior_term == pytest.approx(0.25)  # one point, weight h^2, residual 1
        assert bd.boundary_term == 0.0
        assert bd.total == pytest.approx(0.25)

    def test_exact_solution_small_residual(self):
        # benchmark 1 advects parallel to its interface, so every stencil
        # stays one-sided and only FD truncation remains
        spec = make_benchmark(1)
        mesh = build_mesh(spec, 0.01)
        bd = discrete_loss(spec.exact, spec, mesh, FdRule(0.0025))
        assert bd.boundary_term <= 1e-26  # g sampled where it equals the trace
        assert bd.interior_term <= 1e-4

    def test_homogeneous_part_is_quadratic(self):
        spec = make_benchmark(2)
        mesh = build_mesh(spec, 0.125)
        rule = FdRule(0.03125)
        net = init_params(Architecture((2, 4, 4, 1)), seed=5)
        from lsnn.network import forward_batch
        v = lambda x: forward_batch(net.arch, net.params, x)[0]
        base = discrete_loss(v, spec, mesh, rule, f=0.0, g=0.0).total
        scaled = discrete_loss(lambda x: 3.0 * v(x), spec, mesh, rule, f=0.0, g=0.0).total
        assert scaled == pytest.approx(9.0 * base, rel=1e-12)

    def test_breakdown_total(self):
        spec = make_benchmark(1)
        mesh = build_mesh(spec, 0.125)
        bd = discrete_loss(lambda x: np.zeros(len(x)), spec, mesh, FdRule(0.03125))
        assert bd.total == bd.interior_term + bd.boundary_term
        assert bd.interior_term >= 0.0 and bd.boundary_term > 0.0


class TestLossGradient:
    def test_zero_net_zero_data(self):
        spec = make_synthetic_spec(gamma=1.0, f=0.0, g=0.0)
        mesh = build_mesh(spec, 0.25)
        arch = Architecture((2, 3, 3, 1))
        net = NetworkParams(arch, np.zeros(25))
        g = loss_gradient(net, spec, mesh, FdRule(0.0625))
        assert np.all(g == 0.0)

    def test_matches_finite_differences(self):
        spec = make_benchmark(1)
        mesh = build_mesh(spec, 0.25)
        rule = FdRule(0.0625)
        arch = Architecture((2, 3, 3, 1))
        from lsnn.network import forward_batch
        for seed in range(3):
            net = init_params(arch, seed=seed)
            g = loss_gradient(net, spec, mesh, rule)
            fd = np.empty_like(g)
            eps = 1e-6
            for i in range(len(g)):
                p = net.params.copy()
                p[i] += eps
                up = discrete_loss(lambda x, p=p: forward_batch(arch, p, x)[0],
                                   spec, mesh, rule).total
                p[i] -= 2 * eps
                dn = discrete_loss(lambda x, p=p: forward_batch(arch, p, x)[0],
                                   spec, mesh, rule).total
                fd[i] = (up - dn) / (2 * eps)
            scale = np.max(np.abs(fd))
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-8 * scale)

    def test_taylor_step(self):
        spec = make_benchmark(2)
        mesh = build_mesh(spec, 0.25)
        rule = FdRule(0.0625)
        arch = Architecture((2, 3, 3, 1))
        net = init_params(arch, seed=9)
        g = loss_gradient(net, spec, mesh, rule)
        from lsnn.network import forward_batch
        base = discrete_loss(lambda x: forward_batch(arch, net.params, x)[0],
                             spec, mesh, rule).total
        delta = 1e-4
        i = int(np.argmax(np.abs(g)))
        p = net.params.copy()
        p[i] += delta
        moved = discrete_loss(lambda x: forward_batch(arch, p, x)[0],
                              spec, mesh, rule).total
        assert moved - base == pytest.approx(g[i] * delta, rel=1e-2)


class TestKernelDeterminism:
    def test_threads_bit_identical(self):
        # h=0.02 gives 2401 interior nodes: more than one reduction block
        spec = make_benchmark(2)
        mesh = build_mesh(spec, 0.02)
        rule = FdRule(0.005)
        net = init_params(Architecture((2, 8, 8, 1)), seed=1)
        results = []
        for threads in (1, 2, 8):
            kern = LossKernel(spec, mesh, rule, threads=threads)
            bd, g = kern.loss_and_grad(net)
            kern.close()
            results.append((bd.interior_term, bd.boundary_term, g.copy()))
        for it, bt, g in results[1:]:
            assert it == results[0][0]
            assert bt == results[0][1]
            assert np.array_equal(g, results[0][2])

    def test_repeat_evaluation_identical(self):
        spec = make_benchmark(1)
        mesh = build_mesh(spec, 0.05)
        kern = LossKernel(spec, mesh, FdRule(0.0125))
        net = init_params(Architecture((2, 6, 6, 1)), seed=2)
        a = kern.loss(net)
        b = kern.loss(net)
        kern.close()
        assert (a.interior_term, a.boundary_term) == (b.interior_term, b.boundary_term)

    def test_kernel_agrees_with_discrete_loss(self):
        spec = make_benchmark(4)
        mesh = build_mesh(spec, 0.1)
        rule = FdRule(0.025)
        net = init_params(Architecture((2, 5, 5, 1)), seed=3)
        kern = LossKernel(spec, mesh, rule)
        bd = kern.loss(net)
        kern.close()
        from lsnn.network import forward_batch
        ref = discrete_loss(lambda x: forward_batch(net.arch, net.params, x)[0],
                            spec, mesh, rule)
        assert bd.interior_term == pytest.approx(ref.interior_term, rel=1e-12)
        assert bd.boundary_term == pytest.approx(ref.boundary_term, rel=1e-12)
