"""Linear operators and Krylov solvers against dense oracles."""

import numpy as np
import pytest

from tvalm.errors import KrylovError
from tvalm.grid import inner_x
from tvalm.linops import (BlurKernel, KrylovConfig, LinearMap, bicgstab_solve,
                          blur_adjoint, blur_apply, blur_map, cg_solve,
                          gaussian_kernel, h_apply, h_map, h_solve, identity_map,
                          krylov_solve, motion_kernel, newton_forcing_tol)

RNG = np.random.default_rng(5150)


def dense_from_map(A: LinearMap, shape):
    """Assemble the dense matrix of a LinearMap by probing unit fields."""
    n = int(np.prod(shape))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(A.apply(e.reshape(shape)).ravel())
    return np.array(cols).T


def adjoint_probe(A: LinearMap, shape, trials=20, tol=1e-12):
    for _ in range(trials):
        u = RNG.normal(size=shape)
        v = RNG.normal(size=shape)
        lhs = float(np.sum(A.apply(u) * v))
        rhs = float(np.sum(u * A.apply_adjoint(v)))
        scale = max(abs(lhs), abs(rhs), 1.0)
        assert abs(lhs - rhs) <= tol * scale


class TestBlurKernel:
    def test_motion_kernel_normalized(self):
        k = motion_kernel(9)
        assert k.taps.shape == (1, 9)
        assert k.taps.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(k.taps >= 0)

    def test_gaussian_kernel_normalized(self):
        k = gaussian_kernel(3, 1.2)
        assert k.taps.shape == (7, 7)
        assert k.taps.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(k.taps >= 0)

    def test_even_support_rejected(self):
        with pytest.raises(ValueError):
            motion_kernel(40)
        with pytest.raises(ValueError):
            BlurKernel(np.full((2, 3), 1.0 / 6))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            BlurKernel(np.ones((3, 3)))


class TestBlurApply:
    def test_identity_kernel(self):
        k = BlurKernel(np.array([[1.0]]))
        u = RNG.normal(size=(5, 5))
        assert np.array_equal(blur_apply(u, k), u)

    def test_constant_image_preserved(self):
        u = np.full((6, 6), 0.7)
        out = blur_apply(u, motion_kernel(5))
        assert np.allclose(out, 0.7, atol=1e-14)

    def test_row_mean_center_pixel(self):
        u = np.arange(9, dtype=float).reshape(3, 3)
        out = blur_apply(u, BlurKernel(np.full((1, 3), 1.0 / 3)))
        assert out[1, 1] == pytest.approx(u[1].mean())

    def test_kernel_larger_than_image(self):
        with pytest.raises(ValueError):
            blur_apply(np.ones((3, 3)), motion_kernel(5))

    def test_adjoint_is_exact(self):
        adjoint_probe(blur_map(motion_kernel(5)), (7, 9))
        adjoint_probe(blur_map(gaussian_kernel(2, 1.0)), (6, 6))

    def test_adjoint_matches_dense_transpose(self):
        k = gaussian_kernel(1, 0.8)
        shape = (4, 5)
        Kd = dense_from_map(blur_map(k), shape)
        y = RNG.normal(size=shape)
        assert np.allclose(blur_adjoint(y, k).ravel(), Kd.T @ y.ravel(), atol=1e-13)


class TestHOperator:
    def test_rof_case_identity(self):
        u = RNG.normal(size=(4, 4))
        assert np.array_equal(h_apply(u, 0.0, None), u)

    def test_constant_image_with_laplacian(self):
        u = np.full((5, 5), 2.0)
        assert np.allclose(h_apply(u, 1.0, None), u, atol=1e-14)

    def test_self_adjoint_probe(self):
        K = blur_map(motion_kernel(5))
        adjoint_probe(h_map(1e-3, K), (6, 8))
        u = RNG.normal(size=(6, 8))
        v = RNG.normal(size=(6, 8))
        H = h_map(1e-3, K)
        assert inner_x(H.apply(u), v) == pytest.approx(inner_x(u, H.apply(v)),
                                                       rel=1e-12)

    def test_negative_mu_rejected(self):
        with pytest.raises(ValueError):
            h_apply(np.ones((2, 2)), -1.0, None)


class TestHSolve:
    def test_identity_case(self):
        b = RNG.normal(size=(4, 4))
        assert np.array_equal(h_solve(b, 0.0, None, KrylovConfig()), b)

    def test_roundtrip_random(self):
        K = blur_map(motion_kernel(5))
        cfg = KrylovConfig(rel_tol=1e-12, max_iters=20000)
        for mu in (1e-6, 1e-9):
            x_true = RNG.normal(size=(8, 8))
            b = h_apply(x_true, mu, K)
            x = h_solve(b, mu, K, cfg)
            rel = np.linalg.norm(x - x_true) / np.linalg.norm(x_true)
            assert rel <= 10 * 1e-4  # conditioning eats a few digits

    def test_zero_rhs(self):
        assert np.all(h_solve(np.zeros((3, 3)), 1e-6, identity_map(),
                              KrylovConfig()) == 0.0)


class TestCg:
    def test_identity_one_iteration(self):
        b = RNG.normal(size=(5, 5))
        x, it = cg_solve(identity_map(), b, KrylovConfig(rel_tol=1e-12))
        assert it == 1
        assert np.allclose(x, b)

    def test_diagonal_two_pixel(self):
        d = np.array([[2.0, 1.0]])
        A = LinearMap(lambda u: d * u, lambda u: d * u, self_adjoint=True)
        x, _ = cg_solve(A, np.array([[2.0, 1.0]]), KrylovConfig(rel_tol=1e-14))
        assert np.allclose(x, 1.0, atol=1e-12)

    def test_matches_dense_solve_on_deblur_h(self):
        K = blur_map(BlurKernel(np.full((1, 3), 1.0 / 3)))
        H = h_map(1e-2, K)
        shape = (3, 3)
        Hd = dense_from_map(H, shape)
        b = RNG.normal(size=shape)
        x, _ = cg_solve(H, b, KrylovConfig(rel_tol=1e-13, max_iters=1000))
        assert np.allclose(x.ravel(), np.linalg.solve(Hd, b.ravel()), atol=1e-8)

    def test_indefinite_detected(self):
        A = LinearMap(lambda u: -u, lambda u: -u, self_adjoint=True)
        with pytest.raises(KrylovError):
            cg_solve(A, np.ones((2, 2)), KrylovConfig())

    def test_max_iters_error_carries_residual(self):
        # One CG iteration cannot solve this 2-value diagonal system.
        d = np.array([[5.0, 1.0]])
        A = LinearMap(lambda u: d * u, lambda u: d * u, self_adjoint=True)
        with pytest.raises(KrylovError) as err:
            cg_solve(A, np.array([[1.0, 2.0]]), KrylovConfig(rel_tol=1e-14, max_iters=1))
        assert err.value.residual > 0

    def test_zero_rhs_short_circuit(self):
        x, it = cg_solve(identity_map(), np.zeros((3, 3)), KrylovConfig())
        assert it == 0 and np.all(x == 0.0)


class TestBicgstab:
    def test_identity(self):
        b = RNG.normal(size=(4, 4))
        x, _ = bicgstab_solve(identity_map(), b, KrylovConfig(rel_tol=1e-12))
        assert np.allclose(x, b)

    def test_random_dense_4x4_system(self):
        M = RNG.normal(size=(16, 16))
        M = M @ M.T + 16 * np.eye(16)  # well conditioned
        M[0, 3] += 2.0  # break symmetry
        A = LinearMap(lambda u: (M @ u.ravel()).reshape(4, 4),
                      lambda u: (M.T @ u.ravel()).reshape(4, 4))
        b = RNG.normal(size=(4, 4))
        x, _ = bicgstab_solve(A, b, KrylovConfig(rel_tol=1e-12, max_iters=500))
        assert np.allclose(x.ravel(), np.linalg.solve(M, b.ravel()), atol=1e-8)

    def test_agrees_with_cg_on_spd(self):
        K = blur_map(motion_kernel(3))
        H = h_map(0.1, K)
        b = RNG.normal(size=(6, 6))
        cfg = KrylovConfig(rel_tol=1e-10, max_iters=5000)
        x_cg, _ = cg_solve(H, b, cfg)
        x_bi, _ = bicgstab_solve(H, b, cfg)
        scale = max(np.linalg.norm(x_cg), np.linalg.norm(b))
        assert np.linalg.norm(x_cg - x_bi) <= 10 * cfg.rel_tol * scale

    def test_two_channel_system(self):
        scale = np.stack((np.full((3, 3), 2.0), np.full((3, 3), 4.0)))
        A = LinearMap(lambda q: scale * q, lambda q: scale * q)
        b = RNG.normal(size=(2, 3, 3))
        x, _ = bicgstab_solve(A, b, KrylovConfig(rel_tol=1e-12))
        assert np.allclose(x, b / scale)

    def test_max_iters_error(self):
        d = 1.0 + np.arange(16.0).reshape(4, 4)
        A = LinearMap(lambda u: d * u, lambda u: d * u)
        with pytest.raises(KrylovError):
            bicgstab_solve(A, RNG.normal(size=(4, 4)),
                           KrylovConfig(rel_tol=1e-14, max_iters=1))


class TestDispatchAndAdjointInvariants:
    def test_krylov_solve_dispatch(self):
        b = RNG.normal(size=(3, 3))
        x1, _ = krylov_solve(identity_map(), b, KrylovConfig(method="cg"))
        x2, _ = krylov_solve(identity_map(), b, KrylovConfig(method="bicgstab"))
        assert np.allclose(x1, b) and np.allclose(x2, b)

    def test_all_shipped_maps_pass_adjoint_probes(self):
        maps = [
            (identity_map(), (5, 5)),
            (blur_map(motion_kernel(7)), (9, 9)),
            (blur_map(gaussian_kernel(2, 1.5)), (8, 6)),
            (h_map(0.0, None), (4, 4)),
            (h_map(1e-6, blur_map(motion_kernel(5))), (7, 7)),
        ]
        for A, shape in maps:
            adjoint_probe(A, shape)
            if A.self_adjoint:
                u = RNG.normal(size=shape)
                assert np.allclose(A.apply(u), A.apply_adjoint(u), atol=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KrylovConfig(rel_tol=0.0)
        with pytest.raises(ValueError):
            KrylovConfig(max_iters=0)
        with pytest.raises(ValueError):
            KrylovConfig(method="gmres")


class TestForcingRule:
    def test_ratio_one(self):
        assert newton_forcing_tol(1.0, 1.0) == pytest.approx(0.1)

    def test_small_ratio_uses_power(self):
        assert newton_forcing_tol(0.01, 1.0) == pytest.approx(1e-4)

    def test_zero_residual_floor(self):
        assert newton_forcing_tol(0.0, 1.0) == 1e-13
        assert newton_forcing_tol(0.0, 0.0) == 1e-13

    def test_floor_clamps(self):
        assert newton_forcing_tol(1e-20, 1.0) == 1e-13
