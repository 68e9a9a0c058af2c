import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbitgauge.errors import PreconditionError
from orbitgauge.lattice import (
    HERMITE_2D,
    LatticeBasis,
    basis_from_tau,
    dist_proxy,
    hyperbolic_distance,
    lagrange_reduce_batch,
    reduce_shape_2d,
    sample_haar_2d,
    sample_haar_tau,
    shortest_vector,
    shortest_vector_bruteforce,
    sup_systole_batch,
    systole,
    systole_batch,
    tau_batch,
)


class TestShortestVector:
    def test_standard_lattice(self):
        res = shortest_vector(LatticeBasis.standard(2))
        assert res.vector == (1, 0)
        assert res.norm == 1.0

    def test_diagonal_scaling(self):
        res = shortest_vector(LatticeBasis(np.diag([math.e, 1.0 / math.e])))
        assert res.vector == (0, 1)
        assert res.norm == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_skew_example_vs_bruteforce(self):
        # oracle: exhaustive over |c_i| <= 2
        basis = LatticeBasis(np.array([[1.0, 0.5], [0.0, 1.0]]))
        res = shortest_vector(basis)
        oracle = shortest_vector_bruteforce(basis, box=2)
        assert res.norm == pytest.approx(1.0, abs=1e-12)
        assert res.vector == (1, 0)
        assert res.norm == pytest.approx(oracle.norm, rel=1e-12)

    def test_embedded_consistency(self, rng):
        for _ in range(50):
            x, y = sample_haar_tau(rng, 1)
            basis = basis_from_tau(complex(x[0], y[0] + 0.1))
            for kind in ("euclidean", "supremum"):
                res = shortest_vector(basis, kind)
                assert np.allclose(
                    res.embedded, basis.cols @ np.asarray(res.vector, dtype=float)
                )
                if kind == "euclidean":
                    assert res.norm == pytest.approx(np.linalg.norm(res.embedded))
                else:
                    assert res.norm == pytest.approx(np.max(np.abs(res.embedded)))

    def test_agrees_with_bruteforce_random(self, rng):
        for _ in range(100):
            x, y = sample_haar_tau(rng, 1)
            basis = basis_from_tau(complex(x[0], y[0]), rotation=rng.uniform(0, 6.28))
            for kind in ("euclidean", "supremum"):
                a = shortest_vector(basis, kind)
                b = shortest_vector_bruteforce(basis, kind, box=3)
                assert a.norm == pytest.approx(b.norm, rel=1e-10)

    def test_sl_invariance(self, rng):
        # systole is invariant under integer unimodular column operations
        for _ in range(50):
            x, y = sample_haar_tau(rng, 1)
            basis = basis_from_tau(complex(x[0], y[0]))
            U = np.eye(2, dtype=int)
            for _ in range(4):
                k = rng.integers(-3, 4)
                if rng.uniform() < 0.5:
                    E = np.array([[1, k], [0, 1]])
                else:
                    E = np.array([[1, 0], [k, 1]])
                if np.max(np.abs(U @ E)) <= 10:
                    U = U @ E
            transformed = LatticeBasis(basis.cols @ U)
            assert systole(transformed) == pytest.approx(systole(basis), rel=1e-9)

    def test_scaling_equivariance(self, rng):
        for _ in range(30):
            x, y = sample_haar_tau(rng, 1)
            basis = basis_from_tau(complex(x[0], y[0]))
            t = rng.uniform(0.0, 2.0)
            flowed = LatticeBasis(np.diag([math.exp(t), math.exp(-t)]) @ basis.cols)
            s0, s1 = systole(basis), systole(flowed)
            assert s1 <= math.exp(t) * s0 * (1 + 1e-9)
            assert s1 >= math.exp(-t) * s0 * (1 - 1e-9)

    def test_ill_conditioned_rejected(self):
        t = 16.0
        mat = np.diag([math.exp(t), math.exp(-t)])
        # cond ~ e^32 > 1e12
        with pytest.raises(PreconditionError):
            shortest_vector(LatticeBasis(mat))

    def test_not_unimodular_rejected(self):
        with pytest.raises(PreconditionError):
            LatticeBasis(np.diag([2.0, 1.0]))

    @given(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5))
    @settings(max_examples=50, deadline=None)
    def test_unimodular_transform_preserves_norm(self, a, b, k):
        mat = np.array([[1.0, 0.3], [0.1, 1.03]])
        mat /= math.sqrt(abs(np.linalg.det(mat)))
        basis = LatticeBasis(mat)
        U = np.array([[1, k], [0, 1]])
        assert systole(LatticeBasis(basis.cols @ U)) == pytest.approx(
            systole(basis), rel=1e-9
        )


class TestShapeReduction:
    def test_square(self):
        assert reduce_shape_2d(LatticeBasis.standard(2)).tau == 1j

    def test_boundary_convention(self):
        # Re tau in (-1/2, 1/2]: the +1/2 representative is chosen
        basis = LatticeBasis(np.array([[1.0, 0.5], [0.0, 1.0]]))
        tau = reduce_shape_2d(basis).tau
        assert tau == pytest.approx(complex(0.5, 1.0), abs=1e-12)

    def test_hexagonal_fixed_point(self):
        tau0 = complex(0.5, math.sqrt(3) / 2)
        tau = reduce_shape_2d(basis_from_tau(tau0)).tau
        assert tau == pytest.approx(tau0, abs=1e-12)

    def test_idempotent_random(self, rng):
        xs, ys = sample_haar_tau(rng, 10_000)
        rots = rng.uniform(0, 6.28, size=10_000)
        for i in range(10_000):
            basis = basis_from_tau(complex(xs[i], ys[i]), rotation=rots[i])
            t1 = reduce_shape_2d(basis).tau
            t2 = reduce_shape_2d(basis_from_tau(t1)).tau
            assert abs(t1 - t2) < 1e-9

    def test_batch_matches_scalar(self, rng):
        xs, ys = sample_haar_tau(rng, 200)
        phi = rng.uniform(0, 2 * math.pi, size=200)
        from orbitgauge.lattice import bases_from_tau_batch

        mats = bases_from_tau_batch(xs, ys, phi)
        bx, by = tau_batch(mats)
        for i in range(200):
            tau = reduce_shape_2d(LatticeBasis(mats[i])).tau
            assert abs(complex(bx[i], by[i]) - tau) < 1e-9
        assert np.allclose(systole_batch(mats), 1.0 / np.sqrt(ys), atol=1e-12)

    def test_sup_systole_batch_matches_scalar(self, rng):
        xs, ys = sample_haar_tau(rng, 100)
        phi = rng.uniform(0, 2 * math.pi, size=100)
        from orbitgauge.lattice import bases_from_tau_batch

        mats = bases_from_tau_batch(xs, ys, phi)
        batch = sup_systole_batch(mats)
        for i in range(100):
            assert batch[i] == pytest.approx(
                systole(LatticeBasis(mats[i]), "supremum"), rel=1e-9
            )


class TestDistProxy:
    def test_identity(self):
        b = basis_from_tau(complex(0.1, 1.2))
        assert dist_proxy(b, b) == 0.0

    def test_vertical_geodesic(self):
        # arcosh(1 + |i - 2i|^2 / (2 * 1 * 2)) = log 2
        assert hyperbolic_distance(1j, 2j) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_corner_distance(self):
        # oracle: same formula by hand, d(i, e^(i pi/3)) = arcosh(2/sqrt(3)) = log sqrt(3)
        d = hyperbolic_distance(1j, complex(0.5, math.sqrt(3) / 2))
        assert d == pytest.approx(math.log(math.sqrt(3.0)), abs=1e-12)

    def test_symmetry(self, rng):
        for _ in range(20):
            xs, ys = sample_haar_tau(rng, 2)
            a = basis_from_tau(complex(xs[0], ys[0]))
            b = basis_from_tau(complex(xs[1], ys[1]))
            assert dist_proxy(a, b) == pytest.approx(dist_proxy(b, a), rel=1e-12)


class TestHaarSampler:
    def test_mass_above_two(self, rng):
        # analytic: (3/pi) * integral over x in [-1/2,1/2], y > 2 of dy/y^2 = 3/(2 pi)
        n = 1_000_000
        _, ys = sample_haar_tau(rng, n)
        p_hat = float((ys > 2.0).mean())
        p = 3.0 / (2.0 * math.pi)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(p_hat - p) < 3 * sigma

    def test_siegel_small_systole(self, rng):
        # Siegel: P(systole < eps) = 3 eps^2 / pi for eps < 1
        n = 1_000_000
        _, ys = sample_haar_tau(rng, n)
        eps = 0.1
        p_hat = float((1.0 / np.sqrt(ys) < eps).mean())
        p = 3.0 * eps * eps / math.pi
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(p_hat - p) < 3 * sigma

    def test_hermite_bound(self, rng):
        _, ys = sample_haar_tau(rng, 100_000)
        syst = 1.0 / np.sqrt(ys)
        assert float(syst.max()) <= HERMITE_2D + 1e-12
        assert float(syst.max()) <= 2.0 / math.sqrt(3.0)

    def test_basis_is_unimodular(self, rng):
        for _ in range(20):
            b = sample_haar_2d(rng)
            assert abs(np.linalg.det(b.cols) - 1.0) < 1e-9

    def test_rotation_does_not_change_shape(self, rng):
        xs, ys = sample_haar_tau(rng, 1)
        tau = complex(xs[0], ys[0])
        t1 = reduce_shape_2d(basis_from_tau(tau, rotation=0.7)).tau
        assert abs(t1 - tau) < 1e-9


class TestBatchReduction:
    def test_reduction_invariants(self, rng):
        xs, ys = sample_haar_tau(rng, 500)
        phi = rng.uniform(0, 2 * math.pi, size=500)
        from orbitgauge.lattice import bases_from_tau_batch

        mats = bases_from_tau_batch(xs, ys, phi)
        # skew them with a flow to stress the reducer
        mats = np.einsum("ab,nbc->nac", np.diag([math.e ** 3, math.e ** -3]), mats)
        red = lagrange_reduce_batch(mats)
        n1 = np.einsum("ij,ij->i", red[:, :, 0], red[:, :, 0])
        n2 = np.einsum("ij,ij->i", red[:, :, 1], red[:, :, 1])
        dot = np.abs(np.einsum("ij,ij->i", red[:, :, 0], red[:, :, 1]))
        assert np.all(n1 <= n2 * (1 + 1e-12))
        assert np.all(dot <= 0.5 * n1 * (1 + 1e-9))
