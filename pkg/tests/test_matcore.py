"""Matrix kernel tests: examples with independently computed expectations,
plus property tests for the algebraic invariants."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nearcommute import matcore as mc


def power_iteration_norm(a, iters=2000, tol=1e-13):
    """Independent oracle for the operator norm: power iteration on A*A."""
    m = np.asarray(a, dtype=complex)
    g = m.conj().T @ m
    v = np.ones(m.shape[1], dtype=complex) / np.sqrt(m.shape[1])
    lam = 0.0
    for _ in range(iters):
        w = g @ v
        new = float(np.linalg.norm(w))
        if new == 0:
            return 0.0
        v = w / new
        if abs(new - lam) < tol * max(1.0, new):
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


class TestEigHermitian:
    def test_diagonal_case(self):
        e = mc.eig_hermitian(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(e.eigenvalues, [1.0, 2.0, 3.0])

    def test_pauli_x(self):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        e = mc.eig_hermitian(sx)
        assert np.allclose(e.eigenvalues, [-1.0, 1.0])

    def test_random_reconstruction(self):
        rng = np.random.default_rng(11)
        a = mc.random_hermitian(rng, 8)
        e = mc.eig_hermitian(a)
        assert mc.op_norm(e.reconstruct() - a) <= 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(mc.NotHermitianError):
            mc.eig_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_deterministic_on_degenerate_spectrum(self):
        rng = np.random.default_rng(3)
        q = mc.random_unitary(rng, 5)
        a = q @ np.diag([1.0, 1.0, 1.0, 2.0, 3.0]) @ q.conj().T
        e1 = mc.eig_hermitian(a)
        e2 = mc.eig_hermitian(a.copy())
        assert np.array_equal(e1.vectors, e2.vectors)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 24), st.integers(0, 10 ** 6))
    def test_round_trip_property(self, n, seed):
        rng = np.random.default_rng(seed)
        a = mc.random_hermitian(rng, n)
        e = mc.eig_hermitian(a)
        assert mc.op_norm(e.reconstruct() - a) <= 1e-10 * n * max(1.0, mc.op_norm(a))
        assert mc.op_norm(e.vectors.conj().T @ e.vectors - np.eye(n)) <= 1e-12 * n

    def test_round_trip_bulk_dims_up_to_64(self):
        rng = np.random.default_rng(123)
        for _ in range(1000):
            n = int(rng.integers(2, 65))
            a = mc.random_hermitian(rng, n)
            e = mc.eig_hermitian(a)
            bound = 1e-10 * n * max(1.0, mc.op_norm(a))
            assert mc.op_norm(e.reconstruct() - a) <= bound


class TestOpNorm:
    def test_identity(self):
        assert mc.op_norm(np.eye(4)) == pytest.approx(1.0, abs=1e-14)

    def test_diagonal(self):
        assert mc.op_norm(np.diag([-3.0, 2.0])) == pytest.approx(3.0, abs=1e-14)

    def test_against_power_iteration(self):
        rng = np.random.default_rng(5)
        m = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
        assert mc.op_norm(m) == pytest.approx(power_iteration_norm(m), abs=1e-8)


class TestCommutator:
    def test_self_commutator_vanishes(self):
        rng = np.random.default_rng(0)
        a = mc.random_hermitian(rng, 5)
        assert mc.op_norm(mc.commutator(a, a)) == 0.0

    def test_pauli_pair(self):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sz = np.array([[1, 0], [0, -1]], dtype=complex)
        c = mc.commutator(sx, sz)
        assert np.allclose(c, [[0, -2], [2, 0]])
        assert mc.op_norm(c) == pytest.approx(2.0, abs=1e-14)

    def test_dim_mismatch(self):
        with pytest.raises(mc.MatrixShapeError):
            mc.commutator(np.eye(2), np.eye(3))


class TestSpectralProjection:
    def test_single_eigenvalue(self):
        e = mc.eig_hermitian(np.diag([2.0, 5.0]))
        p = mc.spectral_projection(e, lambda x: abs(x - 2.0) < 1e-9)
        assert np.allclose(p.matrix, np.diag([1.0, 0.0]))
        assert p.rank == 1

    def test_whole_line_gives_identity(self):
        rng = np.random.default_rng(1)
        e = mc.eig_hermitian(mc.random_hermitian(rng, 6))
        p = mc.spectral_projection(e, lambda x: True)
        assert mc.op_norm(p.matrix - np.eye(6)) <= 1e-12

    def test_rank_counts_eigenvalues(self):
        rng = np.random.default_rng(2)
        e = mc.eig_hermitian(mc.random_hermitian(rng, 8))
        p = mc.spectral_projection(e, lambda x: x >= 0)
        assert p.rank == int(np.sum(e.eigenvalues >= 0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 16), st.integers(0, 10 ** 6))
    def test_complement_sums_to_identity(self, n, seed):
        rng = np.random.default_rng(seed)
        e = mc.eig_hermitian(mc.random_hermitian(rng, n))
        cut = float(rng.uniform(-1, 1))
        p1 = mc.spectral_projection(e, lambda x: x < cut)
        p2 = mc.spectral_projection(e, lambda x: x >= cut)
        assert mc.op_norm(p1.matrix + p2.matrix - np.eye(n)) <= 1e-10


class TestApplyFunction:
    def test_identity_function(self):
        rng = np.random.default_rng(3)
        a = mc.random_hermitian(rng, 6)
        e = mc.eig_hermitian(a)
        assert mc.op_norm(mc.apply_function(e, lambda x: x) - a) <= 1e-12

    def test_indicator_matches_projection(self):
        rng = np.random.default_rng(4)
        e = mc.eig_hermitian(mc.random_hermitian(rng, 6))
        cut = float(np.median(e.eigenvalues))
        f = mc.apply_function(e, lambda x: (x > cut).astype(float))
        p = mc.spectral_projection(e, lambda x: x > cut)
        assert mc.op_norm(f - p.matrix) <= 1e-12

    def test_square_function(self):
        rng = np.random.default_rng(5)
        a = mc.random_hermitian(rng, 7)
        e = mc.eig_hermitian(a)
        assert mc.op_norm(mc.apply_function(e, lambda x: x ** 2) - a @ a) <= 1e-10


class TestPinch:
    def test_identity_partition(self):
        rng = np.random.default_rng(6)
        a = mc.random_hermitian(rng, 5)
        out = mc.pinch(a, [np.eye(5)])
        assert mc.op_norm(out - a) <= 1e-14

    def test_rank_one_partition_diagonal(self):
        rng = np.random.default_rng(7)
        a = mc.random_hermitian(rng, 4)
        parts = [np.outer(np.eye(4)[:, i], np.eye(4)[:, i]) for i in range(4)]
        out = mc.pinch(a, parts)
        assert mc.op_norm(out - np.diag(np.diag(a))) <= 1e-14

    def test_pauli_x_pinches_to_zero(self):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        parts = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
        assert mc.op_norm(mc.pinch(sx, parts)) <= 1e-15

    def test_rejects_non_resolution(self):
        with pytest.raises(mc.NotResolutionError):
            mc.pinch(np.eye(3), [np.diag([1.0, 0, 0])])

    @settings(max_examples=20, deadline=None)
    @given(st.integers(3, 12), st.integers(0, 10 ** 6))
    def test_idempotent_and_contractive(self, n, seed):
        rng = np.random.default_rng(seed)
        a = mc.random_hermitian(rng, n)
        q = mc.random_unitary(rng, n)
        cut = int(rng.integers(1, n))
        parts = [q[:, :cut] @ q[:, :cut].conj().T, q[:, cut:] @ q[:, cut:].conj().T]
        once = mc.pinch(a, parts)
        twice = mc.pinch(once, parts)
        assert mc.op_norm(twice - once) <= 1e-12
        assert mc.op_norm(once) <= mc.op_norm(a) + 1e-8


class TestEnergyBounds:
    """Nonconsecutive-orthogonality estimates on constructed vector chains."""

    @staticmethod
    def _chain(rng, n_vec, coupling):
        """Scaled unit vectors whose Gram matrix is exactly
        I + coupling * (shift + shift^T): nonconsecutive entries vanish and
        each neighbor overlap equals ``coupling`` after normalization."""
        gram = np.eye(n_vec) + coupling * (np.eye(n_vec, k=1) + np.eye(n_vec, k=-1))
        w, v = np.linalg.eigh(gram)
        assert w[0] > 0, "Gram must be positive definite for the construction"
        root = (v * np.sqrt(w)) @ v.conj().T
        scales = rng.uniform(0.3, 2.0, n_vec)
        return [scales[i] * root[:, i] for i in range(n_vec)]

    def test_upper_bound_constant_two(self):
        rng = np.random.default_rng(8)
        for trial in range(50):
            n_vec = int(rng.integers(2, 7))
            vecs = self._chain(rng, n_vec, float(rng.uniform(0, 0.45)))
            total = sum(vecs)
            lhs = float(np.linalg.norm(total)) ** 2
            rhs = 2 * sum(float(np.linalg.norm(v)) ** 2 for v in vecs)
            assert lhs <= rhs + 1e-10

    def test_lower_bound_semi_pythagorean(self):
        rng = np.random.default_rng(9)
        for trial in range(50):
            n_vec = int(rng.integers(2, 7))
            c = float(rng.uniform(0, 0.45))
            vecs = self._chain(rng, n_vec, c)
            total = sum(vecs)
            lhs = float(np.linalg.norm(total)) ** 2
            rhs = (1 - 2 * c) * sum(float(np.linalg.norm(v)) ** 2 for v in vecs)
            assert lhs >= rhs - 1e-10
