import numpy as np
import pytest

from lpvsyn import (FrequencyGrid, ObfBasis, SchedulingBasis, cluster_poles,
                    eval_basis, eval_basis_at, laguerre_basis, realize_bank,
                    scheduling_eval)
from lpvsyn.obf import basis_rational


def unit_circle(n):
    return np.exp(2j * np.pi * np.arange(n) / n)


class TestLaguerre:
    def test_pole_zero_gives_pure_delays(self):
        basis = laguerre_basis(0.0, 2)
        z = np.exp(1j * np.linspace(0.2, 3.0, 5))
        ev = eval_basis_at(basis, z)
        assert np.allclose(ev[1], z ** -1.0, atol=1e-14)
        assert np.allclose(ev[2], z ** -2.0, atol=1e-14)

    def test_phi1_at_one_closed_form(self):
        basis = laguerre_basis(0.7, 1)
        val = eval_basis_at(basis, np.array([1.0 + 0j]))[1, 0]
        assert val.real == pytest.approx(np.sqrt(0.51) / 0.3, abs=1e-9)
        assert val == pytest.approx(2.380476, abs=1e-6)

    def test_reference_configuration_has_six_functions(self):
        basis = laguerre_basis(0.7, 5)
        assert basis.size == 6
        assert basis.n == 5

    def test_invalid_pole_rejected(self):
        with pytest.raises(ValueError):
            laguerre_basis(1.0, 3)
        with pytest.raises(ValueError):
            ObfBasis(np.array([0.5 + 0.9j, 0.5 - 0.9j]))  # modulus > 1

    def test_conjugate_closure_required(self):
        with pytest.raises(ValueError, match="conjugate"):
            ObfBasis(np.array([0.3 + 0.4j]))


class TestEvalAndRealization:
    def test_row_zero_is_one(self):
        grid = FrequencyGrid(np.linspace(0.1, 3.0, 9))
        ev = eval_basis(laguerre_basis(0.6, 3), grid)
        assert np.all(ev[0] == 1.0)

    @pytest.mark.parametrize("poles", [
        np.full(5, 0.7, dtype=complex),
        np.array([0.5, 0.6 + 0.5j, 0.6 - 0.5j, -0.3], dtype=complex),
    ])
    def test_matches_bank_realization(self, poles):
        basis = ObfBasis(poles)
        bank = realize_bank(basis)
        z = np.exp(1j * np.linspace(0.05, 3.1, 33))
        assert np.max(np.abs(bank.response(z) - eval_basis_at(basis, z))) < 1e-10

    def test_gram_matrix_is_identity(self):
        basis = ObfBasis(np.array([0.5, 0.2 + 0.6j, 0.2 - 0.6j], dtype=complex))
        phi = eval_basis_at(basis, unit_circle(2 ** 14))
        gram = phi @ phi.conj().T / 2 ** 14
        assert np.max(np.abs(gram - np.eye(basis.size))) < 1e-6

    def test_shift_register_for_zero_pole(self):
        bank = realize_bank(laguerre_basis(0.0, 3))
        expected = np.zeros((3, 3))
        expected[1, 0] = 1.0
        expected[2, 1] = 1.0
        assert np.allclose(bank.a, expected)
        assert np.allclose(bank.b, [1.0, 0.0, 0.0])

    def test_impulse_response_matches_long_division(self):
        a = 0.6
        basis = laguerre_basis(a, 2)
        bank = realize_bank(basis)
        n = 50
        # simulate the bank impulse response
        x = np.zeros(2)
        h = np.zeros((2, n))
        u = 1.0
        for k in range(n):
            h[:, k] = x
            x = bank.a @ x + bank.b * u
            u = 0.0
        # long division of the phi_1 rational form in powers of z^{-1};
        # the padded numerator makes coeff[k] the impulse response at k
        nums, den = basis_rational(basis)
        coeff = np.zeros(n)
        rem = np.concatenate([nums[1], np.zeros(n)])
        for k in range(n):
            c = rem[0] / den[0]
            coeff[k] = c
            rem[:den.size] -= c * den
            rem = rem[1:]
        assert np.max(np.abs(h[0] - coeff)) < 1e-10
        # closed form sqrt(1-a^2) a^{k-1} for k >= 1
        expected = np.sqrt(1 - a * a) * a ** np.arange(n - 1)
        assert np.max(np.abs(h[0, 1:] - expected)) < 1e-10

    def test_bank_eigenvalues_equal_pole(self):
        bank = realize_bank(laguerre_basis(0.7, 5))
        assert np.allclose(np.linalg.eigvals(bank.a), 0.7)

    def test_rational_forms_match_evaluation(self):
        basis = laguerre_basis(0.7, 4)
        nums, den = basis_rational(basis)
        z = np.exp(1j * np.linspace(0.1, 3.0, 11))
        ev = eval_basis_at(basis, z)
        for i, num in enumerate(nums):
            assert np.max(np.abs(np.polyval(num, z) / np.polyval(den, z) - ev[i])) < 1e-10


class TestSchedulingBasis:
    def test_affine_centering(self):
        sb = SchedulingBasis.affine((30.0, 50.0))
        assert np.allclose(scheduling_eval(sb, 40.0), [1.0, 0.0])
        assert np.allclose(scheduling_eval(sb, 50.0), [1.0, 1.0])
        assert np.allclose(scheduling_eval(sb, 30.0), [1.0, -1.0])

    def test_polynomial_degree_two_at_pmax(self):
        sb = SchedulingBasis.polynomial(2, (30.0, 50.0))
        assert np.allclose(scheduling_eval(sb, 50.0), [1.0, 1.0, 1.0])

    def test_constant_mode(self):
        sb = SchedulingBasis.constant((30.0, 50.0))
        assert np.allclose(scheduling_eval(sb, 37.0), [1.0])

    def test_out_of_range_rejected(self):
        sb = SchedulingBasis.affine((30.0, 50.0))
        with pytest.raises(ValueError):
            scheduling_eval(sb, 51.0)


class TestClusterPoles:
    def test_identical_samples_collapse(self):
        centers = cluster_poles(np.full(6, 0.4 + 0.1j), 3)
        assert np.allclose(centers, 0.4 + 0.1j)

    def test_two_tight_clusters_match_kmeans_oracle(self):
        rng = np.random.default_rng(1)
        s = np.concatenate([
            0.3 + 0.001 * (rng.standard_normal(25) + 1j * rng.standard_normal(25)),
            0.8 + 0.001 * (rng.standard_normal(25) + 1j * rng.standard_normal(25))])
        centers = np.sort(cluster_poles(s, 2).real)
        # brute-force Lloyd k-means oracle
        pts = np.column_stack([s.real, s.imag])
        c = pts[[0, -1]].copy()
        for _ in range(100):
            d = ((pts[None] - c[:, None]) ** 2).sum(-1)
            lab = np.argmin(d, axis=0)
            c = np.array([pts[lab == i].mean(axis=0) for i in range(2)])
        oracle = np.sort(c[:, 0])
        assert np.max(np.abs(centers - oracle)) < 1e-3
        assert abs(centers[0] - 0.3) < 1e-3 and abs(centers[1] - 0.8) < 1e-3

    def test_cluster_count_equal_sample_count(self):
        samples = np.array([0.1 + 0j, 0.5 + 0.2j, -0.3 + 0.1j])
        centers = cluster_poles(samples, 3)
        assert np.allclose(np.sort_complex(centers), np.sort_complex(samples),
                           atol=1e-9)

    def test_centers_stay_inside_disk(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            r = rng.uniform(0, 0.99, 12)
            th = rng.uniform(0, 2 * np.pi, 12)
            s = r * np.exp(1j * th)
            centers = cluster_poles(s, 4)
            assert np.all(np.abs(centers) < 1.0)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            cluster_poles(np.array([]), 1)
        with pytest.raises(ValueError):
            cluster_poles(np.array([0.1 + 0j]), 2)
        with pytest.raises(ValueError):
            cluster_poles(np.array([1.2 + 0j]), 1)
        with pytest.raises(ValueError):
            cluster_poles(np.array([0.1 + 0j]), 1, fuzziness=1.0)
