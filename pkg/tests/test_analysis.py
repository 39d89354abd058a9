import numpy as np
import pytest

from lpvsyn import (FrequencyGrid, ObfBasis, RationalTf, characteristic_data,
                    check_performance, check_stability, closed_loop_data,
                    compute_achieved_gamma, grid_winding, oracle_stability)
from lpvsyn.factorization import ClosedLoopFactorData
from lpvsyn.rational import closed_loop_char_poly
from conftest import closed_loop_pole_moduli, random_proper_tf


@pytest.fixture(scope="module")
def grid512():
    return FrequencyGrid(np.linspace(1e-3, np.pi - 1e-9, 512))


class TestGridWinding:
    def test_reference_values(self, grid512):
        z = grid512.z
        assert grid_winding(np.ones(512, dtype=complex)) == 0
        assert grid_winding(z) == 1
        assert grid_winding(1.0 / z) == -1
        assert grid_winding(z - 0.5) == 1
        assert grid_winding((z + 2.0) / z) == -1


class TestCheckStability:
    def test_unit_characteristic_data(self, grid512):
        cert = check_stability({0.0: np.ones(512, dtype=complex)}, grid512)
        assert cert.certified
        assert cert.margins[0.0] == pytest.approx(1.0)
        assert cert.multipliers[0.0].beta.size == 0

    def test_shifted_pole_data_certified(self, grid512):
        cert = check_stability({0.0: grid512.z - 0.5}, grid512)
        assert cert.certified
        alpha = cert.multipliers[0.0].on_grid(grid512)
        assert np.min(((grid512.z - 0.5) * alpha).real) >= cert.eps * 0.99

    def test_gain_four_refuted_and_oracle_agrees(self, grid512):
        g = RationalTf([1.0], [1.0, -2.0])
        k = RationalTf.constant(4.0)
        cert = check_stability({0.0: characteristic_data(g, k, grid512)}, grid512)
        assert cert.status == "refuted"
        assert not oracle_stability(g, k)

    def test_gain_two_certified_and_oracle_agrees(self, grid512):
        g = RationalTf([1.0], [1.0, -2.0])
        k = RationalTf.constant(2.0)
        cert = check_stability({0.0: characteristic_data(g, k, grid512)}, grid512)
        assert cert.certified
        assert oracle_stability(g, k)

    def test_zero_data_refuted_with_location(self, grid512):
        data = np.ones(512, dtype=complex)
        data[100] = 0.0
        cert = check_stability({0.0: data}, grid512)
        assert cert.status == "refuted"
        assert cert.detail["witness"]["omega"] == pytest.approx(grid512.omegas[100])

    def test_pinned_basis_can_be_inconclusive(self, grid512):
        # real part dips negative, and the pinned trivial basis cannot tilt it
        pole = 0.95 * np.exp(1.0j)
        dp = (grid512.z - pole) * (grid512.z - np.conj(pole)) / grid512.z ** 2
        cert = check_stability({0.0: dp}, grid512,
                               basis=ObfBasis(np.zeros(0, dtype=complex)))
        assert cert.status == "inconclusive"
        assert cert.detail["failed_at"] == 0.0

    def test_randomized_oracle_agreement(self, grid512):
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(40):
            g = random_proper_tf(rng)
            k = random_proper_tf(rng)
            try:
                stable = oracle_stability(g, k)
            except ValueError:
                continue
            mods = closed_loop_pole_moduli(g, k)
            if np.any(np.abs(mods - 1.0) < 1e-3):
                continue
            checked += 1
            cert = check_stability({0.0: characteristic_data(g, k, grid512)},
                                   grid512)
            assert (cert.status == "certified") == stable
        assert checked >= 25


class TestCheckPerformance:
    def make_data(self, grid, g, k):
        from lpvsyn.rational import closed_loop_maps
        maps = closed_loop_maps(g, k)
        phi = closed_loop_char_poly(g, k)
        shift = np.exp(1j * grid.omegas * (g.degree + k.degree))
        dp = np.polyval(phi, grid.z) / shift
        return ClosedLoopFactorData(
            d_p=dp,
            n_s=maps["S"].on_grid(grid) * dp,
            n_gs=maps["GS"].on_grid(grid) * dp,
            n_ks=maps["KS"].on_grid(grid) * dp,
            n_t=maps["T"].on_grid(grid) * dp)

    def unit_weights(self, grid):
        return {c: np.ones(len(grid), dtype=complex) for c in ("S", "GS", "KS", "T")}

    def test_huge_gamma_reduces_to_stability(self, grid512):
        g = RationalTf([0.4], [1.0, -0.5])
        k = RationalTf.constant(1.0)
        data = {0.0: self.make_data(grid512, g, k)}
        w = self.unit_weights(grid512)
        perf = check_performance(data, w, 1e12, grid512)
        stab = check_stability({0.0: data[0.0].d_p}, grid512)
        assert perf.status == stab.status == "certified"

    def test_below_achieved_refuted(self, grid512):
        g = RationalTf([0.4], [1.0, -0.5])
        k = RationalTf.constant(1.0)
        data = {0.0: self.make_data(grid512, g, k)}
        w = self.unit_weights(grid512)
        achieved = compute_achieved_gamma(data, w)
        cert = check_performance(data, w, 0.99 * achieved, grid512)
        assert cert.status == "refuted"
        assert cert.detail["witness"]["reason"] == "disc contains the origin"

    def test_refutation_monotone(self, grid512):
        g = RationalTf([0.4], [1.0, -0.5])
        k = RationalTf.constant(1.0)
        data = {0.0: self.make_data(grid512, g, k)}
        w = self.unit_weights(grid512)
        achieved = compute_achieved_gamma(data, w)
        for factor in (0.9, 0.5, 0.1):
            assert check_performance(data, w, factor * achieved,
                                     grid512).status == "refuted"

    def test_synthesized_controller_certifies_with_trivial_alpha(
            self, small_problem, small_lpv_result):
        data = closed_loop_data(small_problem, small_lpv_result.theta)
        weights = small_problem.weights.on_grid(small_problem.grid)
        eps = small_lpv_result.telemetry["eps"]
        cert = check_performance(data, weights, small_lpv_result.gamma,
                                 small_problem.grid, eps=eps * 0.5,
                                 basis=ObfBasis(np.zeros(0, dtype=complex)))
        assert cert.certified
        for mp in cert.multipliers.values():
            assert mp.beta.size == 0 and mp.sign == 1.0 and mp.delay == 0

    def test_soundness_ordering(self, small_problem, small_lpv_result):
        data = closed_loop_data(small_problem, small_lpv_result.theta)
        weights = small_problem.weights.on_grid(small_problem.grid)
        cert = check_performance(data, weights, small_lpv_result.gamma,
                                 small_problem.grid, eps=1e-9)
        assert cert.certified
        achieved = compute_achieved_gamma(data, weights)
        assert achieved <= small_lpv_result.gamma * (1 + 1e-6)


class TestComputeAchievedGamma:
    def test_unit_sensitivity_floor(self):
        grid = FrequencyGrid(np.linspace(0.1, 3.0, 16))
        n = len(grid)
        data = {0.0: ClosedLoopFactorData(
            d_p=np.ones(n, dtype=complex), n_s=np.ones(n, dtype=complex),
            n_gs=np.zeros(n, dtype=complex), n_ks=np.zeros(n, dtype=complex),
            n_t=np.zeros(n, dtype=complex))}
        w = {c: np.ones(n, dtype=complex) for c in ("S", "GS", "KS", "T")}
        assert compute_achieved_gamma(data, w) == pytest.approx(1.0)

    def test_homogeneous_in_weights(self, small_problem, small_lpv_result):
        data = closed_loop_data(small_problem, small_lpv_result.theta)
        w = small_problem.weights.on_grid(small_problem.grid)
        doubled = {c: 2.0 * v for c, v in w.items()}
        assert compute_achieved_gamma(data, doubled) == pytest.approx(
            2.0 * compute_achieved_gamma(data, w), rel=1e-12)

    def test_zero_characteristic_reported(self):
        grid = FrequencyGrid(np.linspace(0.1, 3.0, 4))
        data = {0.0: ClosedLoopFactorData(
            d_p=np.array([1.0, 0.0, 1.0, 1.0], dtype=complex),
            n_s=np.ones(4, dtype=complex), n_gs=np.zeros(4, dtype=complex),
            n_ks=np.zeros(4, dtype=complex), n_t=np.zeros(4, dtype=complex))}
        w = {c: np.ones(4, dtype=complex) for c in ("S", "GS", "KS", "T")}
        with pytest.raises(ValueError, match="vanishes"):
            compute_achieved_gamma(data, w)


class TestAbsorption:
    def test_stability_absorption_preserves_margins(self, grid512):
        # data needing a nontrivial multiplier: Re dips negative near the
        # lightly damped minimum-phase pair
        pole = 0.95 * np.exp(1.0j)
        base = (grid512.z - pole) * (grid512.z - np.conj(pole)) / grid512.z ** 2
        cert = check_stability({0.0: base}, grid512)
        assert cert.certified
        assert cert.multipliers[0.0].beta.size > 0
        alpha = cert.multipliers[0.0].on_grid(grid512)
        cert2 = check_stability({0.0: base * alpha}, grid512,
                                basis=ObfBasis(np.zeros(0, dtype=complex)))
        assert cert2.certified
        assert cert2.multipliers[0.0].beta.size == 0
        assert cert2.margins[0.0] == pytest.approx(cert.margins[0.0], abs=1e-6)


class TestOracle:
    def test_examples(self):
        g = RationalTf([1.0], [1.0, -2.0])
        assert oracle_stability(g, RationalTf.constant(2.0))
        assert not oracle_stability(g, RationalTf.constant(0.5))
        assert oracle_stability(RationalTf([0.2], [1.0, -0.8]),
                                RationalTf.constant(0.0))
