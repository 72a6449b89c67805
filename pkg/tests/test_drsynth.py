import numpy as np
import pytest

from drlqr.ambiguity import AmbiguityConfig, MomentAmbiguity
from drlqr.drsynth import DrSynthesisError, synth_full, synth_rhc
from drlqr.matcore import SymMatrix, as_matrix, psd_sqrt
from drlqr.riccati import dr_covariance, value_iteration
from drlqr.stability import (ClosedLoop, closed_loop_value_matrix,
                             dr_certify_mss)
from drlqr.sysmodel import CostWeights, DisturbanceMoments, MultNoiseSystem

CFG = AmbiguityConfig(beta=0.05)


def _amb(mu_hat, sigma_hat, rho_mu, rho_sigma):
    return MomentAmbiguity(mu_hat=np.asarray(mu_hat, dtype=float),
                           sigma_hat=SymMatrix(np.atleast_2d(sigma_hat)),
                           rho_mu=rho_mu, rho_sigma=rho_sigma, config=CFG, M=1000)


@pytest.fixture
def amb6_small():
    """Modest radii the double-integrator system can comfortably absorb."""
    return _amb(np.zeros(2), np.eye(2), 0.05, 1.5)


class TestSynthFull:
    def test_gain_consistent_with_variables(self, sys6, cost6, amb6_small):
        res = synth_full(sys6, amb6_small, cost6)
        assert np.linalg.norm(res.controller.K @ res.W - res.V) <= 1e-10 * (1 + np.linalg.norm(res.V))
        assert np.allclose(as_matrix(res.controller.P) @ res.W, np.eye(2), atol=1e-8)
        assert np.isclose(res.trace_W, np.trace(res.W))
        assert res.controller.method == "dr_full"
        assert res.controller.cost_kind == "upper_bound"

    def test_zero_mean_radius_matches_covariance_method(self, sys6, cost6):
        amb = _amb(np.zeros(2), np.eye(2), 0.0, 1.5)
        res = synth_full(sys6, amb, cost6)
        cov = dr_covariance(sys6, np.zeros(2), amb, cost6, tol=1e-10)
        P_full, P_cov = as_matrix(res.controller.P), as_matrix(cov.P)
        assert np.linalg.norm(P_full - P_cov) <= 1e-2 * np.linalg.norm(P_cov)
        assert np.linalg.norm(res.controller.K - cov.K) <= 1e-2 * (1 + np.linalg.norm(cov.K))

    def test_oversized_set_infeasible(self, scalar_sys, scalar_cost):
        amb = _amb(np.zeros(1), 0.5 * np.eye(1), 0.0, 2.2)
        with pytest.raises(DrSynthesisError):
            synth_full(scalar_sys, amb, scalar_cost)

    def test_passes_own_certificate_densely(self, sys6, cost6, amb6_small):
        res = synth_full(sys6, amb6_small, cost6, certify=False)
        cl = ClosedLoop(sys=sys6, K=res.controller.K)
        assert dr_certify_mss(cl, amb6_small, mean_grid=24)

    def test_bound_valid_on_sampled_moments(self, sys6, cost6, amb6_small):
        """tr(P_cl) stays within the certified bound for in-set moments.

        Moments are drawn with whitened mean offset of norm up to rho_mu and
        covariance between 0.3 and 0.95 of the inflated envelope.
        """
        res = synth_full(sys6, amb6_small, cost6)
        cl = ClosedLoop(sys=sys6, K=res.controller.K)
        half = as_matrix(psd_sqrt(as_matrix(amb6_small.sigma_hat)))
        rng = np.random.default_rng(0)
        for _ in range(25):
            d = rng.standard_normal(2)
            d *= rng.uniform(0.0, 1.0) / np.linalg.norm(d)
            mu = amb6_small.mu_hat + amb6_small.rho_mu * half @ d
            scale = rng.uniform(0.3, 0.95)
            sigma = scale * amb6_small.rho_sigma * as_matrix(amb6_small.sigma_hat)
            m = DisturbanceMoments(mu=mu, sigma=SymMatrix(sigma))
            P_cl = as_matrix(closed_loop_value_matrix(cl, m, cost6))
            assert np.trace(P_cl) <= 1.02 * res.cost_bound

    def test_bound_monotone_in_radii(self, sys6, cost6):
        bounds = []
        for rho_mu, rho_sigma in [(0.0, 1.0), (0.02, 1.3), (0.05, 1.6)]:
            res = synth_full(sys6, _amb(np.zeros(2), np.eye(2), rho_mu, rho_sigma), cost6)
            bounds.append(res.cost_bound)
        assert bounds[0] <= bounds[1] * 1.001
        assert bounds[1] <= bounds[2] * 1.001

    def test_dimension_mismatch(self, sys6, cost6):
        amb = _amb(np.zeros(1), np.eye(1), 0.0, 1.5)
        with pytest.raises(Exception):
            synth_full(sys6, amb, cost6)


class TestSynthRhc:
    def test_zero_initial_state(self, sys6, cost6, amb6_small):
        res = synth_rhc(sys6, amb6_small, cost6, np.zeros(2))
        assert res.cost_bound <= 1e-6

    def test_gamma_no_worse_than_full(self, sys6, cost6, amb6_small):
        x0 = np.array([2.0, 2.0])
        rhc = synth_rhc(sys6, amb6_small, cost6, x0)
        full = synth_full(sys6, amb6_small, cost6)
        full_bound = float(x0 @ as_matrix(full.controller.P) @ x0)
        assert rhc.cost_bound <= full_bound * (1.0 + 1e-3)
        assert rhc.controller.method == "dr_rhc"

    def test_noiseless_matches_lqr(self):
        """With no multiplicative noise and a point set, gamma is x0'P x0."""
        sys = MultNoiseSystem(A0=np.array([[0.9, 0.1], [0.0, 0.8]]),
                              A=(np.zeros((2, 2)),),
                              B0=np.array([[0.0], [1.0]]),
                              B=(np.zeros((2, 1)),))
        cost = CostWeights(Q=np.eye(2), R=np.array([[1.0]]))
        amb = _amb(np.zeros(1), np.eye(1), 0.0, 1.0)
        m = DisturbanceMoments(mu=np.zeros(1), sigma=SymMatrix(np.eye(1)))
        x0 = np.array([1.0, -1.0])
        rhc = synth_rhc(sys, amb, cost, x0)
        ref = value_iteration(sys, m, cost, tol=1e-12)
        exact = float(x0 @ as_matrix(ref.P) @ x0)
        assert abs(rhc.cost_bound - exact) <= 1e-3 * exact

    def test_bad_x0_length(self, sys6, cost6, amb6_small):
        with pytest.raises(Exception):
            synth_rhc(sys6, amb6_small, cost6, np.zeros(3))
