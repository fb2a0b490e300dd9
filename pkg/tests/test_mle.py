import numpy as np
import pytest
from scipy import optimize

from nsextremes import cases, gpd, mle
from nsextremes.basis import BasisSpec, param_curve
from nsextremes.errors import ContractError
from nsextremes.gpd import PeaksSample
from nsextremes.model import CoefficientState, Design

CONST = BasisSpec.constant()


def stationary_sample(n, xi, sigma, seed):
    r = np.random.default_rng(seed)
    return PeaksSample(gpd.sample_gpd(xi, sigma, r, size=n), r.uniform(0, 360, n))


class TestPenalisedNLL:
    def test_constant_unpenalised(self):
        s = stationary_sample(200, 0.1, 1.0, 0)
        d = Design.build(CONST, CONST, s.angles)
        state = CoefficientState([0.1], [1.1], 0.0, 0.0)
        assert mle.penalised_nll(s, d, state) == pytest.approx(-gpd.log_likelihood(s.sizes, 0.1, 1.1))

    def test_constant_coefficients_in_spline_nullspace(self):
        s = stationary_sample(100, 0.1, 1.0, 1)
        spec = BasisSpec.spline(p=8)
        d = Design.build(spec, spec, s.angles)
        state = CoefficientState(np.full(8, 0.1), np.full(8, 1.1), 1e3, 1e3)
        assert mle.penalised_nll(s, d, state) == pytest.approx(-gpd.log_likelihood(s.sizes, 0.1, 1.1),
                                                               rel=1e-12)

    def test_componentwise(self, rng):
        s = stationary_sample(150, 0.0, 1.0, 2)
        spec = BasisSpec.fourier(order=2)
        d = Design.build(spec, spec, s.angles)
        bx = np.r_[0.05, 0.02 * rng.normal(size=4)]
        bn = np.r_[1.5, 0.05 * rng.normal(size=4)]
        state = CoefficientState(bx, bn, 2.0, 3.0)
        params = d.pointwise(state)
        manual = (gpd.neg_log_likelihood(s, params) + 0.5 * 2.0 * bx @ d.xi.R @ bx
                  + 0.5 * 3.0 * bn @ d.nu.R @ bn)
        np.testing.assert_allclose(mle.penalised_nll(s, d, state), manual, rtol=1e-12)

    def test_infeasible_and_mismatch(self):
        s = stationary_sample(10, 0.0, 1.0, 3)
        d = Design.build(CONST, CONST, s.angles)
        assert mle.penalised_nll(s, d, CoefficientState([-1.5], [1.0], 0.0, 0.0)) == np.inf
        with pytest.raises(ContractError):
            mle.penalised_nll(s.subset([0, 1]), d, CoefficientState([0.0], [1.0], 0.0, 0.0))


class TestIRLS:
    def test_stationary_consistency(self):
        s = stationary_sample(10_000, 0.2, 1.0, 11)
        d = Design.build(CONST, CONST, s.angles)
        fit = mle.irls_fit(s, d, 0.0, 0.0)
        xi = fit.state.beta_xi[0]
        assert fit.converged
        assert abs(xi - 0.2) < 0.05
        assert abs(gpd.sigma_from_nu(xi, fit.state.beta_nu[0]) - 1.0) < 0.05

    @pytest.mark.parametrize("kind", ["spline", "fourier", "gp"])
    def test_monotone(self, case1_sample, kind):
        spec = BasisSpec.default(kind)
        d = Design.build(spec, spec, case1_sample.angles)
        fit = mle.irls_fit(case1_sample, d, 1.0, 1.0)
        assert len(fit.history) == fit.iterations + 1
        assert np.all(np.diff(fit.history) <= 0.0)

    @pytest.mark.parametrize("kind", ["spline", "fourier", "gp"])
    def test_converges(self, case1_sample, kind):
        spec = BasisSpec.default(kind)
        d = Design.build(spec, spec, case1_sample.angles)
        fit = mle.irls_fit(case1_sample, d, 10.0, 10.0)
        assert fit.converged and fit.iterations <= mle.IRLSControls().max_iter
        assert np.isfinite(fit.penalised_nll)

    def test_fixed_point(self, case1_sample):
        spec = BasisSpec.spline(p=10)
        d = Design.build(spec, spec, case1_sample.angles)
        first = mle.irls_fit(case1_sample, d, 10.0, 10.0)
        again = mle.irls_fit(case1_sample, d, 10.0, 10.0, init=first.state,
                             controls=mle.IRLSControls(max_iter=1))
        assert abs(again.penalised_nll - first.penalised_nll) <= 1e-8 * abs(first.penalised_nll)

    @pytest.mark.parametrize("kind", ["spline", "fourier", "gp"])
    def test_penalty_limit(self, case1_sample, kind):
        spec = BasisSpec.spline(p=20) if kind == "spline" else (
            BasisSpec.fourier(order=5) if kind == "fourier" else BasisSpec.gaussian_process(p=20))
        d = Design.build(spec, spec, case1_sample.angles)
        grid = np.arange(360.0)
        spread = {}
        for lam in (1e-3, 1e6):
            state = mle.irls_fit(case1_sample, d, lam, lam).state
            spread[lam] = np.array([np.ptp(param_curve(spec, state.beta_xi, grid)),
                                    np.ptp(param_curve(spec, state.beta_nu, grid))])
        assert np.all(spread[1e6] < 0.05 * spread[1e-3])

    def test_permutation_equivariance(self, case1_sample):
        spec = BasisSpec.spline(p=12)
        d = Design.build(spec, spec, case1_sample.angles)
        perm = np.random.default_rng(0).permutation(len(case1_sample))
        a = mle.irls_fit(case1_sample, d, 10.0, 10.0)
        b = mle.irls_fit(case1_sample.subset(perm), d.subset(perm), 10.0, 10.0)
        np.testing.assert_allclose(a.state.beta_xi, b.state.beta_xi, atol=1e-10)
        np.testing.assert_allclose(a.state.beta_nu, b.state.beta_nu, atol=1e-10)

    def test_infeasible_init(self):
        s = stationary_sample(20, 0.0, 1.0, 4)
        d = Design.build(CONST, CONST, s.angles)
        with pytest.raises(ContractError, match="infeasible"):
            mle.irls_fit(s, d, 0.0, 0.0, init=CoefficientState([-0.9], [0.01]))

    def test_generic_optimiser_oracle(self):
        s = cases.simulate_sample(cases.builtin_case("case1"), np.random.default_rng(3), fixed_n=50)
        spec = BasisSpec.spline(p=5)
        d = Design.build(spec, spec, s.angles)
        lam = 10.0
        fit = mle.irls_fit(s, d, lam, lam)

        def f(x):
            return mle.penalised_nll(s, d, CoefficientState(x[:5], x[5:], lam, lam))

        r = np.random.default_rng(5)
        best = np.inf
        for _ in range(20):
            x0 = np.r_[r.uniform(-0.1, 0.3, 5), r.uniform(2.0, 4.0, 5)]
            if not np.isfinite(f(x0)):
                continue
            res = optimize.minimize(f, x0, method="Nelder-Mead",
                                    options=dict(maxiter=40_000, maxfev=40_000, xatol=1e-9, fatol=1e-12))
            best = min(best, res.fun)
        assert np.isfinite(best)
        assert fit.penalised_nll <= best + 1e-4

    def test_stationary_init_broadcast(self, case1_sample):
        fourier = BasisSpec.fourier(order=3)
        state = mle.stationary_init(case1_sample, BasisSpec.spline(p=6), fourier)
        assert np.ptp(state.beta_xi) == 0.0
        assert np.all(state.beta_nu[1:] == 0.0) and state.beta_nu[0] > 0.0
        with pytest.raises(ContractError):
            mle.stationary_init(PeaksSample([], []), CONST, CONST)


class TestCrossValidate:
    def test_single_point_grid(self, case1_sample):
        spec = BasisSpec.spline(p=6)
        cv = mle.cross_validate(case1_sample, spec, spec, [3.0], [7.0], k=3, rng=0)
        assert cv.lambdas == (3.0, 7.0)

    def test_constant_grid_collapses(self):
        s = stationary_sample(100, 0.0, 1.0, 5)
        cv = mle.cross_validate(s, CONST, CONST, k=3, rng=0)
        assert cv.scores.shape == (1, 1)

    def test_tie_prefers_larger(self, monkeypatch):
        s = stationary_sample(30, 0.0, 1.0, 6)
        monkeypatch.setattr(mle, "_cv_pair", lambda job, **kw: (1.0, None))
        spec = BasisSpec.spline(p=4)
        cv = mle.cross_validate(s, spec, spec, [1.0, 10.0], [2.0, 20.0], k=2, rng=0)
        assert cv.lambdas == (10.0, 20.0)

    def test_failures_score_infinite(self, monkeypatch):
        s = stationary_sample(30, 0.0, 1.0, 6)

        def fake(job, **kw):
            return (np.inf, "boom") if job[0] < 5 else (2.0, None)

        monkeypatch.setattr(mle, "_cv_pair", fake)
        spec = BasisSpec.spline(p=4)
        cv = mle.cross_validate(s, spec, spec, [1.0, 10.0], [2.0], k=2, rng=0)
        assert cv.lambda_xi == 10.0 and cv.failures == ["boom"]

    def test_argmin_beats_endpoints(self, case1_sample):
        spec = BasisSpec.spline(p=10)
        grid = [1e-1, 1e1, 1e3, 1e5]
        cv = mle.cross_validate(case1_sample, spec, spec, grid, grid, k=5, rng=1)
        best = cv.scores.min()
        assert best <= cv.scores[0, 0] and best <= cv.scores[-1, -1]
        assert np.isfinite(best)

    def test_contract(self, case1_sample):
        with pytest.raises(ContractError):
            mle.cross_validate(case1_sample, CONST, CONST, k=1)
        with pytest.raises(ContractError):
            mle.cross_validate(case1_sample, CONST, CONST, grid_xi=[], k=2)

    @pytest.mark.slow
    @pytest.mark.xfail(strict=True, reason="argmin CV picks a rougher xi penalty in 6 of these 10 "
                                           "replications; held-out NLL gaps are ~1-3 nats of noise")
    def test_stationary_selects_smooth(self):
        spec = BasisSpec.fourier(order=2)
        grid = np.logspace(-3, 6, 10)
        hits = 0
        for rep in range(10):
            s = stationary_sample(1000, 0.1, 1.0, 200 + rep)
            cv = mle.cross_validate(s, spec, spec, grid, grid, k=5, rng=rep)
            hits += cv.lambda_xi >= grid[-2] and cv.lambda_nu >= grid[-2]
        assert hits >= 8


class TestBootstrap:
    def test_identity_resample(self, case1_sample):
        spec = BasisSpec.spline(p=6)
        d = Design.build(spec, spec, case1_sample.angles)
        tight = mle.IRLSControls(tol=1e-15, max_iter=500)
        fit = mle.irls_fit(case1_sample, d, 10.0, 10.0, controls=tight)
        draws = mle.bootstrap(case1_sample, spec, spec, (10.0, 10.0), m_bs=1, init=fit.state,
                              indices=[np.arange(len(case1_sample))], controls=tight)
        np.testing.assert_allclose(draws.states[0].beta_xi, fit.state.beta_xi, atol=1e-7)
        np.testing.assert_allclose(draws.states[0].beta_nu, fit.state.beta_nu, atol=1e-7)
        assert draws.states[0].lambda_xi == 10.0 and draws.source == "bootstrap"

    def test_sd_matches_fisher(self):
        n = 10_000
        s = stationary_sample(n, 0.1, 1.0, 21)
        draws = mle.bootstrap(s, CONST, CONST, (1e-3, 1e-3), m_bs=100, rng=22)
        sd = np.std([st.beta_xi[0] for st in draws.states], ddof=1)
        xi_hat = np.mean([st.beta_xi[0] for st in draws.states])
        asym = (1 + xi_hat) / np.sqrt(n)
        assert abs(sd / asym - 1) < 0.25
        assert draws.elapsed_hours > 0

    def test_default_and_contract(self, case1_sample):
        import inspect
        assert inspect.signature(mle.bootstrap).parameters["m_bs"].default == 100
        with pytest.raises(ContractError):
            mle.bootstrap(case1_sample, CONST, CONST, (1.0, 1.0), m_bs=0)
        with pytest.raises(ContractError):
            mle.bootstrap(case1_sample, CONST, CONST, (1.0, 1.0), m_bs=2, indices=[np.arange(3)])


def test_fit_mle_end_to_end():
    s = stationary_sample(300, 0.0, 1.0, 31)
    spec = BasisSpec.spline(p=5)
    cv, fit, draws = mle.fit_mle(s, spec, spec, grid_xi=[1.0, 1e3], grid_nu=[1.0, 1e3], k=3, m_bs=5, rng=0)
    assert fit.converged and len(draws) == 5
    assert cv.lambda_xi in (1.0, 1e3)
