import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dane_sim.algorithms import (CONVERGED, DANE_HB, DANE_HB_LM, DANE_LS, GD,
                                 INEXACT_DANE, OPTION_I, OPTION_II, ROUND_LIMIT,
                                 SOLVER_FAILURE, RunConfig, Target,
                                 cluster_constants, line_search_option1,
                                 line_search_option2, momentum_beta, psi, run)
from dane_sim.cluster import build_cluster
from dane_sim.data import gen_logistic, gen_ridge
from dane_sim.errors import ConfigError, ContractViolation
from dane_sim.local_solver import (SvrgConfig, ToleranceSchedule, build_subproblem,
                                   solve_svrg)
from dane_sim.model import LossModel


def dense_parts(cluster):
    """Global and per-machine ridge Hessians plus the global minimiser."""
    mu = cluster.model.reg_mu
    def hess(obj):
        X = obj.data.features
        return X.T @ X / obj.n_samples + mu * np.eye(cluster.p)
    H = hess(cluster.objective)
    Hs = [hess(o) for o in cluster.local_objectives]
    X, y = cluster.data.features, cluster.data.labels
    w_star = np.linalg.solve(H, X.T @ y / cluster.data.n_samples)
    return H, Hs, w_star


class TestPsi:
    def test_zero_step(self, ridge_cluster):
        w = np.ones(12)
        assert psi(w, w.copy(), 0.5, 0.1, 1.0, 0.3, ridge_cluster.master_local_view()) == 0.0

    def test_dense_quadratic_form(self, ridge_cluster, rng):
        _, Hs, _ = dense_parts(ridge_cluster)
        view = ridge_cluster.master_local_view()
        gamma, rho, eta = 0.7, 0.2, 0.5
        for _ in range(5):
            w, wt = rng.standard_normal((2, 12))
            d = wt - w
            expected = eta * rho * d @ (Hs[0] + gamma * np.eye(12)) @ d
            assert psi(wt, w, eta, rho, gamma, 0.0, view) == pytest.approx(expected, rel=1e-12)

    def test_strong_convexity_bound(self, logistic_cluster, rng):
        view = logistic_cluster.master_local_view()
        mu = logistic_cluster.model.reg_mu
        for _ in range(20):
            w, wt = rng.standard_normal((2, 12))
            eta, rho, gamma, eps = rng.uniform(0.01, 1), 0.2, rng.uniform(0, 2), rng.uniform(0, 1)
            nd = np.linalg.norm(wt - w)
            lower = eta * (rho * (mu + gamma) * nd ** 2 - eps * nd)
            assert psi(wt, w, eta, rho, gamma, eps, view) >= lower - 1e-12

    def test_eta_range(self, ridge_cluster):
        with pytest.raises(ContractViolation):
            psi(np.ones(12), np.zeros(12), 0.0, 0.1, 1.0, 0.0, ridge_cluster.master_local_view())


class TestOptionI:
    def test_full_step_accepted(self, ridge_cluster, rng):
        c = cluster_constants(ridge_cluster)
        rho, mu = 0.1, c["mu_reg"]
        gamma = c["L"] / (2 * (1 - rho)) - mu + 0.01   # L <= 2(gamma+mu)(1-rho)
        w = rng.standard_normal(12)
        sub = build_subproblem(ridge_cluster, w, ridge_cluster.reduce_gradient(w), gamma)
        from dane_sim.local_solver import solve_direct
        wt = solve_direct(sub)
        eta, evals, _ = line_search_option1(ridge_cluster, w, wt, rho, gamma, 0.0)
        assert eta == 1.0 and evals == 2   # F(w_prev) plus one trial

    def test_halving_bound_and_descent(self, logistic_cluster, rng):
        c = cluster_constants(logistic_cluster)
        rho, mu = 0.1, c["mu_reg"]
        for gamma in (0.0, 0.01, 0.1):
            thresh = int(np.ceil(np.log2(c["L"] / (2 * (gamma + mu) * (1 - rho))))) + 1
            for _ in range(5):
                w = 3 * rng.standard_normal(12)
                sub = build_subproblem(logistic_cluster, w,
                                       logistic_cluster.reduce_gradient(w), gamma)
                wt, _ = solve_svrg(sub, w, 1e-10)
                v0 = logistic_cluster.evaluate_value(w)
                eta, evals, v = line_search_option1(logistic_cluster, w, wt, rho,
                                                    gamma, 0.0, value_prev=v0)
                assert evals - 1 <= max(thresh, 0)
                assert v <= v0

    def test_identical_points(self, ridge_cluster):
        w = np.ones(12)
        eta, evals, _ = line_search_option1(ridge_cluster, w, w.copy(), 0.1, 1.0, 0.0,
                                            value_prev=1.0)
        assert (eta, evals) == (1.0, 0)


class TestOptionII:
    def test_identical_points(self, logistic_cluster):
        w = np.ones(12)
        eta = line_search_option2(w, w.copy(), np.ones(12), 0.1, 1.0, 1.0, 0.0,
                                  logistic_cluster.master_local_view())
        assert eta == 1.0

    def test_dense_quadratic_test(self, ridge_cluster, rng):
        _, Hs, _ = dense_parts(ridge_cluster)
        view = ridge_cluster.master_local_view()
        rho, gamma = 0.1, 0.3
        A = Hs[0] + gamma * np.eye(12)
        for scale in (0.01, 1.0, 5.0):
            w = rng.standard_normal(12)
            g = ridge_cluster.reduce_gradient(w)
            # a deliberately bad proposal so backtracking has to act
            wt = w - scale * g
            eta = line_search_option2(w, wt, g, rho, gamma, 0.0, 0.0, view)
            d = wt - w
            psi1 = rho * d @ A @ d

            def ok(e):
                return e * g @ d + e ** 2 * d @ A @ d <= -e * psi1 + 1e-12
            assert ok(eta)
            if eta < 1.0:
                assert not ok(2 * eta)

    def test_realized_descent_under_premise(self, rng):
        data, _ = gen_logistic(400, 6, seed=11)
        cl = build_cluster(LossModel("logistic", reg_mu=0.05), data, 2, seed=0)
        c = cluster_constants(cl)
        w = rng.standard_normal(6)
        gamma = 1.05 * cl.hessian_deviation(w) + 0.05
        rho = 0.1
        g = cl.reduce_gradient(w)
        sub = build_subproblem(cl, w, g, gamma)
        for eps in (1e-3, 1e-6):
            wt, _ = solve_svrg(sub, w, eps)
            eta = line_search_option2(w, wt, g, rho, gamma, c["nu"], eps,
                                      cl.master_local_view())
            assert cl.evaluate_value(w + eta * (wt - w)) <= cl.evaluate_value(w)


class TestMomentumBeta:
    def test_values(self):
        assert momentum_beta(1.0, 0.0) == 0.0
        assert momentum_beta(1.0, 4.0) == pytest.approx(4.0 / 9.0, abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-4, 1e3), st.floats(0, 1e4), st.floats(1e-6, 1e4))
    def test_increasing_in_gamma(self, mu, gamma, step):
        a, b = momentum_beta(mu, gamma), momentum_beta(mu, gamma + step)
        assert 0 <= a <= b < 1

    def test_contract(self):
        with pytest.raises(ContractViolation):
            momentum_beta(0.0, 1.0)


class TestDaneLS:
    def test_single_machine_exact(self, small_ridge):
        cl = build_cluster(*small_ridge, 1)
        tr = run(cl, RunConfig(DANE_LS, gamma=0.0, inner_solver="direct",
                               target=Target("grad_norm", 1e-9)))
        assert tr.status == CONVERGED and tr.rounds_to_target() == 1

    def test_option2_round_count(self, logistic_cluster):
        cfg = RunConfig(DANE_LS, gamma=1.0, line_search=OPTION_II, max_rounds=8,
                        target=Target("grad_norm", 1e-12))
        tr = run(logistic_cluster, cfg)
        assert tr.status == ROUND_LIMIT
        # one reduce per outer round plus the reduce at w^(0)
        assert tr.final.ledger.rounds - 1 == tr.iterations == 8

    def test_option1_round_count_and_descent(self, logistic_cluster):
        cfg = RunConfig(DANE_LS, gamma=1.0, line_search=OPTION_I, max_rounds=8,
                        target=Target("grad_norm", 1e-12))
        tr = run(logistic_cluster, cfg)
        led = tr.final.ledger
        assert led.rounds - 1 == tr.iterations + led.value_rounds
        values = [r.value for r in tr.records]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_transcript_invariants(self, ridge_cluster):
        cfg = RunConfig(DANE_LS, gamma=0.5, max_rounds=5,
                        target=Target("grad_norm", 1e-300))
        tr = run(ridge_cluster, cfg)
        assert len(tr.records) <= 6
        snaps = [r.ledger for r in tr.records]
        for a, b in zip(snaps, snaps[1:]):
            assert b.rounds >= a.rounds and b.vectors_transmitted >= a.vectors_transmitted
            assert b.ifo_calls >= a.ifo_calls
        assert snaps[-1].vectors_transmitted == \
            (snaps[-1].rounds - snaps[-1].value_rounds) * (ridge_cluster.m + 1) \
            + snaps[-1].value_rounds

    def test_solver_failure_status(self, logistic_cluster):
        cfg = RunConfig(DANE_LS, gamma=1.0, svrg=SvrgConfig(max_epochs=0))
        tr = run(logistic_cluster, cfg)
        assert tr.status == SOLVER_FAILURE and "SolverNonConvergence" in tr.message

    def test_local_argmin_init(self, ridge_cluster):
        cfg = RunConfig(DANE_LS, gamma=0.5, init="local_argmin", max_rounds=0)
        w0 = run(ridge_cluster, cfg).records[0].w
        assert np.linalg.norm(ridge_cluster.master_local_view().gradient(w0)) <= 1e-6

    def test_config_errors(self, ridge_cluster):
        with pytest.raises(ConfigError):
            RunConfig(DANE_LS, gamma=1.0, line_search=OPTION_I, rho=0.5)
        with pytest.raises(ConfigError):
            RunConfig("newton")
        with pytest.raises(ConfigError):
            run(ridge_cluster, RunConfig(DANE_LS))


class TestDaneHB:
    @pytest.mark.parametrize("fixture", ["ridge_cluster", "logistic_cluster"])
    def test_zero_beta_is_dane(self, fixture, request):
        cl = request.getfixturevalue(fixture)
        sched = ToleranceSchedule("fixed", value=1e-7)
        common = dict(gamma=0.8, schedule=sched, max_rounds=6,
                      target=Target("grad_norm", 1e-300), seed=3)
        ls = run(cl.fresh_copy(), RunConfig(DANE_LS, **common))
        hb = run(cl.fresh_copy(), RunConfig(DANE_HB, beta_override=0.0, **common))
        assert len(ls.records) == len(hb.records)
        for a, b in zip(ls.records, hb.records):
            assert a.w.tobytes() == b.w.tobytes()
            assert a.ledger == b.ledger

    def test_beats_ls_on_ill_conditioned_ridge(self):
        data, _ = gen_ridge(1000, 50, seed=21)
        cl = build_cluster(LossModel("ridge", reg_mu=1e-3), data, 4, seed=0)
        cfg = dict(gamma=0.2, max_rounds=500, target=Target("grad_norm", 1e-6))
        ls = run(cl.fresh_copy(), RunConfig(DANE_LS, **cfg))
        hb = run(cl.fresh_copy(), RunConfig(DANE_HB, **cfg))
        assert hb.status == ls.status == CONVERGED
        assert hb.rounds_to_target() < ls.rounds_to_target()

    def test_safeguard_flag(self, logistic_cluster):
        cfg = RunConfig(DANE_HB, gamma=0.5, hb_line_search=True, beta_override=0.999,
                        max_rounds=30, target=Target("grad_norm", 1e-300))
        tr = run(logistic_cluster, cfg)
        assert tr.status in (ROUND_LIMIT, SOLVER_FAILURE, CONVERGED)
        assert {r.flag for r in tr.records} <= {"", "momentum_forced"}


class TestDaneHBLM:
    def test_ridge_halving(self):
        data, _ = gen_ridge(400, 20, seed=2)
        cl = build_cluster(LossModel("ridge", reg_mu=0.01), data, 4, seed=0)
        _, _, w_star = dense_parts(cl)
        f_star = cl.objective.value(w_star)
        tr = run(cl, RunConfig(DANE_HB_LM, gamma=0.3, max_rounds=40,
                               target=Target("grad_norm", 1e-9)))
        assert tr.status == CONVERGED
        gap0 = tr.records[0].value - f_star
        for r in tr.records:
            assert r.value - f_star <= 2.0 ** -r.t * gap0 + 1e-12

    def test_logistic_monotone(self, logistic_cluster):
        tr = run(logistic_cluster, RunConfig(DANE_HB_LM, gamma=0.5, max_rounds=40,
                                             target=Target("grad_norm", 1e-6)))
        assert tr.status == CONVERGED
        values = [r.value for r in tr.records]
        assert all(b <= a for a, b in zip(values, values[1:]))


class TestInexactDane:
    def test_single_machine_equals_dane(self, small_logistic):
        cl = build_cluster(*small_logistic, 1)
        common = dict(gamma=0.4, max_rounds=5, target=Target("grad_norm", 1e-300), seed=1)
        a = run(cl.fresh_copy(), RunConfig(DANE_LS, **common))
        b = run(cl.fresh_copy(), RunConfig(INEXACT_DANE, **common))
        assert [r.w.tobytes() for r in a.records] == [r.w.tobytes() for r in b.records]

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_dense_affine_map(self, m):
        data, _ = gen_ridge(120, 8, seed=m)
        cl = build_cluster(LossModel("ridge", reg_mu=0.02), data, m, seed=1)
        H, Hs, w_star = dense_parts(cl)
        gamma = 0.3
        tr = run(cl, RunConfig(INEXACT_DANE, gamma=gamma, inner_solver="direct",
                               max_rounds=3, target=Target("grad_norm", 1e-300)))
        I = np.eye(8)
        M = sum(I - np.linalg.solve(Hj + gamma * I, H) for Hj in Hs) / m
        for a, b in zip(tr.records, tr.records[1:]):
            np.testing.assert_allclose(b.w - w_star, M @ (a.w - w_star), atol=1e-9)
        assert tr.records[1].ledger.rounds == 3   # reduce, average, reduce


class TestGD:
    def test_contraction_in_H_norm(self, ridge_cluster):
        H, _, w_star = dense_parts(ridge_cluster)
        ev = np.linalg.eigvalsh(H)
        kappa = ev[-1] / ev[0]
        tr = run(ridge_cluster, RunConfig(GD, max_rounds=20, target=Target("grad_norm", 1e-300)))
        def hn(w):
            e = w - w_star
            return np.sqrt(e @ H @ e)
        for a, b in zip(tr.records, tr.records[1:]):
            assert hn(b.w) <= (1 - 1 / kappa) * hn(a.w) + 1e-12

    def test_bound_on_well_conditioned(self):
        data, _ = gen_ridge(2000, 10, seed=4)
        cl = build_cluster(LossModel("ridge", reg_mu=0.5), data, 2)
        H, _, w_star = dense_parts(cl)
        ev = np.linalg.eigvalsh(H)
        kappa, L = ev[-1] / ev[0], ev[-1]
        assert kappa <= 10
        eps = 1e-8
        tr = run(cl, RunConfig(GD, max_rounds=1000, target=Target("iterate_error", eps, w_star=w_star)))
        bound = int(np.ceil(kappa * np.log(kappa * np.linalg.norm(w_star) ** 2 * L / eps)))
        assert tr.status == CONVERGED and tr.rounds_to_target() <= bound

    def test_m_invariance(self):
        data, _ = gen_ridge(240, 6, seed=5)
        model = LossModel("ridge", reg_mu=0.1)
        cfg = RunConfig(GD, max_rounds=10, target=Target("grad_norm", 1e-300))
        ws = [run(build_cluster(model, data, m, seed=m), cfg).final.w for m in (1, 4, 8)]
        for w in ws[1:]:
            np.testing.assert_allclose(w, ws[0], atol=1e-12)
