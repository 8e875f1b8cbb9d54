"""Audit suites behind ``dane-sim verify``."""
import numpy as np

from . import oracles as orc
from .algorithms import RunConfig, Target, cluster_constants, run_dane_ls
from .cluster import build_cluster
from .data import gen_logistic, gen_ridge
from .model import LossModel, gradient


def lemma_reports(quick=False, seed=0):
    k = 4 if quick else 1
    reps = [orc.precondition_audit(200 // k, seed=seed),
            orc.heavy_ball_audit(500 // k, seed=seed)]
    model, data = orc.logistic_lipschitz_instance(seed=seed)
    reps.append(orc.lipschitz_hessian_audit(model, data, 200 // k, seed=seed))
    reps.append(gradient_report(50 // k, seed=seed))
    return reps


def gradient_report(n_points=50, seed=0, tol=1e-5):
    """Relative error of analytic vs central-difference gradients."""
    rng = np.random.default_rng(seed)
    rep = orc.OracleReport("fd_gradient")
    for kind, gen in (("ridge", gen_ridge), ("logistic", gen_logistic)):
        data, _ = gen(100, 10, seed=seed)
        model = LossModel(kind, reg_mu=0.01)
        for _ in range(n_points):
            w = rng.standard_normal(10)
            g = gradient(model, data, w)
            fd = orc.fd_gradient(model, data, w, h=1e-6)
            rel = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-300)
            rep.add(rel, tol, kind)
    return rep


def contraction_reports(quick=False, seed=0):
    """DANE-LS on ridge (N=2000, p=200, m=2) audited round by round."""
    N, p = (1000, 100) if quick else (2000, 200)
    data, _ = gen_ridge(N, p, seed=seed)
    cluster = build_cluster(LossModel("ridge", reg_mu=1.0 / np.sqrt(N)), data, 2,
                            seed=seed)
    consts = cluster_constants(cluster)
    gamma = orc.recommended_gamma(consts["L"], p, cluster.n, 0.1)
    w0 = np.zeros(p)
    H = cluster.objective.hessian_matrix(w0)
    w_star = np.linalg.solve(H, H @ w0 - cluster.objective.gradient(w0))
    prem = orc.OracleReport("deviation_premise")
    prem.add(orc.hessian_deviation_dense(cluster, w0), gamma)
    cfg = RunConfig(gamma=gamma, target=Target("iterate_error", 1e-5, w_star=w_star))
    tr = run_dane_ls(cluster, cfg)
    mu = consts["mu_hessian"]
    reps = [prem, orc.quadratic_contraction_check(tr, H, w_star, mu, gamma)]
    rounds = [(cur.w_tilde, prev.w, cur.eps_t)
              for prev, cur in zip(tr.records, tr.records[1:])]
    reps.append(orc.grad_bound_check(cluster, rounds, gamma, mu=mu, w_star=w_star))
    reps.append(orc.certificate_check(cluster, tr, gamma))
    reps.append(orc.ledger_identity_check(tr))
    bound = orc.round_bound("T1", {"L": consts["L"], "mu": mu, "gamma": gamma}, 1e-5,
                            {"dist0": float(np.linalg.norm(w0 - w_star))})
    rb = orc.OracleReport("round_bound_T1")
    rtt = tr.rounds_to_target()
    rb.add(np.inf if rtt is None else rtt, bound.rounds)
    reps.append(rb)
    return reps


def run_suite(name, quick=False):
    reps = []
    if name in ("lemmas", "all"):
        reps += lemma_reports(quick)
    if name in ("contraction", "all"):
        reps += contraction_reports(quick)
    return reps
