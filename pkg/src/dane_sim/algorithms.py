"""Outer loops of DANE-type methods on a simulated cluster.

* ``dane_ls``       DANE with backtracking line search (global value
                    evaluation, Option I, or local cubic model, Option II)
* ``dane_hb``       DANE with heavy-ball momentum
* ``dane_hb_lm``    heavy-ball DANE run on successive quadratic surrogates
                    of a linear-model loss
* ``inexact_dane``  every machine solves its own subproblem, master averages
* ``gd``            distributed gradient descent with step 1/L

Every run starts with one gradient reduce at ``w0``, so a run of ``T``
iterations without value evaluations ends with ``T + 1`` ledger rounds.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .cluster import LedgerSnapshot
from .data import STREAM_SOLVER, substream
from .errors import ConfigError, ContractViolation, LineSearchFailure, \
    NumericError, SolverNonConvergence
from .local_solver import (GLOBAL_DANE_LS, HB_LM_OUTER, LOCAL_DANE_LS, LOCAL_HB,
                           QUADRATIC_DANE_LS, QUADRATIC_HB, SvrgConfig,
                           ToleranceSchedule, build_subproblem, solve_subproblem,
                           TOLERANCE_FLOOR, tolerance)
from .model import (gram_max_eigenvalue, gram_min_eigenvalue, smoothness_profile,
                    surrogate_quadratic)

log = logging.getLogger(__name__)

DANE_LS = "dane_ls"
DANE_HB = "dane_hb"
DANE_HB_LM = "dane_hb_lm"
INEXACT_DANE = "inexact_dane"
GD = "gd"
ALGORITHMS = (DANE_LS, DANE_HB, DANE_HB_LM, INEXACT_DANE, GD)

OPTION_I = "option1"
OPTION_II = "option2"

CONVERGED = "Converged"
ROUND_LIMIT = "RoundLimit"
SOLVER_FAILURE = "SolverFailure"

ETA_MIN = 2.0 ** -60
HB_ETA_MIN = 2.0 ** -20


@dataclass(frozen=True)
class Target:
    """Stopping rule: ``grad_norm``, ``suboptimality`` or ``iterate_error``."""

    kind: str = "grad_norm"
    eps: float = 1e-5
    w_star: np.ndarray = None
    f_star: float = None

    def __post_init__(self):
        if self.kind not in ("grad_norm", "suboptimality", "iterate_error"):
            raise ConfigError(f"unknown target {self.kind!r}")
        if not self.eps > 0:
            raise ConfigError("target eps must be > 0")
        if self.kind == "iterate_error" and self.w_star is None:
            raise ConfigError("iterate_error target needs w_star")
        if self.kind == "suboptimality" and self.f_star is None:
            raise ConfigError("suboptimality target needs f_star")

    def met(self, w, value, grad_norm):
        if self.kind == "grad_norm":
            return grad_norm <= self.eps
        if self.kind == "suboptimality":
            return value - self.f_star <= self.eps
        return float(np.linalg.norm(w - self.w_star)) <= self.eps


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one run.

    ``gamma=None`` means "must be supplied by the caller"; runs refuse it.
    ``mu_source`` picks the strong-convexity constant used for momentum
    and tolerances: ``hessian`` (certified lambda_min of the global
    Hessian, equal to ``reg_mu`` for non-quadratic losses) or ``reg``.
    """

    algorithm: str = DANE_LS
    gamma: float = None
    rho: float = 0.1
    line_search: str = None
    beta_override: float = None
    init: str = "zero"
    schedule: ToleranceSchedule = None
    max_rounds: int = 200
    target: Target = field(default_factory=Target)
    inner_solver: str = "auto"
    svrg: SvrgConfig = field(default_factory=SvrgConfig)
    mu_source: str = "hessian"
    hb_line_search: bool = False
    inner_max_rounds: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.gamma is not None and self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.line_search not in (None, OPTION_I, OPTION_II):
            raise ConfigError(f"unknown line search {self.line_search!r}")
        if (self.line_search is not None or self.hb_line_search) \
                and not 0 < self.rho < 1.0 / 3.0:
            raise ConfigError("rho must lie in (0, 1/3)")
        if self.init not in ("zero", "local_argmin"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.mu_source not in ("hessian", "reg"):
            raise ConfigError(f"unknown mu_source {self.mu_source!r}")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    t: int
    w: np.ndarray
    value: float
    grad_norm: float
    eta: float
    eps_t: float
    inner_ifo: int
    ledger: LedgerSnapshot
    step_norm: float = 0.0          # ||w_tilde - w^(t-1)||
    certificate: float = 0.0        # re-measured ||grad P(w_tilde)||
    w_tilde: np.ndarray = None
    flag: str = ""


@dataclass
class RunTranscript:
    algorithm: str
    m: int
    records: list = field(default_factory=list)
    status: str = ROUND_LIMIT
    message: str = ""
    target: Target = None
    constants: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.records[-1]

    @property
    def iterations(self):
        return self.records[-1].t

    def rounds_to_target(self):
        """Ledger rounds spent until the target first held, excluding the
        initial gradient reduce; ``None`` when never reached."""
        for r in self.records:
            if self.target.met(r.w, r.value, r.grad_norm):
                return r.ledger.rounds - 1
        return None


# ---------------------------------------------------------------------------
# constants


def momentum_beta(mu, gamma):
    """(1 - sqrt(mu/(mu + 2 gamma)))^2."""
    if not mu > 0:
        raise ContractViolation("mu must be > 0")
    if gamma < 0:
        raise ContractViolation("gamma must be >= 0")
    return (1.0 - np.sqrt(mu / (mu + 2.0 * gamma))) ** 2


def cluster_constants(cluster):
    """Curvature constants of the cluster's global and master objectives.

    Cached on the cluster.  ``L_sched`` is the larger of the global and
    master-local smoothness, which keeps the line-search tolerances valid.
    """
    if "constants" in cluster.cache:
        return cluster.cache["constants"]
    prof = smoothness_profile(cluster.model, cluster.data)
    local = cluster.local_objectives[cluster.master_index - 1]
    L_local = gram_max_eigenvalue(local.data, prof.ell) + cluster.model.reg_mu
    out = {
        "profile": prof,
        "L": prof.L,
        "L_local": L_local,
        "L_sched": max(prof.L, L_local),
        "mu_reg": prof.mu,
        "mu_hessian": prof.mu_hessian,
        "nu": prof.nu,
        "ell": prof.ell,
        "sigma": prof.sigma,
    }
    cluster.cache["constants"] = out
    return out


def _mu(consts, cfg):
    return consts["mu_hessian"] if cfg.mu_source == "hessian" else consts["mu_reg"]


def default_schedule(cluster, cfg):
    """Tolerance schedule matching the algorithm, loss and line search."""
    c = cluster_constants(cluster)
    mu, L, g = _mu(c, cfg), c["L_sched"], cfg.gamma
    quad = cluster.model.is_quadratic
    if cfg.algorithm in (DANE_LS, INEXACT_DANE):
        if quad:
            return ToleranceSchedule(QUADRATIC_DANE_LS, L=L, mu=mu, gamma=g)
        if cfg.line_search == OPTION_I:
            return ToleranceSchedule(GLOBAL_DANE_LS, L=L, mu=mu, gamma=g,
                                     rho=cfg.rho)
        return ToleranceSchedule(LOCAL_DANE_LS, L=L, mu=mu, gamma=g, rho=cfg.rho)
    if cfg.algorithm == DANE_HB:
        if quad:
            return ToleranceSchedule(QUADRATIC_HB, L=L, mu=mu, gamma=g)
        return ToleranceSchedule(LOCAL_HB, L=L, mu=mu, gamma=g)
    if cfg.algorithm == DANE_HB_LM:
        return ToleranceSchedule(HB_LM_OUTER, L=c["L"], mu=mu, sigma=c["sigma"],
                                 ell=c["ell"])
    return None


# ---------------------------------------------------------------------------
# line searches


def psi(w_tilde, w_prev, eta, rho, gamma, eps_t, local_view,
        grad_tilde=None, grad_prev=None):
    """Sufficient-descent term of the line-search tests.

    eta rho <grad F_1(w~) - grad F_1(w) + gamma (w~ - w), w~ - w> - eta eps_t ||w~ - w||
    """
    if not 0 < eta <= 1:
        raise ContractViolation("eta must lie in (0, 1]")
    d = w_tilde - w_prev
    if grad_tilde is None:
        grad_tilde = local_view.gradient(w_tilde)
    if grad_prev is None:
        grad_prev = local_view.gradient(w_prev)
    inner = float((grad_tilde - grad_prev + gamma * d) @ d)
    return eta * rho * inner - eta * eps_t * float(np.linalg.norm(d))


def line_search_option1(cluster, w_prev, w_tilde, rho, gamma, eps_t,
                        value_prev=None, grad_tilde=None, grad_prev=None):
    """Backtracking with global value reduces.

    Returns ``(eta, value_evals, value_new)``.  ``value_prev`` (F at
    ``w_prev``) is fetched with one extra reduce when not supplied; that
    reduce is included in ``value_evals``.
    """
    evals = 0
    if value_prev is None:
        value_prev = cluster.reduce_value(w_prev)
        evals += 1
    if np.array_equal(w_tilde, w_prev):
        return 1.0, evals, value_prev
    view = cluster.master_local_view()
    psi1 = psi(w_tilde, w_prev, 1.0, rho, gamma, eps_t, view,
               grad_tilde=grad_tilde, grad_prev=grad_prev)
    eta = 1.0
    d = w_tilde - w_prev
    while eta >= ETA_MIN:
        cand = w_prev + eta * d if eta < 1.0 else w_tilde
        val = cluster.reduce_value(cand)
        evals += 1
        if val <= value_prev - eta * psi1:
            return eta, evals, val
        eta *= 0.5
    raise LineSearchFailure(
        "Option-I line search underflowed; check L/mu/gamma", eta=eta)


def line_search_option2(w_prev, w_tilde, global_grad_prev, rho, gamma, nu,
                        eps_t, local_view, grad_tilde=None, grad_prev=None):
    """Backtracking on the master's cubic upper model; no communication.

    Accepts eta when
    <g, D> + D^T (H_1(w) + gamma I) D + (nu/6)||D||^3 <= -psi,  D = eta (w~ - w).
    """
    d = w_tilde - w_prev
    if not np.any(d):
        return 1.0
    lin = float(global_grad_prev @ d)
    quad = float(d @ local_view.hessian_vec(w_prev, d)) + gamma * float(d @ d)
    cub = nu / 6.0 * float(np.linalg.norm(d)) ** 3
    psi1 = psi(w_tilde, w_prev, 1.0, rho, gamma, eps_t, local_view,
               grad_tilde=grad_tilde, grad_prev=grad_prev)
    eta = 1.0
    while eta >= ETA_MIN:
        if eta * lin + eta ** 2 * quad + eta ** 3 * cub <= -eta * psi1:
            return eta
        eta *= 0.5
    raise LineSearchFailure(
        "Option-II line search underflowed; check nu/gamma", eta=eta)


# ---------------------------------------------------------------------------
# shared plumbing


class _Run:
    """Bookkeeping shared by the outer loops."""

    def __init__(self, cluster, cfg, transcript):
        self.cluster = cluster
        self.cfg = cfg
        self.tr = transcript
        self.rng = substream(cfg.seed, STREAM_SOLVER)

    def record(self, t, w, g, **kw):
        gn = float(np.linalg.norm(g))
        value = self.cluster.evaluate_value(w)
        rec = RoundRecord(t=t, w=w.copy(), value=value, grad_norm=gn,
                          ledger=self.cluster.ledger.snapshot(),
                          eta=kw.pop("eta", 1.0), eps_t=kw.pop("eps_t", 0.0),
                          inner_ifo=kw.pop("inner_ifo", 0), **kw)
        self.tr.records.append(rec)
        return self.tr.target.met(rec.w, value, gn)

    def solve(self, sub, w_init, eps_t):
        """Inner solve plus the caller-side certificate re-check."""
        w_t, ifo = solve_subproblem(sub, w_init, eps_t, self.cfg.inner_solver,
                                    self.cfg.svrg, rng=self.rng)
        self.cluster.ledger.charge_ifo(ifo)
        cert = float(np.linalg.norm(sub.gradient(w_t)))
        if not cert <= eps_t:
            raise SolverNonConvergence(
                f"certificate failed: ||grad P|| = {cert:.3e} > eps_t = {eps_t:.3e}",
                best_iterate=w_t, grad_norm=cert, ifo_used=ifo)
        return w_t, ifo + sub.local_view.n_samples, cert


def _require_gamma(cfg):
    if cfg.gamma is None:
        raise ConfigError("gamma is required")


def initial_point(cluster, cfg, rng=None):
    """``zero`` or an approximate minimiser of the master's F_1."""
    p = cluster.p
    w0 = np.zeros(p)
    if cfg.init == "zero":
        return w0
    view = cluster.master_local_view()
    g1 = view.gradient(w0)
    sub = build_subproblem(cluster, w0, g1, 0.0)
    eps = 1e-8 * max(1.0, float(np.linalg.norm(g1)))
    w, ifo = solve_subproblem(sub, w0, eps, cfg.inner_solver, cfg.svrg, rng=rng)
    cluster.ledger.charge_ifo(ifo)
    return w


def _finish(tr, run, fn):
    try:
        fn()
    except (SolverNonConvergence, LineSearchFailure, NumericError) as exc:
        tr.status = SOLVER_FAILURE
        tr.message = f"{type(exc).__name__}: {exc}"
    return tr


def _check_deviation(cluster, cfg, w):
    if cluster.m == 1:
        return
    dev = cluster.hessian_deviation(w)
    if dev > cfg.gamma:
        log.warning("measured ||H_1 - H|| = %.4g exceeds gamma = %.4g", dev,
                    cfg.gamma)


# ---------------------------------------------------------------------------
# algorithms


def run_dane_ls(cluster, cfg, w0=None):
    """DANE with optional backtracking line search."""
    _require_gamma(cfg)
    schedule = cfg.schedule or default_schedule(cluster, cfg)
    tr = RunTranscript(DANE_LS, cluster.m, target=cfg.target,
                       constants={"gamma": cfg.gamma, "schedule": schedule})
    run = _Run(cluster, cfg, tr)

    def body():
        w = initial_point(cluster, cfg, run.rng) if w0 is None else np.array(w0, float)
        g = cluster.reduce_gradient(w)
        g0n = float(np.linalg.norm(g))
        if run.record(0, w, g) or g0n == 0.0:
            tr.status = CONVERGED
            return
        use_ls = cfg.line_search is not None and not cluster.model.is_quadratic
        if cfg.line_search == OPTION_II and use_ls:
            _check_deviation(cluster, cfg, w)
        nu = cluster_constants(cluster)["nu"] if use_ls else 0.0
        value_prev = None
        for t in range(1, cfg.max_rounds + 1):
            eps_t = tolerance(schedule, t, float(np.linalg.norm(g)), g0n)
            sub = build_subproblem(cluster, w, g, cfg.gamma)
            w_t, ifo, cert = run.solve(sub, w, eps_t)
            eta = 1.0
            if use_ls:
                view = sub.local_view
                grad_t = view.gradient(w_t)
                if cfg.line_search == OPTION_I:
                    eta, _, value_prev = line_search_option1(
                        cluster, w, w_t, cfg.rho, cfg.gamma, eps_t,
                        value_prev=value_prev, grad_tilde=grad_t,
                        grad_prev=sub.local_grad_anchor)
                else:
                    eta = line_search_option2(
                        w, w_t, g, cfg.rho, cfg.gamma, nu, eps_t, view,
                        grad_tilde=grad_t, grad_prev=sub.local_grad_anchor)
            w_new = w_t if eta == 1.0 else (1.0 - eta) * w + eta * w_t
            step = float(np.linalg.norm(w_t - w))
            w = w_new
            g = cluster.reduce_gradient(w)
            if run.record(t, w, g, eta=eta, eps_t=eps_t, inner_ifo=ifo,
                          step_norm=step, certificate=cert, w_tilde=w_t):
                tr.status = CONVERGED
                return
        tr.status = ROUND_LIMIT

    return _finish(tr, run, body)


def run_dane_hb(cluster, cfg, w0=None, g0=None):
    """DANE with heavy-ball momentum ``w = w~ + beta (w - w_old)``.

    ``g0`` (the gradient at ``w0``) lets a caller warm-start without a
    fresh reduce.
    """
    _require_gamma(cfg)
    schedule = cfg.schedule or default_schedule(cluster, cfg)
    consts = cluster_constants(cluster)
    beta = (cfg.beta_override if cfg.beta_override is not None
            else momentum_beta(_mu(consts, cfg), cfg.gamma))
    tr = RunTranscript(DANE_HB, cluster.m, target=cfg.target,
                       constants={"gamma": cfg.gamma, "beta": beta,
                                  "schedule": schedule})
    run = _Run(cluster, cfg, tr)

    def body():
        if w0 is None:
            w = initial_point(cluster, cfg, run.rng)
        else:
            w = np.array(w0, dtype=np.float64)
        g = cluster.reduce_gradient(w) if g0 is None else np.array(g0, float)
        g0n = float(np.linalg.norm(g))
        if run.record(0, w, g) or g0n == 0.0:
            tr.status = CONVERGED
            return
        w_old = w.copy()
        value_prev = None
        for t in range(1, cfg.max_rounds + 1):
            eps_t = tolerance(schedule, t, float(np.linalg.norm(g)), g0n)
            sub = build_subproblem(cluster, w, g, cfg.gamma)
            w_t, ifo, cert = run.solve(sub, w, eps_t)
            cand = w_t + beta * (w - w_old)
            eta, flag = 1.0, ""
            if cfg.hb_line_search:
                try:
                    eta, _, value_prev = _hb_line_search(
                        cluster, w, cand, cfg, eps_t, value_prev,
                        sub.local_grad_anchor)
                except LineSearchFailure:
                    eta, flag, value_prev = 1.0, "momentum_forced", None
            w_new = cand if eta == 1.0 else w + eta * (cand - w)
            step = float(np.linalg.norm(w_t - w))
            w_old, w = w, w_new
            g = cluster.reduce_gradient(w)
            if run.record(t, w, g, eta=eta, eps_t=eps_t, inner_ifo=ifo,
                          step_norm=step, certificate=cert, w_tilde=w_t,
                          flag=flag):
                tr.status = CONVERGED
                return
        tr.status = ROUND_LIMIT

    return _finish(tr, run, body)


def _hb_line_search(cluster, w, cand, cfg, eps_t, value_prev, grad_prev):
    view = cluster.master_local_view()
    grad_c = view.gradient(cand)
    if value_prev is None:
        value_prev = cluster.reduce_value(w)
    psi1 = psi(cand, w, 1.0, cfg.rho, cfg.gamma, eps_t, view,
               grad_tilde=grad_c, grad_prev=grad_prev)
    d = cand - w
    eta = 1.0
    evals = 0
    while eta >= HB_ETA_MIN:
        c = cand if eta == 1.0 else w + eta * d
        val = cluster.reduce_value(c)
        evals += 1
        if val <= value_prev - eta * psi1:
            return eta, evals, val
        eta *= 0.5
    raise LineSearchFailure("momentum step rejected", eta=eta)


def run_dane_hb_lm(cluster, cfg, w0=None):
    """Heavy-ball DANE on quadratic surrogates of a linear-model loss.

    Each outer round builds ``Q`` around ``w`` with link curvature ``ell``
    and runs DANE-HB on it, warm-started at ``w`` with ``grad Q(w) =
    grad F(w)``, until ``||grad Q|| <= sqrt(2 mu_Q eps_t)`` which implies
    ``Q(w) - min Q <= eps_t``.
    """
    _require_gamma(cfg)
    consts = cluster_constants(cluster)
    schedule = cfg.schedule or default_schedule(cluster, cfg)
    ell = consts["ell"]
    if "mu_Q" not in cluster.cache:
        cluster.cache["mu_Q"] = (gram_min_eigenvalue(cluster.data, ell)
                                 + cluster.model.reg_mu)
    mu_Q = cluster.cache["mu_Q"]
    mu_inner = mu_Q if cfg.mu_source == "hessian" else consts["mu_reg"]
    inner_schedule = ToleranceSchedule(QUADRATIC_HB, L=consts["L"], mu=mu_inner,
                                       gamma=cfg.gamma)
    beta = (cfg.beta_override if cfg.beta_override is not None
            else momentum_beta(mu_inner, cfg.gamma))
    tr = RunTranscript(DANE_HB_LM, cluster.m, target=cfg.target,
                       constants={"gamma": cfg.gamma, "beta": beta, "ell": ell,
                                  "mu_Q": mu_Q, "schedule": schedule})
    run = _Run(cluster, cfg, tr)
    source = cluster.source_objective

    def body():
        w = initial_point(cluster, cfg, run.rng) if w0 is None else np.array(w0, float)
        g = cluster.reduce_gradient(w)
        if run.record(0, w, g) or not np.any(g):
            tr.status = CONVERGED
            return
        for t in range(1, cfg.max_rounds + 1):
            gn = float(np.linalg.norm(g))
            # floor the inner gradient tolerance, not the value gap eps_t
            eps_t = tolerance(schedule, t, gn, gn, floor=0.0)
            q_tol = max(np.sqrt(2.0 * mu_Q * eps_t), TOLERANCE_FLOOR)
            Q = surrogate_quadratic(source.model, source.data, w, ell)
            qc = cluster.with_objective(Q)
            qc.cache["constants"] = _surrogate_constants(consts, mu_Q)
            inner_cfg = RunConfig(
                algorithm=DANE_HB, gamma=cfg.gamma, beta_override=beta,
                schedule=inner_schedule, max_rounds=cfg.inner_max_rounds,
                target=Target("grad_norm", q_tol), inner_solver=cfg.inner_solver,
                svrg=cfg.svrg, mu_source=cfg.mu_source, seed=cfg.seed + t)
            inner = run_dane_hb(qc, inner_cfg, w0=w, g0=g)
            if inner.status != CONVERGED:
                raise SolverNonConvergence(
                    f"inner DANE-HB on the surrogate ended with {inner.status}"
                    f" {inner.message}".rstrip())
            ifo = sum(r.inner_ifo for r in inner.records)
            w = inner.final.w
            g = cluster.reduce_gradient(w)
            if run.record(t, w, g, eps_t=eps_t, inner_ifo=ifo,
                          flag=f"inner_rounds={inner.iterations}"):
                tr.status = CONVERGED
                return
        tr.status = ROUND_LIMIT

    return _finish(tr, run, body)


def _surrogate_constants(consts, mu_Q):
    out = dict(consts)
    out.update(mu_hessian=mu_Q, nu=0.0, sigma=consts["ell"])
    return out


def run_inexact_dane(cluster, cfg, w0=None):
    """All machines solve their own subproblem; the master averages."""
    _require_gamma(cfg)
    schedule = cfg.schedule or default_schedule(cluster, cfg)
    tr = RunTranscript(INEXACT_DANE, cluster.m, target=cfg.target,
                       constants={"gamma": cfg.gamma, "schedule": schedule})
    run = _Run(cluster, cfg, tr)

    def body():
        w = initial_point(cluster, cfg, run.rng) if w0 is None else np.array(w0, float)
        g = cluster.reduce_gradient(w)
        g0n = float(np.linalg.norm(g))
        if run.record(0, w, g) or g0n == 0.0:
            tr.status = CONVERGED
            return
        for t in range(1, cfg.max_rounds + 1):
            eps_t = tolerance(schedule, t, float(np.linalg.norm(g)), g0n)
            models, ifo_total, certs = [], 0, []
            for j in range(1, cluster.m + 1):
                sub = build_subproblem(cluster, w, g, cfg.gamma, machine_index=j)
                w_j, ifo, cert = run.solve(sub, w, eps_t)
                models.append(w_j)
                ifo_total += ifo
                certs.append(cert)
            w_new = cluster.average_models(models)
            step = float(np.linalg.norm(models[0] - w))
            w = w_new
            g = cluster.reduce_gradient(w)
            if run.record(t, w, g, eps_t=eps_t, inner_ifo=ifo_total,
                          step_norm=step, certificate=max(certs),
                          w_tilde=models[0]):
                tr.status = CONVERGED
                return
        tr.status = ROUND_LIMIT

    return _finish(tr, run, body)


def run_gd(cluster, cfg, w0=None):
    """Gradient descent with step 1/L; one reduce per round."""
    L = cluster_constants(cluster)["L"]
    tr = RunTranscript(GD, cluster.m, target=cfg.target, constants={"L": L})
    run = _Run(cluster, cfg, tr)

    def body():
        w = np.zeros(cluster.p) if w0 is None else np.array(w0, float)
        g = cluster.reduce_gradient(w)
        if run.record(0, w, g) or not np.any(g):
            tr.status = CONVERGED
            return
        for t in range(1, cfg.max_rounds + 1):
            w = w - g / L
            g = cluster.reduce_gradient(w)
            if run.record(t, w, g):
                tr.status = CONVERGED
                return
        tr.status = ROUND_LIMIT

    return _finish(tr, run, body)


RUNNERS = {
    DANE_LS: run_dane_ls,
    DANE_HB: run_dane_hb,
    DANE_HB_LM: run_dane_hb_lm,
    INEXACT_DANE: run_inexact_dane,
    GD: run_gd,
}


def run(cluster, cfg, **kw):
    """Dispatch on ``cfg.algorithm``."""
    return RUNNERS[cfg.algorithm](cluster, cfg, **kw)
