"""Independent checks of the inequalities the algorithms rely on.

Everything here uses dense linear algebra or closed forms and shares no
code with the solvers beyond the objective primitives in
:mod:`dane_sim.model`.  Audits return an :class:`OracleReport` that counts
violations and renders a short text summary.
"""
import logging
import math
from decimal import Decimal, localcontext
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, PreconditionError
from .model import LOGISTIC, Objective, link_curvature, smoothness_profile

log = logging.getLogger(__name__)

# oracles decompose p x p matrices densely up to this size
DENSE_ORACLE_MAX_P = 256


@dataclass
class OracleReport:
    name: str
    checked: int = 0
    violations: int = 0
    skipped: int = 0
    max_excess: float = -math.inf    # largest (lhs - rhs); <= 0 when all pass
    details: list = field(default_factory=list)

    @property
    def passed(self):
        return self.violations == 0 and self.checked > 0

    def add(self, lhs, rhs, label=""):
        self.checked += 1
        excess = float(lhs - rhs)
        self.max_excess = max(self.max_excess, excess)
        if not excess <= 0.0:
            self.violations += 1
            if len(self.details) < 10:
                self.details.append(f"{label} lhs={lhs:.6g} rhs={rhs:.6g}")

    def merge(self, other):
        self.checked += other.checked
        self.violations += other.violations
        self.skipped += other.skipped
        self.max_excess = max(self.max_excess, other.max_excess)
        self.details.extend(other.details[:max(0, 10 - len(self.details))])
        return self

    def summary(self):
        state = "PASS" if self.passed else "FAIL"
        line = (f"{state} {self.name}: {self.checked} checks, "
                f"{self.violations} violations, {self.skipped} skipped, "
                f"max excess {self.max_excess:.3e}")
        return "\n".join([line] + ["  " + d for d in self.details])


# ---------------------------------------------------------------------------
# closed forms


def recommended_gamma(L, p, n, delta=0.1):
    """L sqrt(32 ln(p/delta) / n)."""
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    if n < 1:
        raise ConfigError("n must be >= 1")
    return L * math.sqrt(32.0 * math.log(p / delta) / n)


@dataclass(frozen=True)
class RateBound:
    theorem: str
    rounds: float
    constants_used: dict

    @property
    def ceil(self):
        return int(math.ceil(self.rounds))


def _need(constants, *names):
    missing = [k for k in names if constants.get(k) is None]
    if missing:
        raise ConfigError(f"round bound needs {', '.join(missing)}")
    return [float(constants[k]) for k in names]


def round_bound(theorem, constants, eps, extras=None):
    """Round budget of the named theorem, clamped at 0.

    ``constants`` holds L, mu, gamma, nu, ell, sigma, c as needed;
    ``extras`` holds ``dist0`` = ||w0 - w*|| or ``gap0`` = F(w0) - F*.
    """
    if not eps > 0:
        raise ConfigError("eps must be > 0")
    c = dict(constants)
    c.update(extras or {})
    if theorem == "T1":
        L, mu, gamma, r0 = _need(c, "L", "mu", "gamma", "dist0")
        kappa = L / mu
        t = 2.0 * (mu + 2.0 * gamma) / mu * math.log(math.sqrt(kappa) * r0 / eps)
    elif theorem == "T3loc":
        L, mu, gamma, nu = _need(c, "L", "mu", "gamma", "nu")
        if nu <= 0:
            raise ConfigError("the local bound needs nu > 0")
        kappa = L / mu
        tau = math.ceil((mu + 2.0 * gamma) / (2.0 * mu) * math.log(4.0 * kappa))
        arg = (gamma + mu) / (4.0 * (6.0 * nu + 1.0) * math.sqrt(kappa) * tau
                              * nu * eps)
        t = 4.0 * tau * math.log(arg)
        c["tau"] = tau
    elif theorem == "T5":
        mu, gamma, cc, r0 = _need(c, "mu", "gamma", "c", "dist0")
        t = 2.0 * math.sqrt((mu + 2.0 * gamma) / mu) * math.log(
            2.0 * math.sqrt(2.0) * cc * r0 / eps)
    elif theorem == "T6":
        mu, gamma, nu, cc = _need(c, "mu", "gamma", "nu", "c")
        tau = math.ceil(2.0 * math.sqrt((mu + 2.0 * gamma) / mu)
                        * math.log(2.0 * cc))
        t = 4.0 * tau * math.log((gamma + mu) / (4.0 * (6.0 * nu + 1.0) * cc * tau)
                                 / eps)
        c["tau"] = tau
    elif theorem == "T7":
        ell, sigma, gap0 = _need(c, "ell", "sigma", "gap0")
        t = ell / sigma * math.log(2.0 * gap0 / eps)
    else:
        raise ConfigError(f"unknown theorem {theorem!r}")
    if "L" in c and "mu" in c and c["L"] is not None and c["mu"]:
        c.setdefault("kappa", c["L"] / c["mu"])
    return RateBound(theorem, max(t, 0.0), c)


def fd_gradient(model, data, w, h=1e-6):
    """Central differences (F(w + h e_i) - F(w - h e_i)) / 2h."""
    if not h > 0:
        raise ConfigError("h must be > 0")
    obj = Objective(model, data)
    w = np.asarray(w, dtype=np.float64)
    out = np.empty_like(w)
    e = np.zeros_like(w)
    for i in range(w.shape[0]):
        e[i] = h
        out[i] = (obj.value(w + e) - obj.value(w - e)) / (2.0 * h)
        e[i] = 0.0
    return out


def measured_link_curvature(model, data, iterates):
    """(max, min) of l'' over the margins visited by ``iterates``."""
    X = data.features
    hi, lo = 0.0, math.inf
    for w in iterates:
        d = link_curvature(model, np.asarray(X @ w).reshape(-1), data.labels)
        hi = max(hi, float(d.max()))
        lo = min(lo, float(d.min()))
    return hi, lo


# ---------------------------------------------------------------------------
# matrix lemmas


def _sym_sqrt(B):
    ev, V = np.linalg.eigh(B)
    return (V * np.sqrt(np.maximum(ev, 0.0))) @ V.T


def precondition_bounds_check(A, B, gamma, tol=1e-10, report=None):
    """Spectrum of (A + gamma I)^{-1} B for PD A, B with ||A - B|| <= gamma.

    Checks lambda_max <= 1, lambda_min >= mu/(mu + 2 gamma) with mu =
    lambda_min(B), and ||I - B^{1/2}(A + gamma I)^{-1}B^{1/2}|| <=
    2 gamma/(mu + 2 gamma).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    p = A.shape[0]
    dev = float(np.max(np.abs(np.linalg.eigvalsh(A - B))))
    if dev > gamma * (1.0 + 1e-12) + 1e-15:
        raise PreconditionError(f"||A - B|| = {dev:.6g} exceeds gamma = {gamma:.6g}")
    rep = report or OracleReport("precondition_bounds")
    mu = float(np.linalg.eigvalsh(B)[0])
    Ag = A + gamma * np.eye(p)
    lam = sla.eigh(B, Ag, eigvals_only=True)      # eigenvalues of Ag^{-1} B
    rep.add(lam[-1], 1.0 + tol, "lambda_max")
    rep.add(mu / (mu + 2.0 * gamma) - tol, lam[0], "lambda_min")
    Bh = _sym_sqrt(B)
    M = np.eye(p) - Bh @ np.linalg.solve(Ag, Bh)
    M = 0.5 * (M + M.T)
    rep.add(float(np.max(np.abs(np.linalg.eigvalsh(M)))),
            2.0 * gamma / (mu + 2.0 * gamma) + tol, "||I - B^1/2 Ag^-1 B^1/2||")
    return rep


def _random_spd(rng, p, lo, hi):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    ev = rng.uniform(lo, hi, size=p)
    ev[0], ev[-1] = lo, hi
    return (Q * ev) @ Q.T


def precondition_audit(n_instances=200, seed=0, max_p=32):
    """Random PD pairs with ||A - B|| <= gamma; returns one merged report."""
    rng = np.random.default_rng(seed)
    rep = OracleReport("precondition_bounds")
    done = 0
    while done < n_instances:
        p = int(rng.integers(2, max_p + 1))
        mu = 10.0 ** rng.uniform(-3, 0)
        L = mu * 10.0 ** rng.uniform(0, 3)
        B = _random_spd(rng, p, mu, L)
        E = rng.standard_normal((p, p))
        E = 0.5 * (E + E.T)
        s = float(np.max(np.abs(np.linalg.eigvalsh(E))))
        gamma = 10.0 ** rng.uniform(-3, 1)
        E *= gamma * rng.uniform(0, 1) / s
        A = B + E
        if np.linalg.eigvalsh(A)[0] <= 0:
            continue                       # lemma needs A positive definite
        precondition_bounds_check(A, B, gamma, report=rep)
        done += 1
    return rep


def _two_by_two_radius(a, beta):
    # roots of z^2 - a z + beta = 0 (Decimal in, Decimal out)
    disc = a * a - 4 * beta
    if disc < 0:
        return beta.sqrt()
    r = disc.sqrt()
    return max(abs((a + r) / 2), abs((a - r) / 2))


def heavy_ball_radius_check(eigs, eta, beta=None, tol=1e-12, report=None):
    """Spectral radius of [[1 + beta - eta l, -beta], [1, 0]] over ``eigs``.

    At the extreme eigenvalues the default beta puts a double root on the
    bound, where double precision would perturb the roots by ~1e-8; the
    root formula is therefore evaluated with 60 significant digits.
    """
    eigs = np.asarray(eigs, dtype=np.float64)
    if np.any(eigs <= 0):
        raise ConfigError("eigenvalues must be positive")
    rep = report or OracleReport("heavy_ball_radius")
    with localcontext() as ctx:
        ctx.prec = 60
        e = Decimal(float(eta))
        one = Decimal(1)
        mu, L = Decimal(float(eigs.min())), Decimal(float(eigs.max()))
        bound = max(abs(one - (e * mu).sqrt()), abs(one - (e * L).sqrt()))
        b = bound * bound if beta is None else Decimal(float(beta))
        worst = max(_two_by_two_radius(one + b - e * Decimal(float(lam)), b)
                    for lam in eigs)
        rep.add(float(worst - bound), tol, f"eta={eta:.3g} beta={float(b):.3g}")
    return rep


def heavy_ball_audit(n_instances=500, seed=0, grid=16):
    rng = np.random.default_rng(seed)
    rep = OracleReport("heavy_ball_radius")
    for _ in range(n_instances):
        mu = 10.0 ** rng.uniform(-3, 1)
        L = mu * 10.0 ** rng.uniform(0, 4)
        eta = rng.uniform(0.01, 1.0) / L
        eigs = np.concatenate([[mu, L], rng.uniform(mu, L, size=grid)])
        heavy_ball_radius_check(eigs, eta, report=rep)
    return rep


def lipschitz_hessian_check(model, data, pairs, nu=None, tol=1e-10, report=None):
    """||grad F(w) - grad F(w') - H(w')(w - w')|| <= (nu/2)||w - w'||^2."""
    obj = Objective(model, data)
    if nu is None:
        nu = smoothness_profile(model, data).nu
    rep = report or OracleReport("lipschitz_hessian")
    for w, w2 in pairs:
        w = np.asarray(w, dtype=np.float64)
        w2 = np.asarray(w2, dtype=np.float64)
        d = w - w2
        r = obj.gradient(w) - obj.gradient(w2) - obj.hessian_matrix(w2) @ d
        rep.add(float(np.linalg.norm(r)), 0.5 * nu * float(d @ d) + tol)
    return rep


def lipschitz_hessian_audit(model, data, n_pairs=100, radius=1.0, seed=0):
    rng = np.random.default_rng(seed)
    p = data.n_features
    pairs = []
    for _ in range(n_pairs):
        w = rng.standard_normal(p)
        w *= radius * rng.uniform() / np.linalg.norm(w)
        d = rng.standard_normal(p)
        d *= radius * rng.uniform() / np.linalg.norm(d)
        pairs.append((w, w + d))
    return lipschitz_hessian_check(model, data, pairs)


def hessian_deviation_dense(cluster, w, machine_index=1):
    """||H_j(w) - H(w)|| by a dense eigendecomposition of the difference."""
    H = cluster.objective.hessian_matrix(w)
    Hj = cluster.local_objectives[machine_index - 1].hessian_matrix(w)
    return float(np.max(np.abs(np.linalg.eigvalsh(Hj - H))))


def grad_bound_check(cluster, rounds, gamma, mu=None, w_star=None, slack=1e-9,
                     report=None):
    """Gradient and iterate bounds at inexact subproblem solutions.

    ``rounds`` yields ``(w_tilde, w_prev, eps_t)``.  Checks
    ||grad F(w~)|| <= 2 gamma ||D|| + eps_t and, when ``w_star`` and ``mu``
    are given, ||w~ - w*|| <= (2 gamma ||D|| + eps_t)/mu, D = w~ - w_prev.
    Rounds where the measured ||H_1 - H|| exceeds gamma at either end
    are skipped.
    """
    rep = report or OracleReport("grad_bound")
    for w_t, w_prev, eps_t in rounds:
        if cluster.m > 1:
            dev = max(hessian_deviation_dense(cluster, w_t),
                      hessian_deviation_dense(cluster, w_prev))
            if dev > gamma:
                log.warning("grad bound premise fails: deviation %.4g > gamma %.4g",
                            dev, gamma)
                rep.skipped += 1
                continue
        dn = float(np.linalg.norm(w_t - w_prev))
        gn = float(np.linalg.norm(cluster.objective.gradient(w_t)))
        rep.add(gn, 2.0 * gamma * dn + eps_t + slack, "gradient bound")
        if w_star is not None and mu is not None:
            en = float(np.linalg.norm(w_t - w_star))
            rep.add(en, 2.0 * gamma / mu * dn + eps_t / mu + slack, "iterate bound")
    return rep


# ---------------------------------------------------------------------------
# transcript audits


def quadratic_contraction_check(transcript, H, w_star, mu, gamma, slack=1e-9):
    """||H^{1/2}(w_t - w*)|| <= (1 - mu/(2(mu + 2 gamma))) ||H^{1/2}(w_{t-1} - w*)||."""
    Hh = _sym_sqrt(np.asarray(H, dtype=np.float64))
    factor = 1.0 - mu / (2.0 * (mu + 2.0 * gamma))
    rep = OracleReport("quadratic_contraction")
    errs = [float(np.linalg.norm(Hh @ (r.w - w_star))) for r in transcript.records]
    for t in range(1, len(errs)):
        rep.add(errs[t], factor * errs[t - 1] + slack, f"t={t}")
    return rep


def descent_check(values, name="monotone_descent"):
    rep = OracleReport(name)
    for t in range(1, len(values)):
        rep.add(values[t], values[t - 1], f"t={t}")
    return rep


def ledger_identity_check(transcript, name="ledger_identity"):
    """vectors = (rounds - value_rounds)(m + 1) + value_rounds on every record,
    and every counter is monotone."""
    rep = OracleReport(name)
    m = transcript.m
    prev = None
    for r in transcript.records:
        s = r.ledger
        rep.add(abs(s.vectors_transmitted - s.reconstructed_vectors(m)), 0,
                f"t={r.t}")
        if prev is not None:
            for k in ("rounds", "vectors_transmitted", "scalars_transmitted",
                      "ifo_calls", "value_rounds"):
                rep.add(getattr(prev, k), getattr(s, k), f"t={r.t} {k}")
        prev = s
    return rep


def certificate_check(cluster, transcript, gamma):
    """Re-evaluate ||grad P(w~)|| <= eps_t for every round from scratch."""
    rep = OracleReport("certificate")
    recs = transcript.records
    master = cluster.local_objectives[cluster.master_index - 1]
    for prev, cur in zip(recs, recs[1:]):
        if cur.w_tilde is None:
            continue
        a = prev.w
        g = cluster.objective.gradient(a)
        gp = (master.gradient(cur.w_tilde) - master.gradient(a) + g
              + gamma * (cur.w_tilde - a))
        rep.add(float(np.linalg.norm(gp)), cur.eps_t, f"t={cur.t}")
    return rep


def logistic_lipschitz_instance(n=200, p=10, seed=0):
    """Small logistic dataset for the Hessian-Lipschitz audit."""
    from .data import gen_logistic
    from .model import LossModel
    data, _ = gen_logistic(n, p, seed=seed)
    return LossModel(LOGISTIC, reg_mu=1e-3), data
