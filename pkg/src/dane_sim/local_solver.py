"""Local subproblem of DANE-type methods and its inexact solvers.

Around the anchor ``a`` with global gradient ``g`` the master minimises

    P(w) = <g - grad F_1(a), w> + (gamma/2)||w - a||^2 + F_1(w)

whose gradient is ``grad F_1(w) - grad F_1(a) + g + gamma (w - a)``.
Quadratic subproblems are solved by conjugate gradients, everything else
by SVRG with the hot loop in :mod:`dane_sim.kernels`.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .data import STREAM_SOLVER, substream
from .errors import ConfigError, ContractViolation, NumericError, \
    SolverNonConvergence
from .model import LOGISTIC, link_slope

TOLERANCE_FLOOR = 1e-14


class Subproblem:
    """Local objective P of one machine around ``anchor``.

    ``local_view`` supplies the machine's F_j oracles; evaluating
    ``grad F_j(anchor)`` here is charged to the ledger like any local pass.
    """

    def __init__(self, local_view, anchor, global_grad, gamma):
        if gamma < 0:
            raise ContractViolation("gamma must be >= 0")
        self.local_view = local_view
        self.anchor = np.array(anchor, dtype=np.float64)
        self.global_grad = np.array(global_grad, dtype=np.float64)
        self.gamma = float(gamma)
        self.local_grad_anchor = local_view.gradient(self.anchor)
        self.shift = self.global_grad - self.local_grad_anchor
        self._row_sq_max = None

    @property
    def is_quadratic(self):
        return self.local_view.is_quadratic

    @property
    def n_features(self):
        return self.local_view.n_features

    @property
    def strong_convexity(self):
        return self.local_view.model.reg_mu + self.gamma

    def value(self, w):
        d = w - self.anchor
        return (self.local_view.value(w) + float(self.shift @ w)
                + 0.5 * self.gamma * float(d @ d))

    def gradient(self, w):
        """Full-pass gradient of P (charged as n IFO calls)."""
        return (self.local_view.gradient(w) + self.shift
                + self.gamma * (w - self.anchor))

    def hessian_vec(self, w, v):
        return self.local_view.hessian_vec(w, v) + self.gamma * v

    def per_sample_smoothness(self):
        """max_i of the per-sample smoothness of the summands of P."""
        if self._row_sq_max is None:
            self._row_sq_max = float(np.max(self.local_view.data.row_norms())) ** 2
        model = self.local_view.model
        ell = 0.25 if model.kind == LOGISTIC else model.scale
        return ell * self._row_sq_max + model.reg_mu + self.gamma


def build_subproblem(cluster, anchor, global_grad, gamma, machine_index=None):
    """Subproblem of ``machine_index`` (default: the master)."""
    j = cluster.master_index if machine_index is None else machine_index
    return Subproblem(cluster.local_view(j), anchor, global_grad, gamma)


# ---------------------------------------------------------------------------
# inner tolerances

QUADRATIC_DANE_LS = "quadratic_dane_ls"
GLOBAL_DANE_LS = "global_dane_ls"
LOCAL_DANE_LS = "local_dane_ls"
QUADRATIC_HB = "quadratic_hb"
LOCAL_HB = "local_hb"
HB_LM_OUTER = "hb_lm_outer"
FIXED = "fixed"

_NEEDS = {
    QUADRATIC_DANE_LS: ("L", "mu", "gamma"),
    GLOBAL_DANE_LS: ("L", "mu", "gamma", "rho"),
    LOCAL_DANE_LS: ("L", "mu", "gamma", "rho"),
    QUADRATIC_HB: ("L", "mu", "gamma"),
    LOCAL_HB: ("L", "mu", "gamma"),
    HB_LM_OUTER: ("L", "mu", "sigma", "ell"),
    FIXED: ("value",),
}
SCHEDULE_KINDS = tuple(_NEEDS)


@dataclass(frozen=True)
class ToleranceSchedule:
    """Inner accuracy eps_t as a function of the round and gradient norms."""

    kind: str
    L: float = None
    mu: float = None
    gamma: float = None
    rho: float = None
    sigma: float = None
    ell: float = None
    value: float = None

    def __post_init__(self):
        if self.kind not in _NEEDS:
            raise ConfigError(f"unknown tolerance schedule {self.kind!r}")
        missing = [k for k in _NEEDS[self.kind] if getattr(self, k) is None]
        if missing:
            raise ConfigError(
                f"schedule {self.kind} needs {', '.join(missing)}")
        if self.kind == FIXED and not self.value > 0:
            raise ConfigError("fixed tolerance must be > 0")


def tolerance(schedule, t, grad_norm_prev, grad_norm_0=None,
              floor=TOLERANCE_FLOOR):
    """eps_t for round ``t`` (1-based), evaluated with equality.

    ``grad_norm_prev`` is ||grad F(w^(t-1))||; ``grad_norm_0`` is only used
    by the heavy-ball quadratic schedule.  Results are floored at ``floor``
    (1e-14 unless a caller floors a derived quantity instead).
    """
    if grad_norm_prev < 0:
        raise ContractViolation("grad_norm_prev must be >= 0")
    s = schedule
    g = float(grad_norm_prev)
    k = s.kind
    if k == FIXED:
        eps = s.value
    elif k == QUADRATIC_DANE_LS:
        eps = s.mu ** 2 * g / (2.0 * (s.mu + 2.0 * s.gamma) * s.L)
    elif k == GLOBAL_DANE_LS:
        eps = _global_ls(s, g)
    elif k == LOCAL_DANE_LS:
        eps = min((s.gamma + s.mu) ** 2, (g / s.L) ** 2, _global_ls(s, g))
    elif k == QUADRATIC_HB:
        if grad_norm_0 is None:
            raise ConfigError("quadratic_hb schedule needs grad_norm_0")
        r = 1.0 - 0.5 * np.sqrt(s.mu / (s.mu + 2.0 * s.gamma))
        eps = (np.sqrt(2.0) * (s.mu + s.gamma) * grad_norm_0
               / (2.0 * s.L * (t + 1) ** 2) * r ** (t + 1))
    elif k == LOCAL_HB:
        eps = min((s.gamma + s.mu) ** 2, (g / s.L) ** 2)
    else:
        eps = s.sigma * s.mu / (4.0 * s.ell * s.L ** 2) * g * g
    return max(float(eps), floor)


def _global_ls(s, g):
    a = s.rho * (s.mu + s.gamma)
    return a / (2.0 * (s.L + s.gamma) + a) * g


# ---------------------------------------------------------------------------
# SVRG


@dataclass(frozen=True)
class SvrgConfig:
    """SVRG hyper-parameters; ``None`` picks the defaults per subproblem.

    Defaults: ``step_size = 1/(10 L_i)`` with ``L_i`` the largest
    per-sample smoothness of P, ``epoch_length = 2 n``, 200 epochs.
    """

    step_size: float = None
    epoch_length: int = None
    max_epochs: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be > 0")
        if self.epoch_length is not None and self.epoch_length < 1:
            raise ConfigError("epoch_length must be >= 1")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")


def _local_margins(sub, w):
    data = sub.local_view.data
    u = np.asarray(data.features @ w).reshape(-1)
    return link_slope(sub.local_view.model, u, data.labels)


def _full_grad_from_slope(sub, w, slope):
    data = sub.local_view.data
    g = np.asarray(data.features.T @ slope).reshape(-1) / data.n_samples
    return (g + sub.local_view.model.reg_mu * w + sub.shift
            + sub.gamma * (w - sub.anchor))


def solve_svrg(sub, w_init, eps, cfg=None, rng=None, backend=None):
    """Run SVRG on ``sub`` until ||grad P|| <= eps at an epoch boundary.

    Returns ``(w_tilde, ifo_used)`` with ``ifo_used = epochs (n + epoch_length)``;
    the terminal gradient check doubles as the next snapshot and is not
    counted.  Raises :class:`SolverNonConvergence` after ``max_epochs``.
    """
    if not eps > 0:
        raise ContractViolation("eps must be > 0")
    if not sub.strong_convexity > 0:
        raise ContractViolation("subproblem is not strongly convex")
    cfg = cfg or SvrgConfig()
    view = sub.local_view
    data, model = view.data, view.model
    n = data.n_samples
    L_i = sub.per_sample_smoothness()
    step = cfg.step_size if cfg.step_size is not None else 1.0 / (10.0 * L_i)
    if step * L_i > 1.0:
        raise ConfigError(f"step {step:g} violates step * L_i <= 1 (L_i={L_i:g})")
    m_len = cfg.epoch_length if cfg.epoch_length is not None else 2 * n
    if rng is None:
        rng = substream(cfg.rng_seed, STREAM_SOLVER)
    kern = kernels.get_backend(backend)
    kind = 0 if model.kind != LOGISTIC else 1
    coef = model.reg_mu + sub.gamma
    X, y = data.features, data.labels

    w = np.array(w_init, dtype=np.float64)
    best_w, best_g = w.copy(), np.inf
    epochs = 0
    while True:
        slope = _local_margins(sub, w)
        full = _full_grad_from_slope(sub, w, slope)
        gn = float(np.linalg.norm(full))
        if not np.isfinite(gn):
            raise SolverNonConvergence("SVRG diverged", best_iterate=best_w,
                                       grad_norm=best_g,
                                       ifo_used=epochs * (n + m_len))
        if gn < best_g:
            best_w, best_g = w.copy(), gn
        if gn <= eps:
            return w, epochs * (n + m_len)
        if epochs >= cfg.max_epochs:
            raise SolverNonConvergence(
                f"SVRG reached {epochs} epochs at ||grad P|| = {best_g:.3e} > {eps:.3e}",
                best_iterate=best_w, grad_norm=best_g,
                ifo_used=epochs * (n + m_len))
        idx = rng.integers(0, n, size=m_len, dtype=np.int64)
        w_snap = w.copy()
        if sp.issparse(X):
            kern.svrg_epoch_csr(X.data, X.indices.astype(np.int32, copy=False),
                                X.indptr.astype(np.int32, copy=False), y, kind,
                                model.scale, w, w_snap, slope, full, idx, step,
                                coef)
        else:
            kern.svrg_epoch_dense(X, y, kind, model.scale, w, w_snap, slope,
                                  full, idx, step, coef)
        epochs += 1


# ---------------------------------------------------------------------------
# conjugate gradients for quadratic subproblems


def solve_cg(sub, w_init, eps, max_iter=None):
    """CG on the (constant-Hessian) subproblem to ||grad P|| <= eps.

    Returns ``(w, ifo_used)``; each Hessian-vector product and each
    residual refresh counts as one pass (n IFO calls).
    """
    if not sub.is_quadratic:
        raise ContractViolation("CG needs a quadratic subproblem")
    if not eps > 0:
        raise ContractViolation("eps must be > 0")
    view = sub.local_view
    n = view.n_samples
    p = sub.n_features
    max_iter = max_iter or 10 * p + 100
    w = np.array(w_init, dtype=np.float64)
    zero = np.zeros(p)

    def A(v):
        return view.hessian_vec(zero, v) + sub.gamma * v

    def residual(w):
        return -(view.objective.gradient(w) + sub.shift
                 + sub.gamma * (w - sub.anchor))

    r = residual(w)
    ifo = n
    it = 0
    while True:
        rr = float(r @ r)
        if np.sqrt(rr) <= eps:
            # confirm on the true residual, not the recursively updated one
            r = residual(w)
            ifo += n
            rr = float(r @ r)
            if np.sqrt(rr) <= eps:
                return w, ifo
        d = r.copy()
        # restart: a fresh Krylov run from the current iterate
        for _ in range(50):
            if it >= max_iter:
                raise NumericError(
                    f"CG stagnated after {it} iterations "
                    f"(||r|| = {np.sqrt(rr):.3e} > {eps:.3e})")
            Ad = A(d)
            ifo += n
            it += 1
            dAd = float(d @ Ad)
            if not dAd > 0:
                raise NumericError("CG lost positive curvature")
            alpha = rr / dAd
            w = w + alpha * d
            r = r - alpha * Ad
            rr_new = float(r @ r)
            if np.sqrt(rr_new) <= eps:
                rr = rr_new
                break
            d = r + (rr_new / rr) * d
            rr = rr_new
        else:
            r = residual(w)
            ifo += n


def solve_direct(sub):
    """Exact stationary point of a quadratic subproblem (CG to ~1e-12).

    The residual tolerance is relative to the size of the terms in grad P,
    so a huge ``gamma`` does not push it below rounding level.
    """
    scale = (float(np.linalg.norm(sub.global_grad))
             + sub.gamma * float(np.linalg.norm(sub.anchor)))
    tol = 1e-12 * (1.0 + scale)
    w, _ = solve_cg(sub, sub.anchor, tol)
    return w


def solve_subproblem(sub, w_init, eps, method="auto", svrg=None, rng=None):
    """Dispatch to CG for quadratics and SVRG otherwise."""
    if method == "auto":
        method = "cg" if sub.is_quadratic else "svrg"
    if method == "cg":
        return solve_cg(sub, w_init, eps)
    if method == "svrg":
        return solve_svrg(sub, w_init, eps, svrg, rng=rng)
    if method == "direct":
        return solve_direct(sub), 0
    raise ConfigError(f"unknown inner solver {method!r}")
