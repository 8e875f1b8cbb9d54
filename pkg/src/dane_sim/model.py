"""ERM objectives for linear prediction models.

Two losses are supported, both with an l2 penalty ``(mu/2)||w||^2``:

* ``ridge``     l(u, y) = (scale/2) (y - u)^2
* ``logistic``  l(u, y) = log(1 + exp(-y u))

where ``u = x_i^T w`` is the margin of sample ``i``.  ``scale`` is 1 for
plain ridge regression; the quadratic surrogate built around a logistic
iterate is a ridge problem with ``scale = ell`` on pseudo-targets.
"""
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ContractViolation, EstimationError, NumericOverflow

RIDGE = "ridge"
LOGISTIC = "logistic"
KINDS = (RIDGE, LOGISTIC)

# max |d^3/du^3 log(1 + exp(-u))|, attained where sigmoid(u) = 1/2 +- 1/(2 sqrt 3)
LOGISTIC_THIRD_DERIV_BOUND = 1.0 / (6.0 * np.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix (N x p, dense ndarray or CSR) with a label vector."""

    features: object
    labels: np.ndarray

    def __post_init__(self):
        X = self.features
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
            X.sort_indices()
            data = X.data
        else:
            X = np.ascontiguousarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ContractViolation("features must be a 2-d matrix")
            data = X
        y = np.ascontiguousarray(self.labels, dtype=np.float64).reshape(-1)
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ContractViolation("dataset needs N >= 1 and p >= 1")
        if y.shape[0] != X.shape[0]:
            raise ContractViolation(
                f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(data)) or not np.all(np.isfinite(y)):
            raise ContractViolation("non-finite entry in dataset")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.features)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices])

    def row_norms(self):
        X = self.features
        if sp.issparse(X):
            return np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        return np.sqrt(np.einsum("ij,ij->i", X, X))

    def has_binary_labels(self):
        return bool(np.all(np.abs(self.labels) == 1.0))


@dataclass(frozen=True)
class LossModel:
    kind: str
    reg_mu: float = 0.0
    domain_radius_B: float = 10.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown loss kind {self.kind!r}")
        if self.reg_mu < 0:
            raise ContractViolation("reg_mu must be >= 0")
        if self.domain_radius_B <= 0:
            raise ContractViolation("domain_radius_B must be > 0")
        if self.scale <= 0:
            raise ContractViolation("scale must be > 0")

    @property
    def is_quadratic(self):
        return self.kind == RIDGE


@dataclass(frozen=True)
class SmoothnessProfile:
    """Curvature constants of an objective.

    ``L`` and ``mu`` bound the global Hessian, ``ell``/``sigma`` bound the
    univariate link curvature and ``nu`` is the Hessian Lipschitz constant.
    ``L_max`` bounds every per-sample Hessian and ``mu_hessian`` is the
    largest certified lower bound on the global Hessian spectrum we can
    compute (``lambda_min`` for quadratics, ``reg_mu`` otherwise).
    """

    L: float
    mu: float
    ell: float
    sigma: float
    nu: float
    L_max: float = float("nan")
    mu_hessian: float = float("nan")

    @property
    def kappa(self):
        return self.L / self.mu


# ---------------------------------------------------------------------------
# univariate link functions, vectorised over margins


def link_value(model, u, y):
    if model.kind == RIDGE:
        return 0.5 * model.scale * (y - u) ** 2
    return np.logaddexp(0.0, -y * u)


def link_slope(model, u, y):
    if model.kind == RIDGE:
        return model.scale * (u - y)
    return -y * expit(-y * u)


def link_curvature(model, u, y):
    if model.kind == RIDGE:
        return np.full_like(u, model.scale)
    s = expit(y * u)
    return s * (1.0 - s)


# ---------------------------------------------------------------------------
# objective oracles


def _check(model, data, *vectors):
    p = data.n_features
    for v in vectors:
        if v.ndim != 1 or v.shape[0] != p:
            raise ContractViolation(
                f"expected vector of length {p}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ContractViolation("non-finite input vector")
    if model.kind == LOGISTIC and not data.has_binary_labels():
        raise ContractViolation("logistic loss needs labels in {-1, +1}")


def _vec(w):
    return np.asarray(w, dtype=np.float64)


def value(model, data, w):
    """Average loss (1/N) sum_i f(w; x_i, y_i) including the l2 term."""
    w = _vec(w)
    _check(model, data, w)
    u = data.features @ w
    out = float(np.mean(link_value(model, u, data.labels))) \
        + 0.5 * model.reg_mu * float(w @ w)
    if not np.isfinite(out):
        raise NumericOverflow("objective value is not finite")
    return out


def gradient(model, data, w):
    w = _vec(w)
    _check(model, data, w)
    u = data.features @ w
    r = link_slope(model, u, data.labels)
    g = data.features.T @ r / data.n_samples + model.reg_mu * w
    g = np.asarray(g).reshape(-1)
    if not np.all(np.isfinite(g)):
        raise NumericOverflow("gradient is not finite")
    return g


def hessian_vec(model, data, w, v):
    """Hessian-vector product without forming the p x p Hessian."""
    w, v = _vec(w), _vec(v)
    _check(model, data, w, v)
    X = data.features
    if model.kind == RIDGE:
        d = model.scale
        Hv = X.T @ (X @ v) * (d / data.n_samples)
    else:
        d = link_curvature(model, X @ w, data.labels)
        Hv = X.T @ (d * (X @ v)) / data.n_samples
    return np.asarray(Hv).reshape(-1) + model.reg_mu * v


class Objective:
    """Binds a loss model to a dataset; ``offset`` shifts values only."""

    def __init__(self, model, data, offset=0.0):
        self.model = model
        self.data = data
        self.offset = float(offset)
        if model.kind == LOGISTIC and not data.has_binary_labels():
            raise ContractViolation("logistic loss needs labels in {-1, +1}")

    @property
    def n_samples(self):
        return self.data.n_samples

    @property
    def n_features(self):
        return self.data.n_features

    @property
    def is_quadratic(self):
        return self.model.is_quadratic

    def value(self, w):
        return value(self.model, self.data, w) + self.offset

    def gradient(self, w):
        return gradient(self.model, self.data, w)

    def hessian_vec(self, w, v):
        return hessian_vec(self.model, self.data, w, v)

    def restrict(self, indices):
        return Objective(self.model, self.data.subset(indices), self.offset)

    def hessian_matrix(self, w):
        """Dense Hessian; only for small p (tests and oracles)."""
        X = self.data.features
        if sp.issparse(X):
            X = X.toarray()
        d = link_curvature(self.model, X @ _vec(w), self.data.labels)
        H = (X.T * d) @ X / self.n_samples
        H[np.diag_indices_from(H)] += self.model.reg_mu
        return H


# ---------------------------------------------------------------------------
# smoothness constants


def top_eigenvalue(matvec, p, tol=1e-8, max_iter=1000, seed=0):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(p)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        Av = matvec(v)
        lam_new = float(v @ Av)
        nrm = np.linalg.norm(Av)
        if nrm == 0.0:
            return 0.0
        v = Av / nrm
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise EstimationError(
        f"power iteration did not converge in {max_iter} steps", best=lam)


def _gram_matvec(data, c):
    X, N = data.features, data.n_samples

    def mv(v):
        return np.asarray(X.T @ (X @ v)).reshape(-1) * (c / N)
    return mv


def gram_min_eigenvalue(data, c=1.0):
    """lambda_min of c X^T X / N (0 when p > N)."""
    N, p = data.n_samples, data.n_features
    if p > N:
        return 0.0
    X = data.features
    if p <= 2048:
        G = X.T @ X
        if sp.issparse(G):
            G = G.toarray()
        return max(float(np.linalg.eigvalsh(G * (c / N))[0]), 0.0)
    from scipy.sparse.linalg import LinearOperator, eigsh
    op = LinearOperator((p, p), matvec=_gram_matvec(data, c), dtype=np.float64)
    lam = eigsh(op, k=1, which="SA", return_eigenvectors=False, tol=1e-8)
    return max(float(lam[0]), 0.0)


def gram_max_eigenvalue(data, c=1.0, tol=1e-8, max_iter=1000):
    """lambda_max of c X^T X / N by power iteration.

    Power iteration stalls when the top two eigenvalues nearly coincide;
    for p <= 2048 that case falls back to a dense eigendecomposition.
    """
    try:
        return top_eigenvalue(_gram_matvec(data, c), data.n_features, tol=tol,
                              max_iter=max_iter)
    except EstimationError:
        if data.n_features > 2048:
            raise
    G = data.features.T @ data.features
    if sp.issparse(G):
        G = G.toarray()
    return float(np.linalg.eigvalsh(G * (c / data.n_samples))[-1])


def link_bounds(model):
    """(ell, sigma): upper/lower bounds of the link's second derivative."""
    if model.kind == RIDGE:
        return model.scale, model.scale
    B = model.domain_radius_B
    return 0.25, float(np.exp(-B) / (1.0 + np.exp(-B)) ** 2)


def smoothness_profile(model, data, L=None, tol=1e-8, max_iter=1000):
    """Estimate the curvature constants of ``F`` on ``data``.

    ``L = lambda_max(ell X^T X / N) + mu`` by power iteration unless given.
    """
    ell, sigma = link_bounds(model)
    if L is None:
        L = gram_max_eigenvalue(data, ell, tol=tol, max_iter=max_iter) \
            + model.reg_mu
    norms = data.row_norms()
    L_max = ell * float(np.max(norms)) ** 2 + model.reg_mu
    if model.kind == RIDGE:
        nu = 0.0
        mu_hessian = gram_min_eigenvalue(data, ell) + model.reg_mu
    else:
        nu = LOGISTIC_THIRD_DERIV_BOUND * float(np.max(norms)) ** 3
        mu_hessian = model.reg_mu
    return SmoothnessProfile(L=float(L), mu=model.reg_mu, ell=ell, sigma=sigma,
                             nu=nu, L_max=L_max, mu_hessian=mu_hessian)


# ---------------------------------------------------------------------------
# quadratic surrogate around an anchor


def surrogate_quadratic(model, data, anchor, ell):
    """Quadratic model of F around ``anchor`` with link curvature ``ell``.

    Q(w) = F~(a) + <grad F~(a), w - a> + 1/2 (w-a)^T (ell X^T X / N) (w-a)
           + (mu/2)||w||^2

    Returned as a ridge objective with ``scale = ell`` on pseudo-targets
    ``z_i = x_i^T a - l'(x_i^T a)/ell`` plus a constant offset, so every
    machine can build its share of Q from local rows only.
    """
    a = _vec(anchor)
    _check(model, data, a)
    if ell <= 0:
        raise ContractViolation("ell must be > 0")
    u = data.features @ a
    slope = link_slope(model, u, data.labels)
    z = u - slope / ell
    loss_at_anchor = float(np.mean(link_value(model, u, data.labels)))
    offset = loss_at_anchor - float(np.mean(slope ** 2)) / (2.0 * ell)
    qmodel = replace(model, kind=RIDGE, scale=float(ell))
    return Objective(qmodel, LabeledDataset(data.features, z), offset=offset)
