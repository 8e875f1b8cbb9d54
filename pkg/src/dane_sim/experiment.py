"""Configuration-driven sweeps over algorithms, machine counts and seeds.

Config files are plain ``key = value`` lines; ``#`` starts a comment.
Algorithms are declared by name in ``algorithms`` and tuned with
``algorithm.<name>.<field>`` keys::

    experiment_id = ridge_scaling
    problem = ridge
    N = 2000
    p = 200
    m_list = 4, 16, 64
    replications = 3
    algorithms = ls, hb
    algorithm.ls.type = dane_ls
    algorithm.hb.type = dane_hb

See :data:`TOP_LEVEL_KEYS` and :data:`ALGORITHM_KEYS` for every key.
"""
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .algorithms import ALGORITHMS, RunConfig, Target, cluster_constants, run
from .cluster import ClusterState, CommunicationLedger, LocalView
from .data import gen_logistic, gen_ridge, load_libsvm, normalize_rows, \
    partition_even
from .errors import ConfigError, ContractViolation
from .local_solver import Subproblem, SvrgConfig, solve_direct
from .model import LossModel, Objective
from .oracles import recommended_gamma

PROBLEMS = ("ridge", "logistic", "libsvm")


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    algorithm: str
    line_search: str = None
    rho: float = 0.1
    max_rounds: int = 1000
    mu_source: str = "hessian"
    hb_line_search: bool = False
    inner_solver: str = "auto"
    beta: float = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str = "experiment"
    problem: str = "ridge"
    libsvm_path: str = None
    loss: str = None                 # libsvm only: ridge or logistic
    normalize: bool = False
    N: int = 2000
    p: int = 200
    noise_sigma: float = 0.1
    mu_rule: str = "inv_sqrt_n"
    mu_value: float = None
    m_list: tuple = (4, 16, 64)
    gamma_rule: str = "recommended"
    gamma_delta: float = 0.1
    gamma_c: float = 40.0
    gamma_value: float = None
    algorithms: tuple = ()
    eps_target: float = 1e-5
    target: str = "grad_norm"
    replications: int = 1
    base_seed: int = 0
    record_wall_time: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.problem == "libsvm" and not self.libsvm_path:
            raise ConfigError("problem = libsvm needs libsvm_path")
        if self.mu_rule not in ("inv_sqrt_n", "fixed"):
            raise ConfigError(f"unknown mu_rule {self.mu_rule!r}")
        if self.mu_rule == "fixed" and self.mu_value is None:
            raise ConfigError("mu_rule = fixed needs mu_value")
        if self.gamma_rule not in ("recommended", "scaled", "fixed"):
            raise ConfigError(f"unknown gamma_rule {self.gamma_rule!r}")
        if self.gamma_rule == "fixed" and self.gamma_value is None:
            raise ConfigError("gamma_rule = fixed needs gamma_value")
        if self.target not in ("grad_norm", "iterate_error"):
            raise ConfigError(f"unknown target {self.target!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.m_list or any(m < 1 for m in self.m_list):
            raise ConfigError("m_list needs positive machine counts")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        if not self.eps_target > 0:
            raise ConfigError("eps_target must be > 0")
        if self.problem != "libsvm":
            for m in self.m_list:
                if m > self.N:
                    raise ConfigError(f"m={m} exceeds N={self.N}")

    @property
    def loss_kind(self):
        if self.problem == "libsvm":
            return self.loss or "logistic"
        return self.problem


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    algorithm: str
    m: int
    replication: int
    seed: int
    rounds_to_target: int
    final_value: float
    final_grad_norm: float
    vectors_transmitted: int
    total_ifo: int
    wall_time: float
    status: str


RESULT_FIELDS = tuple(f.name for f in fields(ResultRow))


# ---------------------------------------------------------------------------
# config text format

def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    def parse(s):
        return None if s.strip().lower() in ("none", "") else conv(s)
    return parse


def _int_list(s):
    return tuple(int(x) for x in s.replace(",", " ").split())


def _name_list(s):
    return tuple(x for x in s.replace(",", " ").split())


TOP_LEVEL_KEYS = {
    "experiment_id": str,
    "problem": str,
    "libsvm_path": _opt(str),
    "loss": _opt(str),
    "normalize": _bool,
    "N": int,
    "p": int,
    "noise_sigma": float,
    "mu_rule": str,
    "mu_value": _opt(float),
    "m_list": _int_list,
    "gamma_rule": str,
    "gamma_delta": float,
    "gamma_c": float,
    "gamma_value": _opt(float),
    "algorithms": _name_list,
    "eps_target": float,
    "target": str,
    "replications": int,
    "base_seed": int,
    "record_wall_time": _bool,
}

ALGORITHM_KEYS = {
    "type": str,
    "line_search": _opt(str),
    "rho": float,
    "max_rounds": int,
    "mu_source": str,
    "hb_line_search": _bool,
    "inner_solver": str,
    "beta": _opt(float),
}


def parse_config(text):
    """Parse the key-value format into an :class:`ExperimentConfig`."""
    top, algo = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        try:
            if key.startswith("algorithm."):
                parts = key.split(".")
                if len(parts) != 3 or parts[2] not in ALGORITHM_KEYS:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
                algo.setdefault(parts[1], {})[parts[2]] = \
                    ALGORITHM_KEYS[parts[2]](value)
            elif key in TOP_LEVEL_KEYS:
                top[key] = TOP_LEVEL_KEYS[key](value)
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return build_config(top, algo)


def build_config(top, algo=None):
    algo = algo or {}
    names = top.pop("algorithms", tuple(algo))
    unknown = set(algo) - set(names)
    if unknown:
        raise ConfigError(f"settings for undeclared algorithms: {sorted(unknown)}")
    specs = []
    for name in names:
        opts = dict(algo.get(name, {}))
        kind = opts.pop("type", name)
        if kind not in ALGORITHMS:
            raise ConfigError(f"algorithm {name!r} has unknown type {kind!r}")
        spec = AlgorithmSpec(name=name, algorithm=kind, **opts)
        # surface bad option values now rather than mid-sweep
        RunConfig(algorithm=kind, gamma=0.0, rho=spec.rho,
                  line_search=spec.line_search, max_rounds=spec.max_rounds,
                  mu_source=spec.mu_source, hb_line_search=spec.hb_line_search)
        if spec.inner_solver not in ("auto", "cg", "svrg", "direct"):
            raise ConfigError(f"unknown inner solver {spec.inner_solver!r}")
        specs.append(spec)
    return ExperimentConfig(algorithms=tuple(specs), **top)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg, overrides):
    """``overrides`` maps top-level keys to raw strings (CLI ``--param``)."""
    changes = {}
    for key, raw in overrides.items():
        if key == "m":
            key = "m_list"
        if key not in TOP_LEVEL_KEYS or key == "algorithms":
            raise ConfigError(f"cannot override {key!r}")
        try:
            changes[key] = TOP_LEVEL_KEYS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return replace(cfg, **changes)


# ---------------------------------------------------------------------------
# running

def derive_seed(base_seed, *parts):
    """``base_seed`` XOR a stable 63-bit hash of ``parts``."""
    h = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(h, "little")) & (2 ** 63 - 1)


def _dataset(cfg, rep):
    seed = derive_seed(cfg.base_seed, "data", rep)
    if cfg.problem == "ridge":
        data, _ = gen_ridge(cfg.N, cfg.p, cfg.noise_sigma, seed=seed)
    elif cfg.problem == "logistic":
        data, _ = gen_logistic(cfg.N, cfg.p, seed=seed)
    else:
        data = load_libsvm(cfg.libsvm_path, binary=cfg.loss_kind == "logistic")
    if cfg.normalize:
        data = normalize_rows(data)
    return data


def _mu(cfg, N):
    return 1.0 / math.sqrt(N) if cfg.mu_rule == "inv_sqrt_n" else cfg.mu_value


def _gamma(cfg, cluster):
    if cfg.gamma_rule == "fixed":
        return cfg.gamma_value
    if cfg.gamma_rule == "scaled":
        return cfg.gamma_c / math.sqrt(cluster.n)
    L = cluster_constants(cluster)["L"]
    return recommended_gamma(L, cluster.p, cluster.n, cfg.gamma_delta)


def _w_star(cluster):
    """Global minimiser of a quadratic objective (direct solve with m = 1)."""
    view = LocalView(cluster.objective, CommunicationLedger(), 1)
    w0 = np.zeros(cluster.p)
    sub = Subproblem(view, w0, cluster.objective.gradient(w0), 0.0)
    return solve_direct(sub)


def run_cell(cfg, spec, cluster, rep, m, w_star=None):
    seed = derive_seed(cfg.base_seed, spec.name, m, rep)
    if cfg.target == "iterate_error":
        target = Target("iterate_error", cfg.eps_target, w_star=w_star)
    else:
        target = Target("grad_norm", cfg.eps_target)
    rc = RunConfig(algorithm=spec.algorithm, gamma=_gamma(cfg, cluster),
                   rho=spec.rho, line_search=spec.line_search,
                   beta_override=spec.beta, max_rounds=spec.max_rounds,
                   target=target, inner_solver=spec.inner_solver,
                   svrg=SvrgConfig(rng_seed=seed), mu_source=spec.mu_source,
                   hb_line_search=spec.hb_line_search, seed=seed)
    c = cluster.fresh_copy()
    t0 = time.perf_counter()
    tr = run(c, rc)
    wall = time.perf_counter() - t0
    fin = tr.final
    status = tr.status if not tr.message else f"{tr.status}: {tr.message}"
    return ResultRow(
        experiment_id=cfg.experiment_id, algorithm=spec.name, m=m,
        replication=rep, seed=seed, rounds_to_target=tr.rounds_to_target(),
        final_value=fin.value, final_grad_norm=fin.grad_norm,
        vectors_transmitted=fin.ledger.vectors_transmitted,
        total_ifo=fin.ledger.ifo_calls,
        wall_time=wall if cfg.record_wall_time else None, status=status), tr


def run_experiment(cfg, keep_transcripts=False):
    """Every (algorithm, m, replication) cell, rows in config order.

    All algorithms of one (m, replication) share the dataset and partition;
    solver seeds additionally depend on the algorithm.  Failures are
    recorded in the row status and never abort the sweep.
    """
    cells = {}
    transcripts = {}
    for rep in range(cfg.replications):
        data = _dataset(cfg, rep)
        model = LossModel(cfg.loss_kind, reg_mu=_mu(cfg, data.n_samples))
        for m in cfg.m_list:
            parts = partition_even(data, m, derive_seed(cfg.base_seed, "split", m, rep))
            cluster = ClusterState(Objective(model, data), parts)
            w_star = _w_star(cluster) if cfg.target == "iterate_error" else None
            for spec in cfg.algorithms:
                try:
                    row, tr = run_cell(cfg, spec, cluster, rep, m, w_star)
                except (ContractViolation, ArithmeticError, RuntimeError) as exc:
                    row, tr = _failed_row(cfg, spec, rep, m, exc), None
                cells[(spec.name, m, rep)] = row
                if keep_transcripts:
                    transcripts[(spec.name, m, rep)] = tr
    rows = [cells[(s.name, m, rep)] for s in cfg.algorithms for m in cfg.m_list
            for rep in range(cfg.replications)]
    return (rows, transcripts) if keep_transcripts else rows


def _failed_row(cfg, spec, rep, m, exc):
    return ResultRow(cfg.experiment_id, spec.name, m, rep,
                     derive_seed(cfg.base_seed, spec.name, m, rep), None,
                     float("nan"), float("nan"), 0, 0, None,
                     f"Error: {type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# output

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(rows, stream):
    """Header plus one line per row, LF endings, floats at 17 digits."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in rows:
        w.writerow([_fmt(getattr(r, k)) for k in RESULT_FIELDS])


def csv_text(rows):
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def read_csv(stream):
    out = []
    for rec in csv.DictReader(stream):
        out.append(rec)
    return out


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    degenerate: bool
    ms: tuple = ()
    medians: tuple = ()


def median_rounds(rows, algorithm=None):
    """{m: median rounds_to_target} over rows that reached the target."""
    by_m = {}
    for r in rows:
        if algorithm is not None and r.algorithm != algorithm:
            continue
        if r.rounds_to_target is None:
            continue
        by_m.setdefault(r.m, []).append(r.rounds_to_target)
    return {m: float(np.median(v)) for m, v in sorted(by_m.items())}


def fit_scaling(rows, algorithm=None):
    """Least squares of ln(median rounds) on ln(m)."""
    med = median_rounds(rows, algorithm)
    if len(med) < 3:
        raise ContractViolation("scaling fit needs >= 3 distinct m values "
                                "with converged runs")
    ms = np.array(list(med), dtype=np.float64)
    ys = np.array(list(med.values()))
    if np.any(ys <= 0):
        raise ContractViolation("rounds must be positive for a log-log fit")
    x, y = np.log(ms), np.log(ys)
    if np.all(ys == ys[0]):
        return ScalingFit(0.0, float(y[0]), 1.0, True, tuple(ms), tuple(ys))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return ScalingFit(float(slope), float(intercept), r2, False, tuple(ms),
                      tuple(ys))


def summary_lines(cfg, rows):
    """JSON-lines summary: one record per (algorithm, m), one fit per algorithm."""
    out = []
    for spec in cfg.algorithms:
        mine = [r for r in rows if r.algorithm == spec.name]
        for m in cfg.m_list:
            cell = [r for r in mine if r.m == m]
            done = [r.rounds_to_target for r in cell if r.rounds_to_target is not None]
            out.append({"experiment_id": cfg.experiment_id, "algorithm": spec.name,
                        "m": m, "runs": len(cell), "converged": len(done),
                        "median_rounds": float(np.median(done)) if done else None})
        if len(cfg.m_list) >= 3:
            try:
                fit = fit_scaling(mine)
                out.append({"experiment_id": cfg.experiment_id,
                            "algorithm": spec.name, "scaling_slope": fit.slope,
                            "r2": fit.r2, "degenerate": fit.degenerate})
            except ContractViolation as exc:
                out.append({"experiment_id": cfg.experiment_id,
                            "algorithm": spec.name, "scaling_error": str(exc)})
    return [json.dumps(o, sort_keys=True) for o in out]
