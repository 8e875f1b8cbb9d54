"""Synthetic data, LIBSVM text I/O and random partitioning over machines.

Randomness comes from numpy's PCG64.  Every consumer draws from its own
substream ``SeedSequence(seed, spawn_key=(stream, ...))`` so data
generation, partitioning and solver sampling never share state.
"""
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ParseError
from .model import LabeledDataset

STREAM_DATA = 0
STREAM_PARTITION = 1
STREAM_SOLVER = 2

# above this many dense cells parse_libsvm keeps CSR storage
DENSE_CELL_LIMIT = 50_000_000


def substream(seed, *keys):
    """Independent generator for ``(seed, keys)``; keys are small ints."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Partition:
    machine_index: int
    sample_indices: np.ndarray


def gen_ridge(n_total, p, noise_sigma=0.1, seed=0):
    """Linear-model regression data: y = X w_bar + e, e ~ N(0, noise_sigma^2).

    Returns ``(dataset, w_bar)``.
    """
    if n_total < 1 or p < 1 or noise_sigma < 0:
        raise ConfigError("gen_ridge needs n_total >= 1, p >= 1, noise >= 0")
    rng = substream(seed, STREAM_DATA)
    X = rng.standard_normal((n_total, p))
    w_bar = rng.standard_normal(p)
    y = X @ w_bar
    if noise_sigma > 0:
        y = y + noise_sigma * rng.standard_normal(n_total)
    return LabeledDataset(X, y), w_bar


def logistic_link_probability(w_bar, x, y):
    """P(y | x; w_bar) = exp(2 y w_bar^T x) / (1 + exp(2 y w_bar^T x))."""
    t = 2.0 * y * (x @ w_bar)
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def gen_logistic(n_total, p, seed=0):
    """Binary labels drawn from the logistic link with a Gaussian w_bar."""
    if n_total < 1 or p < 1:
        raise ConfigError("gen_logistic needs n_total >= 1 and p >= 1")
    rng = substream(seed, STREAM_DATA)
    X = rng.standard_normal((n_total, p))
    w_bar = rng.standard_normal(p)
    p_pos = logistic_link_probability(w_bar, X, 1.0)
    y = np.where(rng.random(n_total) < p_pos, 1.0, -1.0)
    return LabeledDataset(X, y), w_bar


def normalize_rows(data):
    """Scale every x_i with ||x_i|| > 1 onto the unit sphere."""
    norms = data.row_norms()
    scale = 1.0 / np.maximum(norms, 1.0)
    X = data.features
    if sp.issparse(X):
        X = sp.diags(scale) @ X
    else:
        X = X * scale[:, None]
    return LabeledDataset(X, data.labels)


# ---------------------------------------------------------------------------
# LIBSVM


def _lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, (bytes, bytearray)):
            raw = raw.decode("utf-8")
        yield raw


def _map_label(token, lineno, binary):
    try:
        lab = float(token)
    except ValueError:
        raise ParseError(f"bad label {token!r}", lineno) from None
    if not binary:
        return lab
    if lab == 1.0:
        return 1.0
    if lab in (0.0, -1.0):
        return -1.0
    raise ParseError(f"label {token!r} is not in {{-1, 0, +1}}", lineno)


def parse_libsvm(stream, n_features=None, binary=True, dense=None):
    """Parse ``<label> <idx>:<val> ...`` lines (1-based, increasing indices).

    ``binary`` maps labels {0, 1} / {-1, +1} onto {-1, +1}; ``dense=None``
    picks dense storage unless the matrix would be very large.
    """
    labels, rows, cols, vals = [], [], [], []
    p = 0
    n = 0
    for lineno, line in enumerate(_lines(stream), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        labels.append(_map_label(parts[0], lineno, binary))
        last = 0
        for tok in parts[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed pair {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"index {idx} is not 1-based", lineno)
            if idx <= last:
                raise ParseError(
                    f"indices must increase strictly ({last} then {idx})",
                    lineno)
            if not np.isfinite(val):
                raise ParseError(f"non-finite value {val_s!r}", lineno)
            last = idx
            rows.append(n)
            cols.append(idx - 1)
            vals.append(val)
        p = max(p, last)
        n += 1
    if n == 0:
        raise ParseError("no samples in input")
    if n_features is not None:
        if n_features < p:
            raise ParseError(f"feature index {p} exceeds n_features={n_features}")
        p = n_features
    p = max(p, 1)
    X = sp.csr_matrix((np.asarray(vals, dtype=np.float64),
                       (np.asarray(rows, dtype=np.int64),
                        np.asarray(cols, dtype=np.int64))), shape=(n, p))
    if dense is None:
        dense = n * p <= DENSE_CELL_LIMIT
    if dense:
        X = X.toarray()
    return LabeledDataset(X, np.asarray(labels))


def write_libsvm(data, stream):
    """Write ``data`` as LIBSVM text with 17 significant digits."""
    X = data.features
    csr = X if sp.issparse(X) else sp.csr_matrix(X)
    out = []
    for i in range(data.n_samples):
        start, stop = csr.indptr[i], csr.indptr[i + 1]
        pairs = " ".join(f"{j + 1}:{v:.17g}" for j, v in
                         zip(csr.indices[start:stop], csr.data[start:stop])
                         if v != 0.0)
        label = f"{data.labels[i]:.17g}"
        out.append(f"{label} {pairs}".rstrip() + "\n")
    text = "".join(out)
    if isinstance(stream, io.TextIOBase) or hasattr(stream, "encoding"):
        stream.write(text)
    else:
        stream.write(text.encode("utf-8"))


def load_libsvm(path, **kw):
    with open(path, "rb") as fh:
        return parse_libsvm(fh, **kw)


# ---------------------------------------------------------------------------
# partitioning


def truncated_size(N, m):
    if m < 1:
        raise ConfigError("m must be >= 1")
    if m > N:
        raise ConfigError(f"m={m} machines exceed N={N} samples")
    return m * (N // m)


def partition_even(data, m, seed=0):
    """Random even split of the first m*floor(N/m) rows over m machines.

    Machine indices are 1-based; machine 1 is the master.
    """
    N = data.n_samples if hasattr(data, "n_samples") else int(data)
    used = truncated_size(N, m)
    n = used // m
    perm = substream(seed, STREAM_PARTITION).permutation(used)
    # rows kept in ascending order so m=1 reproduces the serial sums bitwise
    return [Partition(j + 1, np.sort(perm[j * n:(j + 1) * n])) for j in range(m)]
