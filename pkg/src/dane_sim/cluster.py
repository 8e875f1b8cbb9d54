"""Single-process simulation of an m-machine master/worker cluster.

Workers hold disjoint partitions of the data; the master (machine 1) owns
partition 1.  Every reduction goes through this module, which charges the
communication ledger: rounds, p-vectors moved, scalars moved and
incremental first-order oracle (IFO) calls.
"""
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, EstimationError
from .model import Objective, top_eigenvalue

# dense Hessian difference is formed up to this dimension
DENSE_DEVIATION_MAX_P = 4096


@dataclass
class CommunicationLedger:
    rounds: int = 0
    vectors_transmitted: int = 0
    scalars_transmitted: int = 0
    ifo_calls: int = 0
    value_rounds: int = 0

    def charge_gradient_round(self, m):
        self.rounds += 1
        self.vectors_transmitted += m + 1

    def charge_value_round(self, m):
        # m scalars up, candidate point broadcast down
        self.rounds += 1
        self.value_rounds += 1
        self.scalars_transmitted += m
        self.vectors_transmitted += 1

    def charge_averaging_round(self, m):
        self.rounds += 1
        self.vectors_transmitted += m + 1

    def charge_ifo(self, k):
        self.ifo_calls += int(k)

    def snapshot(self):
        return LedgerSnapshot(**asdict(self))

    def reconstructed_vectors(self, m):
        """Vectors implied by the round counts; must equal the tally."""
        return (self.rounds - self.value_rounds) * (m + 1) + self.value_rounds


@dataclass(frozen=True)
class LedgerSnapshot:
    rounds: int
    vectors_transmitted: int
    scalars_transmitted: int
    ifo_calls: int
    value_rounds: int

    def reconstructed_vectors(self, m):
        return (self.rounds - self.value_rounds) * (m + 1) + self.value_rounds


class LocalView:
    """Oracles of one machine's local objective F_j, charging IFO calls."""

    def __init__(self, objective, ledger, machine_index):
        self.objective = objective
        self.ledger = ledger
        self.machine_index = machine_index

    @property
    def n_samples(self):
        return self.objective.n_samples

    @property
    def n_features(self):
        return self.objective.n_features

    @property
    def is_quadratic(self):
        return self.objective.is_quadratic

    @property
    def model(self):
        return self.objective.model

    @property
    def data(self):
        return self.objective.data

    def value(self, w):
        self.ledger.charge_ifo(self.n_samples)
        return self.objective.value(w)

    def gradient(self, w):
        self.ledger.charge_ifo(self.n_samples)
        return self.objective.gradient(w)

    def hessian_vec(self, w, v):
        return self.objective.hessian_vec(w, v)


class ClusterState:
    """Data, partitions, loss and ledger of a simulated cluster.

    The global objective is built on the union of partition rows (the
    truncated dataset), in ascending row order.
    """

    def __init__(self, objective, partitions, ledger=None, master_index=1):
        if master_index != 1:
            raise ConfigError("the master is always machine 1")
        if not partitions:
            raise ConfigError("need at least one partition")
        sizes = {len(pt.sample_indices) for pt in partitions}
        if len(sizes) != 1:
            raise ConfigError("partitions must have equal size")
        self.partitions = list(partitions)
        self.master_index = master_index
        self.ledger = ledger if ledger is not None else CommunicationLedger()
        self.source_objective = objective
        self.cache = {}
        rows = np.sort(np.concatenate([pt.sample_indices for pt in partitions]))
        if len(np.unique(rows)) != len(rows):
            raise ConfigError("partitions overlap")
        if len(rows) == objective.n_samples and rows[-1] == len(rows) - 1:
            self.objective = objective
        else:
            self.objective = objective.restrict(rows)
        self.local_objectives = [objective.restrict(pt.sample_indices)
                                 for pt in self.partitions]

    @classmethod
    def from_dataset(cls, model, data, partitions, ledger=None):
        return cls(Objective(model, data), partitions, ledger=ledger)

    @property
    def m(self):
        return len(self.partitions)

    @property
    def n(self):
        return len(self.partitions[0].sample_indices)

    @property
    def p(self):
        return self.objective.n_features

    @property
    def model(self):
        return self.objective.model

    @property
    def data(self):
        return self.objective.data

    def with_objective(self, objective):
        """Same partitions and ledger, different (e.g. surrogate) objective.

        ``objective`` must be defined on the same rows as the original
        dataset, so each machine can restrict it to its own samples.
        """
        clone = object.__new__(ClusterState)
        clone.partitions = self.partitions
        clone.master_index = self.master_index
        clone.ledger = self.ledger
        clone.source_objective = objective
        clone.cache = {}
        rows = np.sort(np.concatenate([pt.sample_indices for pt in self.partitions]))
        clone.objective = (objective if objective.n_samples == len(rows)
                           else objective.restrict(rows))
        clone.local_objectives = [objective.restrict(pt.sample_indices)
                                  for pt in self.partitions]
        return clone

    def fresh_copy(self):
        """Independent ledger, shared immutable data."""
        clone = object.__new__(ClusterState)
        clone.__dict__.update(self.__dict__)
        clone.ledger = CommunicationLedger()
        return clone

    # -- reductions ---------------------------------------------------------

    def reduce_gradient(self, w):
        """Average of worker gradients, summed in ascending machine order."""
        w = np.asarray(w, dtype=np.float64)
        total = np.zeros(self.p)
        for obj in self.local_objectives:
            total += obj.gradient(w)
        self.ledger.charge_gradient_round(self.m)
        self.ledger.charge_ifo(self.m * self.n)
        return total / self.m

    def reduce_value(self, w):
        value = self.evaluate_value(w)
        self.ledger.charge_value_round(self.m)
        self.ledger.charge_ifo(self.m * self.n)
        return value

    def evaluate_value(self, w):
        """F(w) with the same arithmetic as :meth:`reduce_value`, uncharged.

        Used for transcript diagnostics only.
        """
        w = np.asarray(w, dtype=np.float64)
        total = 0.0
        for obj in self.local_objectives:
            total += obj.value(w)
        return total / self.m

    def average_models(self, models):
        """Master averages one p-vector per machine and broadcasts it."""
        total = np.zeros(self.p)
        for wj in models:
            total += wj
        if self.m > 1:
            self.ledger.charge_averaging_round(self.m)
        return total / self.m

    # -- local views ----------------------------------------------------------

    def local_view(self, machine_index):
        return LocalView(self.local_objectives[machine_index - 1], self.ledger,
                         machine_index)

    def master_local_view(self):
        return self.local_view(self.master_index)

    def hessian_deviation(self, w, machine_index=None, tol=1e-6,
                          max_iter=5000):
        """Spectral norm ||H_j(w) - H(w)|| for the master (or ``machine_index``)."""
        j = self.master_index if machine_index is None else machine_index
        local = self.local_objectives[j - 1]
        w = np.asarray(w, dtype=np.float64)
        p = self.p
        if p <= DENSE_DEVIATION_MAX_P:
            D = local.hessian_matrix(w) - self.objective.hessian_matrix(w)
            return float(np.max(np.abs(np.linalg.eigvalsh(D))))

        def mv(v):
            d = local.hessian_vec(w, v) - self.objective.hessian_vec(w, v)
            return local.hessian_vec(w, d) - self.objective.hessian_vec(w, d)
        try:
            # D is indefinite: iterate on D^2 and take the square root
            return float(np.sqrt(top_eigenvalue(mv, p, tol=tol, max_iter=max_iter)))
        except EstimationError as exc:
            raise EstimationError("hessian deviation did not converge",
                                  best=np.sqrt(max(exc.best, 0.0))) from exc


def build_cluster(model, data, m, seed=0):
    from .data import partition_even
    return ClusterState.from_dataset(model, data, partition_even(data, m, seed))
