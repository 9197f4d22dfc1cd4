"""In-process simulation of an n-client federation.

Clients run one after another in ascending id order, each drawing its
minibatch from its own stream keyed by (seed, round, client id); the server
draws the client subset from the (seed, round, SERVER) stream. Runs are
therefore reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import theoretical_bound_dist  # noqa: F401  (re-exported)
from .errors import DivergenceError, InvalidArgument
from .model import Objective, _as_point
from .optimizers import GradCounter
from .sampling import SERVER, sample_clients, sample_without_replacement, stream
from .schedule import DistSchedule, DSarahSchedule
from .table import GradientTable

FULL = "full"
SAMPLED = "sampled"


@dataclass
class ClientState:
    client_id: int
    obj: Objective
    table: GradientTable
    counters: GradCounter = field(default_factory=GradCounter)

    @property
    def m(self) -> int:
        return self.obj.n

    @property
    def local_mean(self) -> np.ndarray:
        return self.table.running_mean


@dataclass
class RoundEvent:
    round: int
    sampled: tuple[int, ...]
    participation: str
    paper_evals: int
    actual_evals: int
    eta: float
    v: np.ndarray
    # vectors of dimension d sent client -> server and server -> client
    comm_up: int = 0
    comm_down: int = 0


class _FederationBase:
    def __init__(self, client_objs: list[Objective], x0, seed: int):
        if not client_objs:
            raise InvalidArgument("need at least one client")
        m = {c.n for c in client_objs}
        d = {c.d for c in client_objs}
        if len(m) != 1 or len(d) != 1:
            raise InvalidArgument("all clients must hold the same number of samples and dimension")
        self.m = m.pop()
        self.d = d.pop()
        self.n = len(client_objs)
        self.clients = [ClientState(i, obj, GradientTable(self.m, self.d)) for i, obj in enumerate(client_objs)]
        self.x_curr = _as_point(x0, self.d).copy()
        self.x_prev = self.x_curr.copy()
        self.v_prev = np.zeros(self.d)
        self.round = 0
        self.seed = int(seed)
        self.counters = GradCounter()

    @property
    def x(self) -> np.ndarray:
        return self.x_curr

    def full_gradient(self, x=None) -> np.ndarray:
        """Measurement only; does not touch any counter."""
        x = self.x_curr if x is None else x
        acc = np.zeros(self.d)
        for c in self.clients:
            acc += c.obj.full_gradient(x)
        return acc / self.n

    def value(self, x=None) -> float:
        x = self.x_curr if x is None else x
        return float(sum(c.obj.value(x) for c in self.clients) / self.n)

    def _sample(self, k: int, s: int, forced_clients):
        if forced_clients is not None:
            S = np.sort(np.asarray(forced_clients, dtype=np.intp))
            if len(S) != s:
                raise InvalidArgument(f"forced client set has size {len(S)}, schedule says {s}")
            return S
        return sample_clients(self.n, s, stream(self.seed, k, SERVER))

    def _minibatch(self, k: int, i: int, b: int, forced):
        if forced is not None and i in forced:
            return np.asarray(forced[i], dtype=np.intp)
        return sample_without_replacement(self.m, b, stream(self.seed, k, i))

    def _advance(self, v: np.ndarray, eta: float) -> None:
        if not np.all(np.isfinite(v)):
            raise DivergenceError(self.round, "estimator")
        with np.errstate(over="ignore", invalid="ignore"):
            x_next = self.x_curr - eta * v
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(self.round, "iterate")
        self.x_prev, self.x_curr, self.v_prev = self.x_curr, x_next, v
        self.round += 1


class DZeroSARAH(_FederationBase):
    """Federated ZeroSARAH with partial participation.

    Each client keeps a table of per-sample gradients and its mean y_i; the
    server keeps y = (1/n) sum_i y_i and updates it only from the clients it
    sampled, so unsampled clients are never contacted.
    """

    def __init__(self, client_objs: list[Objective], schedule: DistSchedule, x0, seed: int = 0):
        super().__init__(client_objs, x0, seed)
        if (schedule.n, schedule.m) != (self.n, self.m):
            raise InvalidArgument("schedule was built for a different (n, m)")
        self.schedule = schedule
        self.y_global = np.zeros(self.d)

    def global_mean_drift(self) -> float:
        exact = sum(c.table.true_mean() for c in self.clients) / self.n
        return float(np.linalg.norm(self.y_global - exact) / (1.0 + np.linalg.norm(exact)))

    def step(self, clients=None, batches=None) -> RoundEvent:
        """One round. ``clients``/``batches`` force the random draws (for oracles)."""
        sched = self.schedule
        k = self.round
        s, b = sched.clients(k), sched.batch(k)
        lam, eta = sched.lam(k), sched.eta(k)
        S = self._sample(k, s, clients)
        full = s == self.n and b == self.m

        sum_curr = np.zeros(self.d)
        sum_prev = np.zeros(self.d)
        sum_ytab = np.zeros(self.d)
        y_shift = np.zeros(self.d)
        per_client = b if lam == 1.0 else 2 * b
        for i in S:
            c = self.clients[i]
            I = self._minibatch(k, int(i), b, batches)
            rows, g_curr = c.obj.gradients_and_mean(I, self.x_curr)
            sum_curr += g_curr
            if lam != 1.0:
                sum_prev += c.obj.mean_gradient(I, self.x_prev)
            sum_ytab += c.table.mean_of(I)
            old = c.local_mean.copy()
            c.table.replace(I, rows)
            y_shift += c.local_mean - old
            c.counters.add(b, per_client, b == self.m)

        v = sum_curr / s
        if lam != 1.0:
            v = v + (1.0 - lam) * (self.v_prev - sum_prev / s)
        if not full:
            # uses y^{k-1}: the server mean from before this round
            v = v + lam * (self.y_global - sum_ytab / s)
        self.y_global = self.y_global + y_shift / self.n

        self._advance(v, eta)
        self.counters.add(s * b, s * per_client, full)
        return RoundEvent(
            k, tuple(int(i) for i in S), FULL if full else SAMPLED,
            s * b, s * per_client, eta, v,
            comm_up=(2 if full else 3) * s, comm_down=s,
        )


class DSARAH(_FederationBase):
    """Federated SARAH: every l-th round all clients send full local gradients."""

    def __init__(self, client_objs: list[Objective], schedule: DSarahSchedule, x0, seed: int = 0):
        super().__init__(client_objs, x0, seed)
        if (schedule.n, schedule.m) != (self.n, self.m):
            raise InvalidArgument("schedule was built for a different (n, m)")
        self.schedule = schedule

    def step(self, clients=None, batches=None) -> RoundEvent:
        sched = self.schedule
        k = self.round
        if k % sched.l == 0:
            acc = np.zeros(self.d)
            for c in self.clients:
                acc += c.obj.full_gradient(self.x_curr)
                c.counters.add(self.m, self.m, True)
            v = acc / self.n
            self._advance(v, sched.eta)
            nm = self.n * self.m
            self.counters.add(nm, nm, True)
            return RoundEvent(k, tuple(range(self.n)), FULL, nm, nm, sched.eta, v,
                              comm_up=self.n, comm_down=self.n)

        s, b = sched.s, sched.b
        S = self._sample(k, s, clients)
        acc = np.zeros(self.d)
        for i in S:
            c = self.clients[i]
            I = self._minibatch(k, int(i), b, batches)
            acc += c.obj.mean_gradient(I, self.x_curr) - c.obj.mean_gradient(I, self.x_prev)
            c.counters.add(b, 2 * b, False)
        v = acc / s + self.v_prev
        self._advance(v, sched.eta)
        self.counters.add(s * b, 2 * s * b, False)
        return RoundEvent(k, tuple(int(i) for i in S), SAMPLED, s * b, 2 * s * b, sched.eta, v,
                          comm_up=s, comm_down=s)


def dzerosarah_round(fed: DZeroSARAH, clients=None, batches=None) -> RoundEvent:
    return fed.step(clients, batches)


def dsarah_round(fed: DSARAH, clients=None, batches=None) -> RoundEvent:
    return fed.step(clients, batches)
