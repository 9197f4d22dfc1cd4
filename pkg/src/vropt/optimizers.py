"""Sequential optimizers: ZeroSARAH, SARAH and full-gradient descent.

Each optimizer owns an :class:`OptimizerState` and advances it one
iteration per ``step()``. Gradient evaluations are tallied two ways:
``paper_count`` adds b_k per iteration (the nominal count) while
``actual_count`` adds every component gradient really evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidArgument
from .model import Objective, _as_point
from .sampling import sample_without_replacement, stream
from .schedule import ParamSchedule, SarahSchedule
from .table import GradientTable


@dataclass
class GradCounter:
    paper_count: int = 0
    actual_count: int = 0
    full_batch_events: int = 0

    def add(self, nominal: int, actual: int, full: bool) -> None:
        self.paper_count += nominal
        self.actual_count += actual
        self.full_batch_events += int(full)


@dataclass
class StepReport:
    k: int
    batch: int
    paper_evals: int
    actual_evals: int
    full_batch: bool
    eta: float
    v: np.ndarray
    indices: np.ndarray | None = None


@dataclass
class OptimizerState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    v_prev: np.ndarray
    table: GradientTable | None
    k: int
    seed: int
    counters: GradCounter = field(default_factory=GradCounter)
    inner: int = 0  # SARAH only: position inside the current epoch

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.x_curr.copy(), self.x_prev.copy(), self.v_prev.copy(),
            None if self.table is None else self.table.copy(),
            self.k, self.seed,
            GradCounter(**vars(self.counters)), self.inner,
        )


def _advance(state: OptimizerState, v: np.ndarray, eta: float) -> None:
    if not np.all(np.isfinite(v)):
        raise DivergenceError(state.k, "estimator")
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = state.x_curr - eta * v
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(state.k, "iterate")
    state.x_prev = state.x_curr
    state.x_curr = x_next
    state.v_prev = v
    state.k += 1


def _fresh_state(obj: Objective, x0, seed: int, with_table: bool) -> OptimizerState:
    x0 = _as_point(x0, obj.d).copy()
    return OptimizerState(
        x_curr=x0, x_prev=x0.copy(), v_prev=np.zeros(obj.d),
        table=GradientTable(obj.n, obj.d) if with_table else None,
        k=0, seed=int(seed),
    )


def _minibatch(n: int, b: int, seed: int, k: int) -> np.ndarray:
    return sample_without_replacement(n, b, stream(seed, k, 0))


class ZeroSARAH:
    """Single-loop SARAH variant that never needs a full gradient.

    At iteration k, with minibatch I of size b_k and table mean y_bar,

        v^k = g_I(x^k) - g_I(x^{k-1}) + (1 - lam_k) v^{k-1}
              + lam_k (g_I(x^{k-1}) - y_I + y_bar)

    where g_I and y_I are minibatch means. It is evaluated in the
    equivalent form g_I(x^k) + (1-lam_k)(v^{k-1} - g_I(x^{k-1}))
    + lam_k (y_bar - y_I): the second term drops when lam_k = 1 and the
    third when I is the whole index set, so those cases cost no extra
    evaluations and reproduce gradient descent exactly.
    """

    def __init__(self, obj: Objective, schedule: ParamSchedule, x0, seed: int = 0):
        if schedule.n != obj.n:
            raise InvalidArgument("schedule was built for a different n")
        self.obj = obj
        self.schedule = schedule
        self.state = _fresh_state(obj, x0, seed, with_table=True)

    @property
    def x(self) -> np.ndarray:
        return self.state.x_curr

    def step(self, indices=None) -> StepReport:
        st, obj, sched = self.state, self.obj, self.schedule
        k = st.k
        b = sched.batch(k)
        lam = sched.lam(k)
        eta = sched.eta(k)
        if indices is None:
            idx = _minibatch(obj.n, b, st.seed, k)
        else:
            idx = np.asarray(indices, dtype=np.intp)
            if len(idx) != b:
                raise InvalidArgument(f"forced minibatch has size {len(idx)}, schedule says {b}")

        rows, v = obj.gradients_and_mean(idx, st.x_curr)
        actual = b
        if lam != 1.0:
            # at k = 0, lam = 1 and x^{-1} = x^0, so this never runs there
            v = v + (1.0 - lam) * (st.v_prev - obj.mean_gradient(idx, st.x_prev))
            actual += b
        if b < obj.n:
            v = v + lam * (st.table.running_mean - st.table.mean_of(idx))
        st.table.replace(idx, rows)

        full = b == obj.n
        _advance(st, v, eta)
        st.counters.add(b, actual, full)
        return StepReport(k, b, b, actual, full, eta, v, idx)


class SARAH:
    """Epoch-based SARAH: full gradient, then l recursive minibatch steps.

    One ``step()`` is one iteration; the epoch restarts from the last
    iterate x^{l+1}.
    """

    def __init__(self, obj: Objective, schedule: SarahSchedule, x0, seed: int = 0):
        if schedule.n != obj.n:
            raise InvalidArgument("schedule was built for a different n")
        self.obj = obj
        self.schedule = schedule
        self.state = _fresh_state(obj, x0, seed, with_table=False)

    @property
    def x(self) -> np.ndarray:
        return self.state.x_curr

    def step(self, indices=None) -> StepReport:
        st, obj, sched = self.state, self.obj, self.schedule
        k = st.k
        if st.inner == 0:
            v = obj.full_gradient(st.x_curr)
            _advance(st, v, sched.eta)
            st.counters.add(obj.n, obj.n, True)
            st.inner = 1 if sched.l > 0 else 0
            return StepReport(k, obj.n, obj.n, obj.n, True, sched.eta, v, None)

        b = sched.b
        idx = _minibatch(obj.n, b, st.seed, k) if indices is None else np.asarray(indices, dtype=np.intp)
        v = obj.mean_gradient(idx, st.x_curr) - obj.mean_gradient(idx, st.x_prev) + st.v_prev
        _advance(st, v, sched.eta)
        st.counters.add(b, 2 * b, False)
        st.inner = 0 if st.inner == sched.l else st.inner + 1
        return StepReport(k, b, b, 2 * b, False, sched.eta, v, idx)

    def run_epoch(self) -> list[StepReport]:
        if self.state.inner != 0:
            raise InvalidArgument("run_epoch must start at an epoch boundary")
        reports = [self.step()]
        while self.state.inner != 0:
            reports.append(self.step())
        return reports


class GD:
    def __init__(self, obj: Objective, eta: float, x0, seed: int = 0):
        self.obj = obj
        self.eta = float(eta)
        self.state = _fresh_state(obj, x0, seed, with_table=False)

    @property
    def x(self) -> np.ndarray:
        return self.state.x_curr

    def step(self, indices=None) -> StepReport:
        st = self.state
        k = st.k
        v = self.obj.full_gradient(st.x_curr)
        _advance(st, v, self.eta)
        st.counters.add(self.obj.n, self.obj.n, True)
        return StepReport(k, self.obj.n, self.obj.n, self.obj.n, True, self.eta, v, None)


def zerosarah_init(obj: Objective, x0, schedule: ParamSchedule, seed: int = 0) -> ZeroSARAH:
    return ZeroSARAH(obj, schedule, x0, seed)


def zerosarah_step(opt: ZeroSARAH, indices=None) -> StepReport:
    return opt.step(indices)


def sarah_run_epoch(opt: SARAH) -> list[StepReport]:
    return opt.run_epoch()


def gd_step(opt: GD) -> StepReport:
    return opt.step()


def run_iterations(opt, K: int) -> tuple[list[np.ndarray], list[float]]:
    """Run K iterations; return the iterates x^0..x^{K-1} and their stepsizes."""
    iterates, etas = [], []
    for _ in range(K):
        iterates.append(opt.x.copy())
        etas.append(opt.step().eta)
    return iterates, etas


def select_output(iterates, etas, rng: np.random.Generator) -> np.ndarray:
    """Draw x^k with probability eta_k / sum_t eta_t."""
    if len(iterates) == 0:
        raise InvalidArgument("empty iterate history")
    if len(iterates) != len(etas):
        raise InvalidArgument("iterate and stepsize histories differ in length")
    w = np.asarray(etas, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise InvalidArgument("stepsizes must be nonnegative with positive sum")
    return iterates[int(rng.choice(len(w), p=w / w.sum()))]
