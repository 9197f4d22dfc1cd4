"""Brute-force reference computations.

Nothing here calls into the optimizer modules: estimators are rebuilt
from their textbook definitions, one component gradient at a time, and
expectations are taken by listing every minibatch. Agreement with the
optimizers is only meaningful because the two paths share no code beyond
the objectives themselves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceTooLarge, InvalidArgument
from .model import Objective

MAX_OUTCOMES = 10**6
MAX_N = 12


@dataclass
class EnumerationReport:
    count: int
    mean: np.ndarray | None
    second_moment: float
    rhs: float
    max_deviation: float
    target: np.ndarray | None = None
    outcomes: dict = field(default_factory=dict, repr=False)


@dataclass
class EstimatorSnapshot:
    """Everything v^k depends on besides the minibatch draw."""

    obj: Objective
    x_curr: np.ndarray
    x_prev: np.ndarray
    v_prev: np.ndarray
    table: np.ndarray  # (n, d), y_j^{k-1}
    lam: float
    b: int


@dataclass
class DistSnapshot:
    client_objs: list
    x_curr: np.ndarray
    x_prev: np.ndarray
    v_prev: np.ndarray
    tables: np.ndarray  # (n, m, d), y_{i,j}^{k-1}
    lam: float
    s: int
    b: int


def _each_gradient(obj: Objective, x) -> np.ndarray:
    return np.stack([obj.gradients([i], x)[0] for i in range(obj.n)])


def _guard(n: int, count: int) -> None:
    if n > MAX_N or count > MAX_OUTCOMES:
        raise InstanceTooLarge(f"enumeration over {count} outcomes (n={n}) exceeds the guard")


def _sq(v) -> float:
    return float(np.dot(v, v))


def exhaustive_estimator_moments(snap: EstimatorSnapshot, L: float | None = None) -> EnumerationReport:
    """Average v^k over every b-subset.

    ``max_deviation`` is || E v^k - grad f(x^k) - (1-lam)(v^{k-1} - grad f(x^{k-1})) ||;
    ``rhs`` is the variance bound
    (1-lam)^2 ||v^{k-1} - grad f(x^{k-1})||^2 + 2L^2/b ||x^k - x^{k-1}||^2
    + 2 lam^2 / b * (1/n) sum_j ||grad f_j(x^{k-1}) - y_j||^2,
    to compare with ``second_moment`` = E ||v^k - grad f(x^k)||^2.
    """
    obj, n, b, lam = snap.obj, snap.obj.n, snap.b, snap.lam
    if not 1 <= b <= n:
        raise InvalidArgument("need 1 <= b <= n")
    count = math.comb(n, b)
    _guard(n, count)
    L = obj.smoothness() if L is None else L
    gc = _each_gradient(obj, snap.x_curr)
    gp = _each_gradient(obj, snap.x_prev)
    y = np.asarray(snap.table, dtype=np.float64)
    full_c, full_p = gc.mean(axis=0), gp.mean(axis=0)
    y_bar = y.mean(axis=0)

    outcomes = {}
    total = np.zeros(obj.d)
    second = 0.0
    for I in itertools.combinations(range(n), b):
        I = list(I)
        v = (
            (gc[I] - gp[I]).sum(axis=0) / b
            + (1 - lam) * snap.v_prev
            + lam * ((gp[I] - y[I]).sum(axis=0) / b + y_bar)
        )
        outcomes[tuple(I)] = v
        total += v
        second += _sq(v - full_c)
    mean = total / count
    target = full_c + (1 - lam) * (snap.v_prev - full_p)
    rhs = (
        (1 - lam) ** 2 * _sq(snap.v_prev - full_p)
        + 2 * L**2 / b * _sq(snap.x_curr - snap.x_prev)
        + 2 * lam**2 / b * float(np.mean(np.sum((gp - y) ** 2, axis=1)))
    )
    return EnumerationReport(count, mean, second / count, rhs,
                             float(np.linalg.norm(mean - target)), target, outcomes)


def exhaustive_table_drift(obj: Objective, table, x, b: int) -> EnumerationReport:
    """E over b-subsets of (1/n) sum_j ||grad f_j(x) - y_j^new||^2, where the
    subset's rows are refreshed to grad f_i(x). ``rhs`` is
    (1 - b/n) (1/n) sum_j ||grad f_j(x) - y_j||^2 and ``max_deviation`` the
    relative gap between the two."""
    n = obj.n
    if not 1 <= b <= n:
        raise InvalidArgument("need 1 <= b <= n")
    count = math.comb(n, b)
    _guard(n, count)
    g = _each_gradient(obj, x)
    y = np.asarray(table, dtype=np.float64)
    per_row = np.sum((g - y) ** 2, axis=1)
    total = 0.0
    for I in itertools.combinations(range(n), b):
        keep = np.ones(n, dtype=bool)
        keep[list(I)] = False
        total += float(per_row[keep].sum()) / n
    lhs = total / count
    rhs = (1 - b / n) * float(per_row.mean())
    dev = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)
    return EnumerationReport(count, None, lhs, rhs, dev)


def exhaustive_dist_moments(snap: DistSnapshot, L: float | None = None) -> EnumerationReport:
    """Federated analogue of :func:`exhaustive_estimator_moments`.

    Enumerates every client subset of size s and, for each sampled client,
    every local minibatch of size b: C(n,s) * C(m,b)^s outcomes. ``rhs`` is
    the variance bound with s*b in place of b and the average over all nm
    table rows.
    """
    objs = snap.client_objs
    n, m, s, b, lam = len(objs), objs[0].n, snap.s, snap.b, snap.lam
    count = math.comb(n, s) * math.comb(m, b) ** s
    _guard(n, count)
    if L is None:
        L = max(o.smoothness() for o in objs)
    gc = np.stack([_each_gradient(o, snap.x_curr) for o in objs])  # (n, m, d)
    gp = np.stack([_each_gradient(o, snap.x_prev) for o in objs])
    y = np.asarray(snap.tables, dtype=np.float64)
    full_c = gc.reshape(-1, gc.shape[-1]).mean(axis=0)
    full_p = gp.reshape(-1, gp.shape[-1]).mean(axis=0)
    y_global = y.reshape(-1, y.shape[-1]).mean(axis=0)

    local = list(itertools.combinations(range(m), b))
    total = np.zeros(full_c.shape)
    second = 0.0
    for S in itertools.combinations(range(n), s):
        for batches in itertools.product(local, repeat=s):
            diff = np.zeros_like(total)
            corr = np.zeros_like(total)
            for i, I in zip(S, batches):
                I = list(I)
                g_curr = gc[i, I].mean(axis=0)
                g_prev = gp[i, I].mean(axis=0)
                y_prev = y[i, I].mean(axis=0)
                diff += g_curr - g_prev
                corr += g_prev - y_prev
            v = diff / s + (1 - lam) * snap.v_prev + lam * corr / s + lam * y_global
            total += v
            second += _sq(v - full_c)
    mean = total / count
    target = full_c + (1 - lam) * (snap.v_prev - full_p)
    rhs = (
        (1 - lam) ** 2 * _sq(snap.v_prev - full_p)
        + 2 * L**2 / (s * b) * _sq(snap.x_curr - snap.x_prev)
        + 2 * lam**2 / (s * b) * float(np.mean(np.sum((gp - y) ** 2, axis=-1)))
    )
    return EnumerationReport(count, mean, second / count, rhs, float(np.linalg.norm(mean - target)), target)


def exhaustive_dist_table_drift(client_objs, tables, x, s: int, b: int) -> EnumerationReport:
    """Refresh sampled (client, sample) rows at x; compare the expected table
    error with (1 - s b / (n m)) times the current one."""
    n, m = len(client_objs), client_objs[0].n
    count = math.comb(n, s) * math.comb(m, b) ** s
    _guard(n, count)
    g = np.stack([_each_gradient(o, x) for o in client_objs])
    y = np.asarray(tables, dtype=np.float64)
    per_row = np.sum((g - y) ** 2, axis=-1)  # (n, m)
    local = list(itertools.combinations(range(m), b))
    total = 0.0
    for S in itertools.combinations(range(n), s):
        for batches in itertools.product(local, repeat=s):
            keep = np.ones((n, m), dtype=bool)
            for i, I in zip(S, batches):
                keep[i, list(I)] = False
            total += float(per_row[keep].sum()) / (n * m)
    lhs = total / count
    rhs = (1 - s * b / (n * m)) * float(per_row.mean())
    dev = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)
    return EnumerationReport(count, None, lhs, rhs, dev)


def finite_difference_gradient(obj: Objective, x, h: float = 1e-6, i: int | None = None) -> np.ndarray:
    """Central differences of f (or of f_i when ``i`` is given)."""
    if not h > 0:
        raise InvalidArgument("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    idx = list(range(obj.n)) if i is None else [i]

    def f(z):
        return math.fsum(obj.losses(idx, z)) / len(idx)

    out = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def descent_gap(obj: Objective, x, v, eta: float, L: float) -> float:
    """RHS - LHS of the one-step descent inequality for x+ = x - eta v:

    f(x+) <= f(x) - eta/2 ||grad f(x)||^2 - (1/(2 eta) - L/2)||x+ - x||^2
             + eta/2 ||v - grad f(x)||^2

    Nonnegative whenever f is L-smooth.
    """
    x = np.asarray(x, dtype=np.float64)
    x_next = x - eta * v
    g = np.stack([obj.gradients([i], x)[0] for i in range(obj.n)]).mean(axis=0)
    f = lambda z: math.fsum(obj.losses(list(range(obj.n)), z)) / obj.n  # noqa: E731
    rhs = (
        f(x) - eta / 2 * _sq(g)
        - (1 / (2 * eta) - L / 2) * _sq(x_next - x)
        + eta / 2 * _sq(v - g)
    )
    return rhs - f(x_next)
