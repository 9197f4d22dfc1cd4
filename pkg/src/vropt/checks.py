"""Oracle battery behind ``vropt check``.

Each check builds a small instance, runs one brute-force oracle against it
and returns a :class:`CheckResult`. Seeds are fixed so the table is stable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import oracles
from .data import SyntheticSpec, synthesize_dataset
from .distributed import DZeroSARAH
from .model import QuadraticTest, RobustLinearRegression, SigmoidSquared, default_regularizer
from .optimizers import ZeroSARAH
from .schedule import ParamSchedule, dist_schedule_preset, schedule_preset

TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_snapshot(n: int, b: int, lam: float, seed: int, d: int = 3) -> oracles.EstimatorSnapshot:
    rng = np.random.default_rng(seed)
    obj = QuadraticTest.random(n, d, seed=seed)
    return oracles.EstimatorSnapshot(
        obj, rng.standard_normal(d), rng.standard_normal(d), rng.standard_normal(d),
        rng.standard_normal((n, d)), lam, b,
    )


def check_estimator_identity(cases=((4, 2, 0.25), (6, 3, 0.1)), states: int = 5) -> CheckResult:
    worst = 0.0
    for n, b, lam in cases:
        for s in range(states):
            worst = max(worst, oracles.exhaustive_estimator_moments(random_snapshot(n, b, lam, 100 * n + s)).max_deviation)
    return CheckResult("estimator mean identity", worst <= TOL, f"max deviation {worst:.2e}")


def check_table_drift(cases=((4, 2), (6, 2)), states: int = 5) -> CheckResult:
    worst = 0.0
    for n, b in cases:
        for s in range(states):
            rng = np.random.default_rng(7 * n + s)
            obj = QuadraticTest.random(n, 3, seed=s)
            rep = oracles.exhaustive_table_drift(obj, rng.standard_normal((n, 3)), rng.standard_normal(3), b)
            worst = max(worst, rep.max_deviation)
    return CheckResult("table refresh equality", worst <= TOL, f"max relative deviation {worst:.2e}")


def check_variance_bound(states: int = 10) -> CheckResult:
    slack = np.inf
    for s in range(states):
        n, b = (4, 2) if s % 2 == 0 else (6, 3)
        rep = oracles.exhaustive_estimator_moments(random_snapshot(n, b, 0.1 + 0.08 * s, 500 + s))
        slack = min(slack, rep.rhs - rep.second_moment)
    return CheckResult("estimator variance bound", slack >= 0, f"min slack {slack:.3e}")


def check_dist_identity(states: int = 5) -> CheckResult:
    worst_mean, worst_drift, slack = 0.0, 0.0, np.inf
    for s in range(states):
        rng = np.random.default_rng(900 + s)
        clients = QuadraticTest.random(4, 3, seed=s).restrict
        objs = [clients([0, 1]), clients([2, 3])]
        snap = oracles.DistSnapshot(objs, rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3),
                                    rng.standard_normal((2, 2, 3)), 0.3, 1, 1)
        rep = oracles.exhaustive_dist_moments(snap, L=max(o.smoothness() for o in objs))
        worst_mean = max(worst_mean, rep.max_deviation)
        slack = min(slack, rep.rhs - rep.second_moment)
        drift = oracles.exhaustive_dist_table_drift(objs, snap.tables, snap.x_curr, 1, 1)
        worst_drift = max(worst_drift, drift.max_deviation)
    ok = worst_mean <= TOL and worst_drift <= TOL and slack >= 0
    return CheckResult("federated estimator (n=2,m=2,s=1,b=1)", ok,
                       f"mean dev {worst_mean:.2e}, table dev {worst_drift:.2e}, min slack {slack:.2e}")


def _fd_rel_error(obj, probes: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        x = rng.standard_normal(obj.d)
        fd = oracles.finite_difference_gradient(obj, x)
        an = obj.full_gradient(x)
        worst = max(worst, float(np.linalg.norm(fd - an) / max(np.linalg.norm(an), 1e-12)))
    return worst


def robust_probe_objective(seed: int = 0) -> RobustLinearRegression:
    return RobustLinearRegression(synthesize_dataset(SyntheticSpec(50, 6, "regression", 0.5, seed)))


def sigmoid_probe_objective(seed: int = 0) -> SigmoidSquared:
    ds = synthesize_dataset(SyntheticSpec(50, 6, "classification", 0.5, seed))
    return SigmoidSquared(ds, max(default_regularizer(ds), 1e-3))


def check_finite_differences(probes: int = 20) -> CheckResult:
    r = _fd_rel_error(robust_probe_objective(), probes, 1)
    s = _fd_rel_error(sigmoid_probe_objective(), probes, 2)
    return CheckResult("finite-difference gradients", max(r, s) <= 1e-5,
                       f"robust {r:.2e}, sigmoid {s:.2e}")


def check_descent_relation(steps: int = 200) -> CheckResult:
    obj = QuadraticTest.random(6, 3, seed=3)
    L = obj.smoothness()
    opt = ZeroSARAH(obj, schedule_preset("cor2", obj.n, L), np.ones(3), seed=4)
    worst = np.inf
    for _ in range(steps):
        x = opt.x.copy()
        rep = opt.step()
        gap = oracles.descent_gap(obj, x, rep.v, rep.eta, L)
        worst = min(worst, gap / max(1.0, abs(obj.value(x))))
    return CheckResult("one-step descent inequality", worst >= -1e-9, f"min relative gap {worst:.2e}")


def check_collapse(steps: int = 100) -> CheckResult:
    from .optimizers import GD

    obj = QuadraticTest.random(5, 3, seed=9)
    eta = 0.5 / obj.smoothness()
    z = ZeroSARAH(obj, ParamSchedule(obj.n, eta, obj.n, obj.n, 1.0), np.ones(3), seed=1)
    g = GD(obj, eta, np.ones(3))
    same = True
    for _ in range(steps):
        z.step(), g.step()
        same &= np.array_equal(z.x, g.x)
    n1 = QuadraticTest.random(9, 3, seed=2)
    L = n1.smoothness()
    seq = ZeroSARAH(n1, schedule_preset("cor2", 9, L), np.ones(3), seed=5)
    fed = DZeroSARAH([n1], dist_schedule_preset("cor2d", 1, 9, L), np.ones(3), seed=5)
    dev = 0.0
    for _ in range(steps):
        seq.step(), fed.step()
        dev = max(dev, float(np.max(np.abs(seq.x - fed.x))))
    return CheckResult("collapse to GD / single client", same and dev <= 1e-12,
                       f"GD bitwise={same}, single-client dev {dev:.2e}")


ALL_CHECKS = (
    check_estimator_identity, check_table_drift, check_variance_bound, check_dist_identity,
    check_finite_differences, check_descent_relation, check_collapse,
)


def run_checks() -> list[CheckResult]:
    out = []
    for fn in ALL_CHECKS:
        t = time.perf_counter()
        res = fn()
        res.seconds = time.perf_counter() - t
        out.append(res)
    return out
