import numpy as np
import pytest

from vropt import oracles
from vropt.checks import random_snapshot, robust_probe_objective, sigmoid_probe_objective
from vropt.errors import InstanceTooLarge, InvalidArgument
from vropt.model import QuadraticTest
from vropt.optimizers import ZeroSARAH
from vropt.schedule import schedule_preset


def test_full_batch_lam1_single_outcome():
    snap = random_snapshot(5, 5, 1.0, seed=0)
    rep = oracles.exhaustive_estimator_moments(snap)
    assert rep.count == 1
    assert rep.max_deviation == pytest.approx(0.0, abs=1e-15)
    assert rep.second_moment == pytest.approx(0.0, abs=1e-28)


def test_identity_and_variance_n4_b2():
    rep = oracles.exhaustive_estimator_moments(random_snapshot(4, 2, 0.3, seed=1))
    assert rep.count == 6
    assert rep.max_deviation <= 1e-10
    assert rep.rhs - rep.second_moment >= 0


def test_guard():
    with pytest.raises(InstanceTooLarge):
        oracles.exhaustive_estimator_moments(random_snapshot(13, 2, 0.5, seed=0))
    with pytest.raises(InvalidArgument):
        oracles.exhaustive_estimator_moments(random_snapshot(4, 5, 0.5, seed=0))


def test_table_drift_full_refresh():
    obj = QuadraticTest.random(4, 2, seed=0)
    rng = np.random.default_rng(0)
    rep = oracles.exhaustive_table_drift(obj, rng.standard_normal((4, 2)), rng.standard_normal(2), 4)
    assert rep.second_moment == 0.0 and rep.rhs == 0.0


def test_table_drift_two_thirds():
    obj = QuadraticTest.random(3, 2, seed=1)
    rng = np.random.default_rng(1)
    table, x = rng.standard_normal((3, 2)), rng.standard_normal(2)
    rep = oracles.exhaustive_table_drift(obj, table, x, 1)
    g = obj.gradients([0, 1, 2], x)
    current = np.mean(np.sum((g - table) ** 2, axis=1))
    assert rep.second_moment == pytest.approx(2 / 3 * current, rel=1e-14)
    with pytest.raises(InvalidArgument):
        oracles.exhaustive_table_drift(obj, table, x, 0)


def test_table_drift_n4_b2():
    obj = QuadraticTest.random(4, 3, seed=2)
    rng = np.random.default_rng(2)
    rep = oracles.exhaustive_table_drift(obj, rng.standard_normal((4, 3)), rng.standard_normal(3), 2)
    assert rep.count == 6 and rep.max_deviation <= 1e-10


def test_fd_unit_quadratic():
    obj = QuadraticTest.isotropic(2, 4)
    x = np.array([0.1, -3.0, 7.0, 1e-3])
    np.testing.assert_allclose(oracles.finite_difference_gradient(obj, x, h=1e-6), x, atol=1e-6)
    with pytest.raises(InvalidArgument):
        oracles.finite_difference_gradient(obj, x, h=0.0)


@pytest.mark.parametrize("make", [robust_probe_objective, sigmoid_probe_objective])
def test_fd_probe(make):
    obj = make()
    x = np.random.default_rng(4).standard_normal(obj.d)
    fd = oracles.finite_difference_gradient(obj, x)
    an = obj.full_gradient(x)
    assert np.linalg.norm(fd - an) <= 1e-5 * np.linalg.norm(an)


def test_oracles_deterministic():
    snap = random_snapshot(6, 3, 0.2, seed=3)
    a = oracles.exhaustive_estimator_moments(snap)
    b = oracles.exhaustive_estimator_moments(snap)
    assert np.array_equal(a.mean, b.mean) and a.second_moment == b.second_moment


def test_descent_relation_along_trajectory():
    obj = QuadraticTest.random(8, 3, seed=6)
    L = obj.smoothness()
    opt = ZeroSARAH(obj, schedule_preset("cor2", 8, L, scale=3.0), np.full(3, 2.0), seed=1)
    for _ in range(300):
        x = opt.x.copy()
        rep = opt.step()
        gap = oracles.descent_gap(obj, x, rep.v, rep.eta, L)
        assert gap >= -1e-9 * max(1.0, abs(obj.value(x)))


def test_dist_guard():
    # C(3,2) * C(12,6)^2 > 10^6 outcomes
    objs = [QuadraticTest.random(12, 2, seed=i) for i in range(3)]
    snap = oracles.DistSnapshot(objs, np.zeros(2), np.zeros(2), np.zeros(2), np.zeros((3, 12, 2)), 0.5, 2, 6)
    with pytest.raises(InstanceTooLarge):
        oracles.exhaustive_dist_moments(snap)


def test_oracles_do_not_import_optimizers():
    import ast
    import inspect

    tree = ast.parse(inspect.getsource(oracles))
    imported = {n.module for n in ast.walk(tree) if isinstance(n, ast.ImportFrom)}
    assert not imported & {"optimizers", "distributed", "table"}
