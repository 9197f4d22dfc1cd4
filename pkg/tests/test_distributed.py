import itertools
import math

import numpy as np
import pytest

from vropt.bounds import theoretical_bound, theoretical_bound_dist
from vropt.distributed import DSARAH, FULL, SAMPLED, DZeroSARAH, dsarah_round, dzerosarah_round
from vropt.errors import InvalidArgument
from vropt.model import QuadraticTest
from vropt.optimizers import ZeroSARAH
from vropt.oracles import DistSnapshot, exhaustive_dist_moments, exhaustive_dist_table_drift
from vropt.schedule import (
    DistSchedule, ParamSchedule, dist_schedule_preset, dsarah_schedule, schedule_preset, theoretical_stepsize,
)


def federation(n, m, d=3, seed=0):
    obj = QuadraticTest.random(n * m, d, seed=seed)
    return obj, [obj.restrict(range(i * m, (i + 1) * m)) for i in range(n)]


def test_first_round_full_participation_is_exact():
    obj, clients = federation(3, 4)
    x0 = np.array([1.0, 2.0, -1.0])
    fed = DZeroSARAH(clients, dist_schedule_preset("cor1d", 3, 4, obj.smoothness()), x0)
    ev = dzerosarah_round(fed)
    assert ev.participation == FULL
    assert np.array_equal(ev.v, fed.full_gradient(x0))
    np.testing.assert_allclose(ev.v, obj.full_gradient(x0), atol=1e-14)


def test_global_mean_consistency_every_round():
    obj, clients = federation(9, 16)
    fed = DZeroSARAH(clients, dist_schedule_preset("cor2d", 9, 16, obj.smoothness()), np.ones(3), seed=4)
    for _ in range(300):
        fed.step()
        assert fed.global_mean_drift() <= 1e-10


def test_unsampled_clients_do_no_work():
    obj, clients = federation(9, 16)
    fed = DZeroSARAH(clients, dist_schedule_preset("cor2d", 9, 16, obj.smoothness()), np.ones(3), seed=4)
    for _ in range(50):
        before = [c.counters.actual_count for c in fed.clients]
        tables = [c.table.entries.copy() for c in fed.clients]
        ev = fed.step()
        for i, c in enumerate(fed.clients):
            if i not in ev.sampled:
                assert c.counters.actual_count == before[i]
                assert np.array_equal(c.table.entries, tables[i])
            else:
                assert c.counters.actual_count > before[i]


def test_cor2d_no_full_participation():
    obj, clients = federation(4, 9)
    fed = DZeroSARAH(clients, dist_schedule_preset("cor2d", 4, 9, obj.smoothness()), np.ones(3))
    for _ in range(200):
        ev = fed.step()
        assert ev.participation == SAMPLED and len(ev.sampled) == 2
    assert fed.counters.full_batch_events == 0


def test_single_client_matches_sequential():
    obj = QuadraticTest.random(25, 3, seed=7)
    L = obj.smoothness()
    seq = ZeroSARAH(obj, schedule_preset("cor2", 25, L), np.ones(3), seed=11)
    fed = DZeroSARAH([obj], dist_schedule_preset("cor2d", 1, 25, L), np.ones(3), seed=11)
    for _ in range(200):
        seq.step(), fed.step()
        assert np.max(np.abs(seq.x - fed.x)) <= 1e-12


def test_exhaustive_identity_n2_m2():
    obj, clients = federation(2, 2, seed=3)
    rng = np.random.default_rng(0)
    snap = DistSnapshot(clients, rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3),
                        rng.standard_normal((2, 2, 3)), 0.4, 1, 1)
    rep = exhaustive_dist_moments(snap)
    assert rep.count == 4
    assert rep.max_deviation <= 1e-10
    assert rep.second_moment <= rep.rhs

    # the simulator's forced rounds average to the same mean
    sched = DistSchedule(2, 2, 0.1, 1, 1, 1, 1, 0.4)
    total = np.zeros(3)
    for i, j in itertools.product(range(2), range(2)):
        fed = DZeroSARAH(clients, sched, np.zeros(3))
        fed.x_curr, fed.x_prev, fed.v_prev = snap.x_curr.copy(), snap.x_prev.copy(), snap.v_prev.copy()
        for c in range(2):
            fed.clients[c].table.entries[:] = snap.tables[c]
            fed.clients[c].table.resync()
        fed.y_global = snap.tables.reshape(-1, 3).mean(axis=0)
        fed.round = 1
        total += fed.step(clients=[i], batches={i: [j]}).v
    np.testing.assert_allclose(total / 4, rep.mean, atol=1e-12)


def test_exhaustive_dist_table_drift():
    _, clients = federation(2, 3, seed=5)
    rng = np.random.default_rng(1)
    rep = exhaustive_dist_table_drift(clients, rng.standard_normal((2, 3, 3)), rng.standard_normal(3), 1, 2)
    assert rep.count == math.comb(2, 1) * math.comb(3, 2) ** 1
    assert rep.max_deviation <= 1e-10


def test_schedule_mismatch():
    _, clients = federation(2, 3)
    with pytest.raises(InvalidArgument):
        DZeroSARAH(clients, dist_schedule_preset("cor2d", 3, 2, 1.0), np.zeros(3))
    with pytest.raises(InvalidArgument):
        DZeroSARAH([], dist_schedule_preset("cor2d", 3, 2, 1.0), np.zeros(3))


def test_communication_units():
    obj, clients = federation(4, 9)
    fed = DZeroSARAH(clients, dist_schedule_preset("cor1d", 4, 9, obj.smoothness()), np.ones(3))
    ev = fed.step()
    assert (ev.comm_up, ev.comm_down) == (8, 4)
    ev = fed.step()
    assert (ev.comm_up, ev.comm_down) == (6, 2)


# ---- D-SARAH ---------------------------------------------------------------------

def test_dsarah_first_round_full():
    obj, clients = federation(3, 4)
    fed = DSARAH(clients, dsarah_schedule(3, 4, 0.1), np.ones(3))
    ev = dsarah_round(fed)
    assert ev.participation == FULL
    np.testing.assert_allclose(ev.v, obj.full_gradient(np.ones(3)), atol=1e-14)


@pytest.mark.parametrize("K", [1, 7, 8, 9, 50])
def test_dsarah_full_round_count(K):
    obj, clients = federation(4, 16)
    sched = dsarah_schedule(4, 16, 0.05)
    assert sched.l == 8
    fed = DSARAH(clients, sched, np.ones(3))
    fulls = sum(fed.step().participation == FULL for _ in range(K))
    assert fulls == math.ceil(K / sched.l)


def test_dsarah_full_sampling_telescopes():
    obj, clients = federation(3, 4)
    fed = DSARAH(clients, dsarah_schedule(3, 4, 0.1, l=5, s=3, b=4), np.ones(3))
    for _ in range(20):
        x = fed.x.copy()
        np.testing.assert_allclose(fed.step().v, obj.full_gradient(x), atol=1e-12)


# ---- bounds ----------------------------------------------------------------------

def test_bound_b0_equals_n():
    s = schedule_preset("cor1", 100, 2.0)
    K = 40
    assert theoretical_bound(3.0, 7.0, s, K) == pytest.approx(2 * 3.0 / (K * theoretical_stepsize(2.0)))


def test_bound_zero_inputs():
    assert theoretical_bound(0.0, 0.0, schedule_preset("cor2", 50, 1.0), 10) == 0.0
    assert theoretical_bound_dist(0.0, 0.0, dist_schedule_preset("cor2d", 4, 9, 1.0), 10) == 0.0


@pytest.mark.parametrize("n", [1, 2, 3, 10, 99, 100, 1385, 10**5])
@pytest.mark.parametrize("K", [1, 17, 1000])
def test_cor2_bound_closed_form(n, K):
    L, d0, G0 = 1.7, 2.5, 4.0
    b = theoretical_bound(d0, G0, schedule_preset("cor2", n, L), K)
    assert b <= (2 * (1 + math.sqrt(8)) * L * d0 + 6 * G0) / K * (1 + 1e-12)


@pytest.mark.parametrize("n, m", [(1, 1), (2, 3), (4, 16), (10, 417), (7, 50)])
@pytest.mark.parametrize("K", [1, 50])
def test_cor2d_bound_closed_form(n, m, K):
    L, d0, G0 = 0.9, 1.5, 3.0
    b = theoretical_bound_dist(d0, G0, dist_schedule_preset("cor2d", n, m, L), K)
    assert b <= (2 * (1 + math.sqrt(8)) * L * d0 + 4 * G0) / K * (1 + 1e-12)


def test_dist_bound_full_first_round():
    s = dist_schedule_preset("cor1d", 4, 9, 1.0)
    assert theoretical_bound_dist(1.0, 5.0, s, 10) == pytest.approx(2.0 / (10 * theoretical_stepsize(1.0)))


def test_bound_needs_theoretical_schedule():
    with pytest.raises(InvalidArgument):
        theoretical_bound(1.0, 1.0, schedule_preset("cor2", 10, 1.0, scale=3.0), 5)
    with pytest.raises(InvalidArgument):
        theoretical_bound(1.0, 1.0, ParamSchedule(10, 0.1, 3, 3, 0.5), 5)
    with pytest.raises(InvalidArgument):
        theoretical_bound(1.0, 1.0, schedule_preset("cor2", 10, 1.0), 0)
