import itertools
import math
import warnings

import numpy as np
import pytest

from edid.acceptance import brute_force_pairs
from edid.mobility import CRW
from edid.sim import (
    ConfigError, DiffusionCurve, EncounterEvent, EncounterLog, SimConfig,
    collect, curves_to_csv, detect_encounters, init_world, run, step,
)


def test_pair_just_inside_range():
    assert detect_encounters([(10.0, 10.0), (19.9, 10.0)], 10.0) == {(0, 1)}


@pytest.mark.parametrize("other", [(20.0, 10.0), (16.0, 18.0)])
def test_pair_at_exact_range_is_absent(other):
    # (10,0) and (6,8) offsets are exactly 10 m
    assert detect_encounters([(10.0, 10.0), other], 10.0) == set()


def test_spatial_hash_matches_brute_force_on_random_placements():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pos = rng.random((50, 2)) * 200.0
        assert detect_encounters(pos, 10.0) == brute_force_pairs(pos, 10.0)


def test_spatial_hash_dense_and_degenerate_cases():
    rng = np.random.default_rng(1)
    pos = rng.random((200, 2)) * 30.0
    assert detect_encounters(pos, 10.0) == brute_force_pairs(pos, 10.0)
    same = np.zeros((5, 2))
    assert detect_encounters(same, 1.0) == set(itertools.combinations(range(5), 2))
    assert detect_encounters([(1.0, 1.0)], 5.0) == set()


def test_pairs_do_not_depend_on_labels():
    rng = np.random.default_rng(2)
    pos = rng.random((40, 2)) * 100.0
    perm = rng.permutation(40)
    base = detect_encounters(pos, 15.0)
    permuted = detect_encounters(pos[perm], 15.0)
    mapped = {tuple(sorted((int(perm[a]), int(perm[b])))) for a, b in permuted}
    assert mapped == base


def _static(positions, C=10.0, **kw):
    """World whose robots never move (V = 0)."""
    cfg = SimConfig(N=len(positions), C=C, L=100.0, V=0.0, duration=100.0,
                    msg_window=1.0, msg_period=3600.0, **kw)
    return init_world(cfg, positions=positions, headings=[0.0] * len(positions))


def test_two_robots_in_range_share_after_one_step():
    w = _static([(10.0, 10.0), (15.0, 10.0)])
    assert w.informed[0].tolist() == [True, False]
    step(w)
    assert w.informed[0].tolist() == [True, True]


def test_nothing_exchanged_out_of_range():
    w = _static([(10.0, 10.0), (50.0, 10.0)])
    for _ in range(5):
        step(w)
    assert w.informed[0].tolist() == [True, False]


def test_chain_moves_one_hop_per_tick():
    # Hand-simulated: A-B and B-C in range, A-C not. Tick 1 informs B only,
    # tick 2 informs C through B.
    w = _static([(10.0, 10.0), (18.0, 10.0), (26.0, 10.0)])
    step(w)
    assert w.informed[0].tolist() == [True, True, False]
    step(w)
    assert w.informed[0].tolist() == [True, True, True]
    assert collect(w).curves[0].samples == [(0.0, 1), (1.0, 2), (2.0, 3)]


def test_head_on_pass_emits_rising_then_falling():
    # Two robots 10 m apart closing at 2 m/tick with C = 3: separations are
    # 8, 6, 4, 2, 0, 2, 4 after ticks 1..7, so rising at t=4 and falling at t=7.
    cfg = SimConfig(N=2, C=3.0, L=100.0, V=1.0, duration=20.0, msg_window=0.0,
                    walk=CRW(1.0, None))
    w = init_world(cfg, positions=[(50.0, 50.0), (40.0, 50.0)], headings=[-math.pi, 0.0])
    for _ in range(10):
        step(w)
    assert list(collect(w).log) == [EncounterEvent(4.0, 0, 1, "rising"),
                                    EncounterEvent(7.0, 0, 1, "falling")]


def test_rising_falling_alternate_per_pair():
    cfg = SimConfig(N=30, C=15.0, L=100.0, duration=4 * 3600.0, msg_window=3600.0, seed=3)
    out = run(cfg)
    assert len(out.log) > 0
    # contacts present at t = 0 have no rising edge
    state = {(int(a), int(b)): "rising" for a, b in init_world(cfg).pairs}
    assert state
    last_t = {}
    for e in out.log:
        key = (e.a, e.b)
        assert e.a < e.b
        expected = "falling" if state.get(key) == "rising" else "rising"
        assert e.kind == expected
        assert e.t > last_t.get(key, -1.0)
        state[key] = e.kind
        last_t[key] = e.t


def test_zero_duration_run():
    out = run(SimConfig(duration=0.0, msg_window=0.0))
    assert len(out.log) == 0
    assert all(c.samples == [(c.t0, 1)] for c in out.curves)


def test_messages_emitted_on_schedule():
    cfg = SimConfig(duration=3 * 3600.0, msg_window=2.5 * 3600.0, msg_period=3600.0)
    out = run(cfg)
    assert [c.t0 for c in out.curves] == [0.0, 3600.0, 7200.0]
    assert all(c.samples[0] == (c.t0, 1) for c in out.curves)


def test_reruns_are_bit_identical():
    cfg = SimConfig(duration=3 * 3600.0, msg_window=3600.0, seed=42)
    a, b = run(cfg), run(cfg)
    assert a.log.to_csv() == b.log.to_csv()
    assert curves_to_csv(a.curves) == curves_to_csv(b.curves)
    c = run(SimConfig(duration=3 * 3600.0, msg_window=3600.0, seed=43))
    assert a.log.to_csv() != c.log.to_csv()


def test_complete_graph_informs_everyone_in_one_tick():
    L = 20.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = SimConfig(N=5, C=L * math.sqrt(2) + 1, L=L, duration=600.0,
                        msg_window=300.0, msg_period=60.0)
        out = run(cfg)
    assert len(out.curves) == 5
    for c in out.curves:
        assert c.samples == [(c.t0, 1), (c.t0 + cfg.dt, 5)]


def test_curves_are_monotone_and_bounded():
    out = run(SimConfig(N=20, C=20.0, L=100.0, duration=6 * 3600.0, msg_window=3 * 3600.0, seed=5))
    for c in out.curves:
        assert c.informed[0] == 1
        assert np.all(np.diff(c.informed) > 0)
        assert c.informed[-1] <= 20
        assert np.all(np.diff(c.times) > 0)


def test_positions_stay_in_arena_and_count_constant():
    cfg = SimConfig(N=15, C=5.0, L=30.0, V=0.5, duration=3600.0, msg_window=0.0, seed=8)
    out = run(cfg, trajectory_every=10)
    assert out.trajectory.shape[1] == 15
    assert out.trajectory[:, :, 1:3].min() >= 0 and out.trajectory[:, :, 1:3].max() <= 30.0
    assert out.trajectory[0, 0, 0] == 0.0 and out.trajectory[-1, 0, 0] == 3600.0


@pytest.mark.parametrize("bad", [
    dict(N=1), dict(dt=0.0), dict(duration=100.0, msg_window=200.0),
    dict(msg_source=20), dict(msg_period=0.0), dict(C=-1.0),
])
def test_invalid_config_rejected_before_stepping(bad):
    with pytest.raises(ConfigError):
        run(SimConfig(**bad))


def test_long_range_warns():
    with pytest.warns(UserWarning):
        SimConfig(C=300.0, L=200.0).validate()


def test_encounter_log_csv_format():
    log = EncounterLog.from_events([EncounterEvent(1.5, 2, 0, "rising"),
                                    EncounterEvent(9.0, 0, 2, "falling")])
    assert log.to_csv() == "t,a,b,kind\r\n1.500,0,2,rising\r\n9.000,0,2,falling\r\n"
    assert list(log) == [EncounterEvent(1.5, 0, 2, "rising"), EncounterEvent(9.0, 0, 2, "falling")]


def test_curve_csv_and_trajectory_csv():
    c = DiffusionCurve(3, 10.0, np.array([10.0, 12.0]), np.array([1, 2]), 20.0)
    assert curves_to_csv([c]) == "msg_id,t,informed\r\n3,10.000,1\r\n3,12.000,2\r\n"
    out = run(SimConfig(N=2, duration=2.0, msg_window=0.0), trajectory_every=1)
    lines = out.trajectory_csv().splitlines()
    assert lines[0] == "t,robot,x,y,heading"
    assert len(lines) == 1 + 3 * 2
    with pytest.raises(ValueError):
        run(SimConfig(N=2, duration=2.0, msg_window=0.0)).trajectory_csv()


def test_count_at_is_right_continuous():
    c = DiffusionCurve(0, 0.0, np.array([0.0, 5.0, 9.0]), np.array([1, 2, 4]), 20.0)
    assert c.count_at([0.0, 4.9, 5.0, 8.0, 9.0, 20.0]).tolist() == [1, 1, 2, 2, 4, 4]
