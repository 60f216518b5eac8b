import io
import math
from fractions import Fraction

import numpy as np
import pytest

from chsh_lab import mc_sim
from chsh_lab.errors import EmptyCell, InvalidParams
from chsh_lab.mc_sim import McConfig, TrialLog, chsh_from_estimates, estimate, run_experiment
from chsh_lab.settings import PAIRS, REFERENCE_ANGLES, CondTable, CondTableFamily

SQRT2 = math.sqrt(2)


def det_family(a=1, b=1):
    return CondTableFamily({p: CondTable.deterministic(a, b) for p in PAIRS})


def chsh_pattern_family():
    plus = CondTable(Fraction(1, 2), 0, 0, Fraction(1, 2))
    minus = CondTable(0, Fraction(1, 2), Fraction(1, 2), 0)
    return CondTableFamily({(1, 1): plus, (1, 2): plus, (2, 1): plus, (2, 2): minus})


def test_deterministic_tables_always_plus_plus():
    log = run_experiment(McConfig(det_family(), 5000, seed=1))
    assert (log.a == 1).all() and (log.b == 1).all()


def test_zero_probability_outcomes_never_drawn():
    fam = CondTableFamily({p: CondTable(0, 1, 0, 0) for p in PAIRS})
    log = run_experiment(McConfig(fam, 20000, seed=2))
    assert (log.a == 1).all() and (log.b == -1).all()
    fam = CondTableFamily({p: CondTable(0, 0, 0, 1) for p in PAIRS}, {"11": 0, "12": 0, "21": 0, "22": 1})
    log = run_experiment(McConfig(fam, 20000, seed=2))
    assert (log.gate == 3).all() and (log.a == -1).all()


def test_gate_frequencies_within_three_sigma():
    m = 10**6
    est = estimate(McConfig(CondTableFamily.uniform(), m, seed=7))
    band = 3 * math.sqrt(3 / 16) / math.sqrt(m)
    for p in PAIRS:
        assert abs(est.gate_frequency(*p) - 0.25) <= band


def test_nonuniform_gates_followed():
    gates = {"11": 0.1, "12": 0.2, "21": 0.3, "22": 0.4}
    m = 400_000
    est = estimate(McConfig(CondTableFamily.uniform(gates), m, seed=3))
    for p, q in zip(PAIRS, (0.1, 0.2, 0.3, 0.4)):
        assert abs(est.gate_frequency(*p) - q) <= 4 * math.sqrt(q * (1 - q) / m)


def test_same_seed_same_log():
    cfg = McConfig(REFERENCE_ANGLES.family(), 50_000, seed=99, batch_size=4096)
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert np.array_equal(a.gate, b.gate) and np.array_equal(a.a, b.a) and np.array_equal(a.b, b.b)


def test_thread_count_does_not_change_log():
    cfg = McConfig(REFERENCE_ANGLES.family(), 100_000, seed=5, batch_size=3000)
    serial = run_experiment(cfg, threads=1).to_csv()
    assert run_experiment(cfg, threads=2).to_csv() == serial
    assert run_experiment(cfg, threads=7).to_csv() == serial


def test_env_thread_cap(monkeypatch):
    cfg = McConfig(REFERENCE_ANGLES.family(), 20_000, seed=5, batch_size=1000)
    monkeypatch.setenv(mc_sim.THREADS_ENV, "3")
    three = run_experiment(cfg).to_csv()
    monkeypatch.setenv(mc_sim.THREADS_ENV, "1")
    assert run_experiment(cfg).to_csv() == three
    monkeypatch.setenv(mc_sim.THREADS_ENV, "zero")
    with pytest.raises(InvalidParams):
        run_experiment(cfg)


def test_different_seed_different_log():
    fam = REFERENCE_ANGLES.family()
    a = run_experiment(McConfig(fam, 1000, seed=1))
    b = run_experiment(McConfig(fam, 1000, seed=2))
    assert not np.array_equal(a.gate, b.gate)


def test_structural_one_channel_per_side():
    log = run_experiment(McConfig(REFERENCE_ANGLES.family(), 20_000, seed=4))
    a_open = (log.a1 != 0).astype(int) + (log.a2 != 0)
    b_open = (log.b1 != 0).astype(int) + (log.b2 != 0)
    assert (a_open == 1).all() and (b_open == 1).all()
    eta = log.eta
    assert ((log.a1 != 0) == np.isin(eta, (11, 12))).all()
    assert ((log.b2 != 0) == np.isin(eta, (12, 22))).all()


def test_config_validation():
    fam = CondTableFamily.uniform()
    with pytest.raises(InvalidParams):
        McConfig(fam, 0)
    with pytest.raises(InvalidParams):
        McConfig(fam, 10, seed=-1)
    with pytest.raises(InvalidParams):
        McConfig(fam, 10, balanced=True)
    with pytest.raises(InvalidParams):
        McConfig(CondTableFamily.uniform({"11": 0.4, "12": 0.2, "21": 0.2, "22": 0.2}), 8, balanced=True)
    assert McConfig(fam, 40).n_per_pair == 10
    assert McConfig(fam, 41).n_per_pair is None


def test_balanced_mode_opens_each_pair_n_times():
    cfg = McConfig(REFERENCE_ANGLES.family(), 4 * 2500, seed=8, balanced=True, batch_size=999)
    log = run_experiment(cfg)
    assert log.counts() == {p: 2500 for p in PAIRS}
    assert run_experiment(cfg, threads=3).to_csv() == run_experiment(cfg, threads=1).to_csv()


def test_single_trial_estimate():
    log = TrialLog(np.array([0], dtype=np.int8), np.array([1], dtype=np.int8), np.array([1], dtype=np.int8))
    est = estimate(log)
    assert est.conditional(1, 1) == 1
    for p in PAIRS[1:]:
        with pytest.raises(EmptyCell):
            est.conditional(*p)
    with pytest.raises(EmptyCell):
        chsh_from_estimates(est)
    assert est.to_dict()["pairs"]["12"]["conditional"] is None


def test_conditional_estimates_at_reference_angles():
    fam = REFERENCE_ANGLES.family()
    est = estimate(McConfig(fam, 4 * 10**6, seed=2024))
    analytic = mc_sim.analytic_conditionals(fam)
    for p in PAIRS:
        c = analytic[p]
        n = est.counts[p]
        assert abs(est.conditional(*p) - c) <= 3 * math.sqrt((1 - c * c) / n)


def test_full_is_quarter_of_conditional_with_uniform_gates():
    est = estimate(McConfig(REFERENCE_ANGLES.family(), 10**6, seed=31))
    for p in PAIRS:
        diff = est.full(*p) - est.conditional(*p) / 4
        se = math.hypot(est.full_stderr(*p), est.conditional_stderr(*p) / 4)
        assert abs(diff) <= 3 * se


def test_full_equals_share_times_conditional_exactly():
    est = estimate(McConfig(REFERENCE_ANGLES.family(), 12345, seed=6))
    assert sum(est.counts.values()) == 12345
    for p in PAIRS:
        n, s, m = est.counts[p], est.sums[p], est.trials
        assert Fraction(s, m) == Fraction(n, m) * Fraction(s, n)
        assert est.full(*p) == pytest.approx(n / m * est.conditional(*p), rel=1e-15)
        assert abs(est.full(*p)) <= 1 and abs(est.conditional(*p)) <= 1


def test_empirical_chsh_reference_angles():
    res = chsh_from_estimates(estimate(McConfig(REFERENCE_ANGLES.family(), 4 * 10**6, seed=77)))
    assert abs(res.conditional.value - 2 * SQRT2) <= 3 * res.conditional.stderr
    assert abs(res.full.value - SQRT2 / 2) <= 3 * res.full.stderr
    assert res.full.holds(2)
    assert res.conditional.holds(4) and res.conditional.holds(8)


def test_empirical_chsh_uniform_near_zero():
    res = chsh_from_estimates(estimate(McConfig(CondTableFamily.uniform(), 400_000, seed=12)))
    assert abs(res.conditional.value) <= 4 * res.conditional.stderr
    assert abs(res.full.value) <= 4 * res.full.stderr


def test_deterministic_pattern_gives_exactly_four():
    for seed in range(5):
        res = chsh_from_estimates(estimate(McConfig(chsh_pattern_family(), 2000, seed=seed)))
        assert res.conditional.value == 4


def test_unbiased_over_many_seeds():
    fam = REFERENCE_ANGLES.family()
    analytic = mc_sim.analytic_conditionals(fam)
    sums = {p: 0 for p in PAIRS}
    counts = {p: 0 for p in PAIRS}
    means = {p: [] for p in PAIRS}
    for seed in range(100):
        est = estimate(McConfig(fam, 10**5, seed=1000 + seed))
        for p in PAIRS:
            sums[p] += est.sums[p]
            counts[p] += est.counts[p]
            means[p].append(est.conditional(*p))
    for p in PAIRS:
        c = analytic[p]
        pooled_se = math.sqrt((1 - c * c) / counts[p])
        assert abs(np.mean(means[p]) - c) < 4 * pooled_se


def test_sensor_device_preset():
    cfg = mc_sim.sensor_device_preset()
    assert cfg.name == "sensor-device"
    assert all(cfg.family.q(*p) == Fraction(1, 4) for p in PAIRS)
    skewed = CondTableFamily(det_family(-1, 1).tables, {"11": 1, "12": 0, "21": 0, "22": 0})
    cfg = mc_sim.sensor_device_preset(skewed, trials=4000, seed=3)
    assert all(cfg.family.q(*p) == Fraction(1, 4) for p in PAIRS)
    log = run_experiment(cfg)
    readings = np.stack([log.a1, log.a2, log.b1, log.b2])
    assert ((readings[:2] != 0).sum(axis=0) == 1).all()
    assert ((readings[2:] != 0).sum(axis=0) == 1).all()
    assert set(np.unique(readings[:2][readings[:2] != 0])) == {-1}


def test_csv_format():
    log = TrialLog(
        np.array([0, 3, 1, 2], dtype=np.int8),
        np.array([1, -1, -1, 1], dtype=np.int8),
        np.array([-1, 1, 1, -1], dtype=np.int8),
    )
    assert log.to_csv().splitlines() == [
        "k,eta,a1,a2,b1,b2",
        "1,11,1,0,-1,0",
        "2,22,0,-1,0,1",
        "3,12,-1,0,0,1",
        "4,21,0,1,-1,0",
    ]


def test_csv_matches_channel_columns():
    log = run_experiment(McConfig(REFERENCE_ANGLES.family(), 3000, seed=1))
    buf = io.StringIO()
    log.write_csv(buf, chunk=256)
    rows = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",", skiprows=1, dtype=int)
    assert (rows[:, 0] == np.arange(1, 3001)).all()
    assert (rows[:, 1] == log.eta).all()
    assert (rows[:, 2] == log.a1).all() and (rows[:, 5] == log.b2).all()


def test_estimate_json_shape():
    d = estimate(McConfig(CondTableFamily.uniform(), 400, seed=1)).to_dict()
    assert d["trials"] == 400 and d["n_per_pair"] == 100
    assert set(d["pairs"]) == {"11", "12", "21", "22"}
    assert sum(v["count"] for v in d["pairs"].values()) == 400
