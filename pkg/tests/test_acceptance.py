"""Acceptance gate. Each criterion reports one PASS/FAIL line, also repeated in the session summary."""

import math
import random
import statistics
import time
from fractions import Fraction

from chsh_lab import cli
from chsh_lab import two_valued as tv
from chsh_lab.mc_sim import McConfig, analytic_conditionals, estimate
from chsh_lab.prob_core import chsh_value, make_space
from chsh_lab.realizability import fine_inequality_check, joint_feasible
from chsh_lab.settings import PAIRS, REFERENCE_ANGLES, CondTableFamily, Convention
from chsh_lab.unifying import build_unifying_space, conditional_chsh, verify_pi_identity

SQRT2 = math.sqrt(2)
TARGET = (1 / SQRT2, 1 / SQRT2, 1 / SQRT2, -1 / SQRT2)


def test_criterion_1_identity_and_runtime(verdict):
    assert REFERENCE_ANGLES.convention is Convention.FULL_ANGLE

    def pipeline():
        return verify_pi_identity(build_unifying_space(REFERENCE_ANGLES.family()))

    rep = pipeline()
    values = [c.conditional for c in rep.checks]
    value_err = max(abs(v - t) for v, t in zip(values, TARGET))
    timings = []
    for _ in range(200):
        t0 = time.perf_counter()
        pipeline()
        timings.append(time.perf_counter() - t0)
    runtime = statistics.median(timings)
    ok = rep.ok and rep.max_residual < 1e-12 and value_err < 1e-12 and runtime < 1e-3
    verdict(1, "conditional expectation equals table correlation", ok,
            f"residual={float(rep.max_residual):.1e}, value error={value_err:.1e}, median runtime={runtime * 1e3:.3f} ms")


def test_criterion_2_tsirelson(verdict):
    us = build_unifying_space(REFERENCE_ANGLES.family())
    cond = conditional_chsh(us).value
    uncond = us.chsh().value
    ok = abs(cond - 2 * SQRT2) < 1e-12 and abs(uncond - SQRT2 / 2) < 1e-12 and abs(uncond) <= 2
    verdict(2, "conditional CHSH 2*sqrt2, unconditional sqrt2/2", ok, f"conditional={cond!r}, unconditional={uncond!r}")


def test_criterion_3_parameter_check(verdict):
    tsirelson = tv.conditional_correlations(tv.build_two_valued_space(tv.TSIRELSON_PARAMS))
    err = max(abs(v - t) for v, t in zip(tsirelson, TARGET))
    ext = tv.build_two_valued_space(tv.TwoValuedParams(Fraction(1, 8), Fraction(0)))
    cond = tv.conditional_chsh(ext).value
    uncond = ext.chsh().value
    exact = isinstance(cond, Fraction) and isinstance(uncond, Fraction)
    ok = err < 1e-12 and exact and cond == 4 and uncond == 2
    verdict(3, "two-valued parameters", ok,
            f"Tsirelson error={err:.1e}, extreme conditional={cond}, unconditional={uncond}, exact={exact}")


def test_criterion_4_non_signalling(verdict):
    rng = random.Random(4)
    params = [tv.TwoValuedParams(Fraction(0), Fraction(1, 8)), tv.TwoValuedParams(Fraction(1, 8), Fraction(0))]
    while len(params) < 100:
        x = Fraction(rng.randint(0, 10**6), 8 * 10**6)
        params.append(tv.TwoValuedParams(x, Fraction(1, 8) - x))
    bad = 0
    for p in params:
        rep = tv.verify_non_signalling(tv.build_two_valued_space(p))
        if not (rep.ok and all(v == Fraction(1, 2) for v in rep.probabilities.values())):
            bad += 1
    verdict(4, "non-signalling, every conditional marginal exactly 1/2", bad == 0, f"{len(params)} parameter pairs, {bad} failures")


def test_criterion_5_chsh_fuzz(verdict):
    rng = random.Random(5)
    worst = 0.0
    for _ in range(1000):
        n = rng.randint(1, 40)
        raw = [rng.random() for _ in range(n)]
        tot = math.fsum(raw)
        space = make_space(range(n), [w / tot for w in raw])
        rvs = []
        for _ in range(4):
            vals = [rng.choice((-1.0, 1.0, rng.uniform(-1, 1))) for _ in range(n)]
            rvs.append(space.rv(vals.__getitem__))
        worst = max(worst, float(chsh_value(space, *rvs).abs_value))
    verdict(5, "CHSH theorem fuzz", worst <= 2 + 1e-12, f"1000 spaces, max |S|={worst!r}")


def test_criterion_6_monte_carlo(verdict):
    family = REFERENCE_ANGLES.family()
    analytic = analytic_conditionals(family)
    m = 4 * 10**6
    pair_hits = gate_hits = 0
    t0 = time.perf_counter()
    for seed in range(10):
        est = estimate(McConfig(family, m, seed=seed))
        for p in PAIRS:
            c, n = analytic[p], est.counts[p]
            pair_hits += abs(est.conditional(*p) - c) <= 3 * math.sqrt((1 - c * c) / n)
            q = float(family.q(*p))
            gate_hits += abs(est.gate_frequency(*p) - q) <= 3 * math.sqrt(q * (1 - q) / m)
    elapsed = time.perf_counter() - t0
    ok = pair_hits >= 27 and gate_hits == 40 and elapsed < 30
    verdict(6, "Monte Carlo convergence", ok,
            f"pair checks {pair_hits}/40, gate checks {gate_hits}/40, runtime={elapsed:.1f} s")


def test_criterion_7_realizability(verdict):
    reference = joint_feasible(REFERENCE_ANGLES.family())
    uniform = CondTableFamily.uniform()
    uni = joint_feasible(uniform)
    witness_ok = uni.feasible and uni.witness.max_table_error(uniform) == 0
    rng = random.Random(7)
    disagreements = 0
    for _ in range(1000):
        cs = [Fraction(rng.randint(-100, 100), 100) for _ in range(4)]
        fam = CondTableFamily.from_correlations(cs)
        disagreements += joint_feasible(fam).feasible != fine_inequality_check(fam).passes
    ok = not reference.feasible and witness_ok and disagreements == 0
    verdict(7, "joint realizability", ok,
            f"reference family feasible={reference.feasible}, uniform witness verified={witness_ok}, "
            f"LP vs CHSH-pattern disagreements={disagreements}/1000")


def test_criterion_8_determinism(verdict, tmp_path, capsys):
    flags = ["simulate", "--t1", repr(math.pi / 4), "--t2", "0", "--u1", repr(math.pi / 8), "--u2", repr(3 * math.pi / 8),
             "--trials", "200000", "--seed", "8", "--batch-size", "10000"]
    caps = ("1", "1", "2", "8")
    blobs = []
    for k, threads in enumerate(caps):
        path = tmp_path / f"run{k}.csv"
        assert cli.main([*flags, "--threads", threads, "--csv", str(path)]) == 0
        blobs.append(path.read_bytes())
    capsys.readouterr()
    ok = all(b == blobs[0] for b in blobs)
    with capsys.disabled():
        verdict(8, "byte-identical CSV logs from simulate", ok, f"{len(blobs)} runs at thread caps {', '.join(caps)}")
