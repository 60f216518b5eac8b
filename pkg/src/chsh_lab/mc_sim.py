"""Monte Carlo runs of the gated experiment.

Each trial the distribution device opens one A channel and one B channel
(setting pair ij drawn with probability q_ij), an outcome pair is drawn from
p_ij, and the two closed channels read 0.

Randomness: the trials are cut into batches of ``batch_size``; batch ``k``
draws from its own Philox stream keyed by ``SeedSequence(seed,
spawn_key=(k,))``. A batch's output depends only on (seed, k, batch_size), so
running batches on any number of threads gives the same log as running them
serially.
"""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EmptyCell, InvalidParams
from .prob_core import ChshReport, make_report
from .settings import PAIRS, PAIR_KEYS, SIGNS, REFERENCE_ANGLES, CondTableFamily, table_correlation

DEFAULT_BATCH = 1 << 18
ETA_CODES = np.array([11, 12, 21, 22], dtype=np.int8)
THREADS_ENV = "CHSH_LAB_THREADS"

# stream used to shuffle the balanced schedule, disjoint from batch streams
_SCHEDULE_KEY = 2**32 - 1


@dataclass(frozen=True)
class McConfig:
    family: CondTableFamily
    trials: int
    seed: int = 0
    batch_size: int = DEFAULT_BATCH
    balanced: bool = False
    name: str | None = None

    def __post_init__(self) -> None:
        if isinstance(self.trials, bool) or not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise InvalidParams(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise InvalidParams(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not isinstance(self.batch_size, (int, np.integer)) or self.batch_size < 1:
            raise InvalidParams(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if self.balanced:
            if self.trials % 4:
                raise InvalidParams("balanced mode needs trials divisible by 4 (M = 4N)")
            if len({self.family.q(*p) for p in PAIRS}) != 1:
                raise InvalidParams("balanced mode requires uniform gate probabilities")

    @property
    def n_per_pair(self) -> int | None:
        """N in M = 4N when M is divisible by 4."""
        return self.trials // 4 if self.trials % 4 == 0 else None


@dataclass(frozen=True)
class TrialLog:
    """Per-trial records.

    ``gate`` holds the opened pair as an index into (11, 12, 21, 22);
    ``a`` and ``b`` hold the two nonzero readings (+-1). The per-channel
    columns A1, A2, B1, B2 (with 0 for a closed channel) are derived.
    """

    gate: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __len__(self) -> int:
        return len(self.gate)

    @property
    def eta(self) -> np.ndarray:
        return ETA_CODES[self.gate]

    def channel(self, side: str, index: int) -> np.ndarray:
        if side == "A":
            open_ = (self.gate // 2) == index - 1
            return np.where(open_, self.a, 0).astype(np.int8)
        open_ = (self.gate % 2) == index - 1
        return np.where(open_, self.b, 0).astype(np.int8)

    @property
    def a1(self) -> np.ndarray:
        return self.channel("A", 1)

    @property
    def a2(self) -> np.ndarray:
        return self.channel("A", 2)

    @property
    def b1(self) -> np.ndarray:
        return self.channel("B", 1)

    @property
    def b2(self) -> np.ndarray:
        return self.channel("B", 2)

    def counts(self) -> dict:
        n = np.bincount(self.gate, minlength=4)
        return {p: int(n[k]) for k, p in enumerate(PAIRS)}

    def write_csv(self, fh: io.TextIOBase, chunk: int = 1 << 16) -> None:
        """Header ``k,eta,a1,a2,b1,b2``; one row per trial, k from 1."""
        fh.write("k,eta,a1,a2,b1,b2\n")
        # the 16 possible (gate, a, b) row bodies
        bodies = []
        for g, (i, j) in enumerate(PAIRS):
            for a in (-1, 1):
                for b in (-1, 1):
                    cols = [0, 0, 0, 0]
                    cols[i - 1] = a
                    cols[1 + j] = b
                    bodies.append(f"{ETA_CODES[g]}," + ",".join(str(c) for c in cols))
        code = self.gate.astype(np.int64) * 4 + (self.a > 0) * 2 + (self.b > 0)
        for start in range(0, len(self), chunk):
            part = code[start:start + chunk]
            fh.write(
                "".join(f"{k},{bodies[c]}\n" for k, c in zip(range(start + 1, start + 1 + len(part)), part.tolist()))
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidParams(f"{THREADS_ENV}={raw!r} is not an integer") from exc
    if n < 1:
        raise InvalidParams(f"{THREADS_ENV} must be >= 1")
    return n


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(key,))))


def _cumulative(probs: list) -> np.ndarray:
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    return cum / cum[-1]


def _draw(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # side="right" never selects a zero-probability category
    return np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)


def _run_batch(config: McConfig, k: int, schedule: np.ndarray | None) -> tuple:
    start = k * config.batch_size
    size = min(config.batch_size, config.trials - start)
    rng = _stream(config.seed, k)
    u_gate = rng.random(size)
    u_out = rng.random(size)
    family = config.family
    if schedule is None:
        gate = _draw(_cumulative([family.q(*p) for p in PAIRS]), u_gate).astype(np.int8)
    else:
        gate = schedule[start:start + size]
    out = np.empty(size, dtype=np.int8)
    for g, pair in enumerate(PAIRS):
        mask = gate == g
        if mask.any():
            out[mask] = _draw(_cumulative(list(family.tables[pair].cells)), u_out[mask])
    signs = np.array(SIGNS, dtype=np.int8)
    return gate, signs[out, 0], signs[out, 1]


def run_experiment(config: McConfig, threads: int | None = None) -> TrialLog:
    """Simulate ``config.trials`` independent trials; deterministic in the seed."""
    n_batches = math.ceil(config.trials / config.batch_size)
    schedule = None
    if config.balanced:
        n = config.trials // 4
        schedule = _stream(config.seed, _SCHEDULE_KEY).permutation(np.repeat(np.arange(4, dtype=np.int8), n))
    threads = _thread_cap() if threads is None else threads
    if threads <= 1 or n_batches == 1:
        parts = [_run_batch(config, k, schedule) for k in range(n_batches)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda k: _run_batch(config, k, schedule), range(n_batches)))
    gate, a, b = (np.concatenate(cols) for cols in zip(*parts))
    return TrialLog(gate, a, b)


@dataclass(frozen=True)
class McEstimate:
    """Estimators of the full and per-gate conditional correlations.

    ``sums[ij]`` is the integer sum of A_i B_j over all trials (products
    vanish off gate ij), so full = sum / M and conditional = sum / N_ij.
    """

    trials: int
    counts: dict
    sums: dict

    def full(self, i: int, j: int) -> float:
        return self.sums[(i, j)] / self.trials

    def conditional(self, i: int, j: int) -> float:
        n = self.counts[(i, j)]
        if n == 0:
            raise EmptyCell(f"no trial opened gate {i}{j}")
        return self.sums[(i, j)] / n

    def full_stderr(self, i: int, j: int) -> float:
        # products are in {-1, 0, 1}; E[X^2] = N_ij / M
        m = self.trials
        mean = self.full(i, j)
        second = self.counts[(i, j)] / m
        return math.sqrt(max(second - mean**2, 0.0) / m)

    def conditional_stderr(self, i: int, j: int) -> float:
        c = self.conditional(i, j)
        return math.sqrt(max(1.0 - c * c, 0.0) / self.counts[(i, j)])

    def gate_frequency(self, i: int, j: int) -> float:
        return self.counts[(i, j)] / self.trials

    def to_dict(self) -> dict:
        pairs = {}
        for p in PAIRS:
            entry = {
                "count": self.counts[p],
                "full": self.full(*p),
                "full_stderr": self.full_stderr(*p),
                "conditional": None,
                "conditional_stderr": None,
            }
            if self.counts[p]:
                entry["conditional"] = self.conditional(*p)
                entry["conditional_stderr"] = self.conditional_stderr(*p)
            pairs[PAIR_KEYS[p]] = entry
        out = {"trials": self.trials, "pairs": pairs}
        if self.trials % 4 == 0:
            out["n_per_pair"] = self.trials // 4
        return out


def estimate(source: Union[McConfig, TrialLog]) -> McEstimate:
    log = run_experiment(source) if isinstance(source, McConfig) else source
    if len(log) == 0:
        raise EmptyCell("empty trial log")
    product = log.a.astype(np.int64) * log.b
    counts = np.bincount(log.gate, minlength=4)
    sums = np.bincount(log.gate, weights=product, minlength=4)
    return McEstimate(
        trials=len(log),
        counts={p: int(counts[k]) for k, p in enumerate(PAIRS)},
        sums={p: int(round(sums[k])) for k, p in enumerate(PAIRS)},
    )


@dataclass(frozen=True)
class EmpiricalChsh:
    full: ChshReport
    conditional: ChshReport

    def to_dict(self) -> dict:
        return {"full": self.full.to_dict(), "conditional": self.conditional.to_dict()}


def chsh_from_estimates(est: McEstimate) -> EmpiricalChsh:
    """Empirical CHSH for the full estimates (bound 2) and conditional ones (bounds 4, 8).

    Standard errors add in quadrature; the four conditional estimates come
    from disjoint trial sets.
    """
    cond = [est.conditional(*p) for p in PAIRS]
    cond_se = math.sqrt(sum(est.conditional_stderr(*p) ** 2 for p in PAIRS))
    full = [est.full(*p) for p in PAIRS]
    full_se = math.sqrt(sum(est.full_stderr(*p) ** 2 for p in PAIRS))
    return EmpiricalChsh(
        full=make_report(full, bounds=(2,), stderr=full_se),
        conditional=make_report(cond, bounds=(4, 8), stderr=cond_se),
    )


def analytic_conditionals(family: CondTableFamily) -> dict:
    return {p: float(table_correlation(family.tables[p])) for p in PAIRS}


def sensor_device_preset(
    family: CondTableFamily | None = None, trials: int = 10_000, seed: int = 0
) -> McConfig:
    """Four sensors A1, A2, B1, B2 on two power supplies.

    Each supply can drive one sensor at a time, so every poll reads exactly one
    A and one B sensor and the idle two report the default 0. The device
    switches uniformly among the four sensor pairs. Readings default to the
    analyzer tables at angles pi/4, 0, pi/8, 3pi/8; pass ``family`` for
    other sensor statistics (its gate probabilities are replaced by 1/4).
    """
    tables = (family or REFERENCE_ANGLES.family()).tables
    return McConfig(CondTableFamily(tables), trials=trials, seed=seed, name="sensor-device")
