"""Single trajectories, seeded ensembles, statistics and exports."""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .engine import EnsembleRunner, TrajectoryRecord, simulate
from .errors import EmptySample, OrulesError
from .scenario import Scenario


class TrajectoryFailed(OrulesError):
    """A trajectory raised; carries the seed that reproduces it."""

    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"seed {seed}: {type(cause).__name__}: {cause}")
        self.seed = seed
        self.cause = cause

    def __reduce__(self):
        return TrajectoryFailed, (self.seed, self.cause)


@dataclass(frozen=True)
class EnsembleStats:
    n_runs: int
    outcomes: dict
    hit_times: tuple
    ks: Optional[float]
    base_seed: int = 0
    records: tuple = field(default=(), compare=False, repr=False)

    def fraction(self, label: str) -> float:
        return self.outcomes.get(label, 0) / self.n_runs


def run_trajectory(sc: Scenario, seed: int, *, prune: bool = True,
                   strict: bool = False) -> TrajectoryRecord:
    try:
        return simulate(sc, seed, prune=prune, strict=strict)
    except OrulesError as e:
        raise TrajectoryFailed(seed, e) from e


def _run_block(sc: Scenario, seeds: range, prune: bool, strict: bool) -> list:
    runner = EnsembleRunner(sc, prune=prune, strict=strict)
    out = []
    for seed in seeds:
        try:
            out.append(runner.run(seed))
        except OrulesError as e:
            raise TrajectoryFailed(seed, e) from e
    return out


def default_workers() -> int:
    env = os.environ.get("ORULES_WORKERS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"ORULES_WORKERS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"ORULES_WORKERS must be a positive integer, got {env!r}")
        return n
    return 1


def run_records(sc: Scenario, n: int, base_seed: int = 0, *, workers: Optional[int] = None,
                prune: bool = True, strict: bool = False) -> list:
    """Records for seeds ``base_seed .. base_seed + n - 1`` in seed order."""
    if n < 1:
        raise ValueError("an ensemble needs at least one run")
    workers = default_workers() if workers is None else workers
    workers = max(1, min(workers, n))
    if workers == 1:
        return _run_block(sc, range(base_seed, base_seed + n), prune, strict)
    size = math.ceil(n / workers)
    blocks = [range(s, min(s + size, base_seed + n)) for s in range(base_seed, base_seed + n, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_block, [sc] * len(blocks), blocks,
                         [prune] * len(blocks), [strict] * len(blocks))
        return [r for part in parts for r in part]


def summarize(sc: Scenario, records, base_seed: int = 0) -> EnsembleStats:
    records = tuple(records)
    outcomes = dict(sorted(Counter(r.terminal_label for r in records).items()))
    hit_times = tuple(r.hit_time for r in records if r.hits)
    ks = compare_hit_cdf(hit_times, sc.params.half_life) if hit_times else None
    return EnsembleStats(len(records), outcomes, hit_times, ks, base_seed, records)


def run_ensemble(sc: Scenario, n: int, base_seed: int = 0, *, workers: Optional[int] = None,
                 prune: bool = True, strict: bool = False) -> EnsembleStats:
    recs = run_records(sc, n, base_seed, workers=workers, prune=prune, strict=strict)
    return summarize(sc, recs, base_seed)


def hit_cdf(t, half_life: float):
    """Reference law of the first hit given one lands before the cutoff."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, half_life)
    return -np.expm1(-math.log(2.0) * t / half_life) / 0.5


def compare_hit_cdf(samples, half_life: float) -> float:
    """Two-sided Kolmogorov-Smirnov statistic of ``samples`` against ``hit_cdf``."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise EmptySample("no hit times to compare")
    return float(stats.kstest(samples, lambda t: hit_cdf(t, half_life)).statistic)


def format_trace(rec: TrajectoryRecord) -> str:
    """One ``time,event_kind,component_label,weight`` line per log entry."""
    return "".join(f"{e.time!r},{e.kind},{e.label},{e.weight!r}\n" for e in rec.log)


def format_traces(records) -> str:
    return "".join(f"# seed={r.seed}\n" + format_trace(r) for r in records)


def format_stats(st: EnsembleStats) -> str:
    doc = {"n_runs": st.n_runs, "outcomes": st.outcomes, "ks": st.ks}
    return json.dumps(doc, indent=2) + "\n"


def write_text(path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
