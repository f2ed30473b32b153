"""
Monte-Carlo experiments: seeded trials of placement, demands and delivery,
aggregated into rate estimates, and parameter sweeps against analytic rates
"""
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.config import settings
from core.errors import CacheSimError, ConfigurationError, DeliveryInvariantError, TrialError
from core.graphs import build_digraph, build_graph, generate_Ga
from core.network import CacheNetworkConfig, RngSpec, distinct_count, draw_demands, place
from services import analytics
from services.delivery import (
    DeliveryResult,
    clique_cover_deliver,
    large_clique_coverage,
    matching_deliver,
    verify_decodability,
)

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    CFCM = "cfcm"
    CFCC = "cfcc"
    CSCC = "cscc"
    UNCODED = "uncoded"
    CFCM_GA = "cfcm-ga"
    CFCC_GA = "cfcc-ga"


class GraphSource(str, Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"


class RateScheme(str, Enum):
    """Schemes a rate can be reported for"""

    CFCM = "cfcm"
    CFCC = "cfcc"
    CSCC = "cscc"
    UNCODED = "uncoded"
    CSC_OPT = "csc-opt"
    UNCODED_APPROX = "uncoded-approx"
    CENTRALIZED = "centralized"


class RateSource(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte-carlo"


_ASYMPTOTIC_SCHEMES = {Scheme.CFCM_GA, Scheme.CFCC_GA}
_FILE_ONLY_SCHEMES = {Scheme.CFCM, Scheme.CFCC, Scheme.CFCM_GA, Scheme.CFCC_GA}

# Monte-Carlo scheme -> scheme its rate is reported under
REPORTED_AS = {
    Scheme.CFCM: RateScheme.CFCM,
    Scheme.CFCM_GA: RateScheme.CFCM,
    Scheme.CFCC: RateScheme.CFCC,
    Scheme.CFCC_GA: RateScheme.CFCC,
    Scheme.CSCC: RateScheme.CSCC,
    Scheme.UNCODED: RateScheme.UNCODED,
}


class ExperimentSpec(BaseModel):
    """One Monte-Carlo configuration"""

    model_config = ConfigDict(frozen=True)

    cfg: CacheNetworkConfig
    scheme: Scheme
    trials: int = Field(..., ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    graph_source: GraphSource = GraphSource.EXACT

    @model_validator(mode="before")
    @classmethod
    def _source_from_scheme(cls, data):
        scheme = data.get("scheme") if isinstance(data, dict) else None
        if getattr(scheme, "value", scheme) in {s.value for s in _ASYMPTOTIC_SCHEMES}:
            data = {**data, "graph_source": GraphSource.ASYMPTOTIC}
        return data

    @model_validator(mode="after")
    def _check_combination(self) -> "ExperimentSpec":
        if self.graph_source == GraphSource.ASYMPTOTIC and self.cfg.delta != 1:
            raise ValueError("the asymptotic graph source requires delta = 1")
        if self.scheme in _FILE_ONLY_SCHEMES and self.cfg.delta != 1:
            raise ValueError(f"scheme {self.scheme.value} is file caching; use cscc for delta > 1")
        return self

    def with_config(self, cfg: CacheNetworkConfig) -> "ExperimentSpec":
        return self.model_copy(update={"cfg": cfg})


class Estimate(BaseModel):
    """Sample mean rate with its standard error"""

    model_config = ConfigDict(frozen=True)

    mean: float = Field(..., ge=0)
    stderr: float = Field(..., ge=0)
    trials: int = Field(..., ge=1)
    histogram_mean: Tuple[float, ...] = ()
    large_clique_coverage_mean: float = 0.0


class RatePoint(BaseModel):
    """An expected delivery rate at one configuration"""

    model_config = ConfigDict(frozen=True)

    scheme: RateScheme
    source: RateSource
    K: int
    N: int
    M: int
    delta: int = 1
    rate: float = Field(..., ge=0)
    stderr: Optional[float] = None
    trials: Optional[int] = None
    large_clique_coverage: Optional[float] = None

    @model_validator(mode="after")
    def _bounded(self) -> "RatePoint":
        if self.rate > self.K * (1 + 1e-9):
            raise ValueError(f"rate {self.rate} exceeds K={self.K}")
        return self


class TrialRecord(NamedTuple):
    trial: int
    rate: float
    n_messages: int
    max_clique: int
    histogram: Tuple[int, ...]
    coverage: float


class SweepPoint(NamedTuple):
    value: int
    simulated: Optional[RatePoint]
    analytic: Optional[RatePoint]
    error: Optional[str] = None


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------

def _deliver(spec: ExperimentSpec) -> Callable:
    return matching_deliver if spec.scheme in (Scheme.CFCM, Scheme.CFCM_GA) else clique_cover_deliver


def _record(trial: int, result: DeliveryResult) -> TrialRecord:
    return TrialRecord(
        trial=trial,
        rate=float(result.rate_files),
        n_messages=result.message_count,
        max_clique=result.max_clique,
        histogram=result.clique_histogram,
        coverage=float(large_clique_coverage(result)),
    )


def run_trial(spec: ExperimentSpec, trial: int) -> TrialRecord:
    """One seeded realization of the experiment"""
    cfg = spec.cfg
    rng = RngSpec(spec.master_seed, trial)

    if spec.scheme == Scheme.UNCODED:
        distinct = distinct_count(draw_demands(cfg, rng))
        return TrialRecord(trial, distinct * (1.0 - cfg.q_float), distinct, 1 if distinct else 0, (), 0.0)

    if spec.graph_source == GraphSource.ASYMPTOTIC:
        return _record(trial, _deliver(spec)(generate_Ga(cfg, rng), rng))

    placement = place(cfg, rng)
    demands = draw_demands(cfg, rng)
    graph = build_graph(build_digraph(placement, demands, cfg))
    result = _deliver(spec)(graph, rng)
    if settings.verify_trials and not verify_decodability(result, placement, demands, cfg):
        raise DeliveryInvariantError(f"{result.algorithm} produced a non-decodable cover")
    return _record(trial, result)


def _run_chunk(spec: ExperimentSpec, start: int, stop: int) -> List[TrialRecord]:
    records = []
    for trial in range(start, stop):
        try:
            records.append(run_trial(spec, trial))
        except TrialError:
            raise
        except Exception as e:
            raise TrialError(trial, f"{type(e).__name__}: {e}") from e
    return records


def _chunks(trials: int, size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + size, trials)) for start in range(0, trials, size)]


def _collect(spec: ExperimentSpec, workers: int) -> List[TrialRecord]:
    chunks = _chunks(spec.trials, settings.chunk_size)
    if workers <= 1 or len(chunks) == 1:
        return [record for start, stop in chunks for record in _run_chunk(spec, start, stop)]

    logger.info(f"Running {spec.trials} trials in {len(chunks)} chunks on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_chunk, spec, start, stop) for start, stop in chunks]
        # reduce in trial order whatever the completion order
        return [record for future in futures for record in future.result()]


def _aggregate(records: Sequence[TrialRecord], vertex_count: int) -> Estimate:
    rates = np.fromiter((r.rate for r in records), dtype=float, count=len(records))
    trials = len(records)
    stderr = float(np.std(rates, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0

    histogram = np.zeros(vertex_count + 1)
    for r in records:
        if r.histogram:
            histogram += np.asarray(r.histogram, dtype=float)
    coverage = np.fromiter((r.coverage for r in records), dtype=float, count=trials)

    return Estimate(
        mean=float(np.mean(rates)),
        stderr=stderr,
        trials=trials,
        histogram_mean=tuple(float(x) for x in histogram / trials),
        large_clique_coverage_mean=float(np.mean(coverage)),
    )


TRIAL_DUMP_COLUMNS = ["trial", "scheme", "K", "N", "M", "delta", "rate", "n_messages", "max_clique"]


def dump_trials(path: Path, spec: ExperimentSpec, records: Sequence[TrialRecord]):
    """Per-trial CSV, one row per trial"""
    cfg = spec.cfg
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRIAL_DUMP_COLUMNS)
        for r in records:
            writer.writerow([r.trial, spec.scheme.value, cfg.K, cfg.N, cfg.M, cfg.delta,
                             f"{r.rate:.12g}", r.n_messages, r.max_clique])


def run_experiment(
    spec: ExperimentSpec,
    workers: Optional[int] = None,
    dump_path: Optional[Path] = None,
) -> Estimate:
    """
    Run `spec.trials` independent trials and aggregate their rates.

    Trial t draws from RngSpec(master_seed, t), so the estimate depends
    only on the spec, never on the worker count or schedule.
    """
    workers = workers if workers is not None else settings.worker_count()
    cfg = spec.cfg
    logger.info(
        f"Experiment {spec.scheme.value} ({spec.graph_source.value}) K={cfg.K} N={cfg.N} "
        f"M={cfg.M} delta={cfg.delta}: {spec.trials} trials, seed {spec.master_seed}"
    )
    records = _collect(spec, workers)
    if dump_path is not None:
        dump_trials(Path(dump_path), spec, records)
    estimate = _aggregate(records, cfg.vertex_count)
    logger.info(f"Experiment {spec.scheme.value} done: mean {estimate.mean:.6g} ± {estimate.stderr:.3g}")
    return estimate


# ---------------------------------------------------------------------------
# Analytic companions and sweeps
# ---------------------------------------------------------------------------

def analytic_rate(scheme: RateScheme, cfg: CacheNetworkConfig, ode_step: Optional[float] = None) -> RatePoint:
    """Closed-form or ODE rate for one configuration"""
    K, N, M, delta = cfg.K, cfg.N, cfg.M, cfg.delta
    q = cfg.q
    if scheme == RateScheme.CFCM:
        rate = analytics.rate_cfcm_analytic(K, q)
    elif scheme == RateScheme.CFCC:
        rate = analytics.rate_cfcc_analytic(K, q, step=ode_step)
    elif scheme == RateScheme.CSCC:
        rate = analytics.rate_cscc_approx(K, q, delta, step=ode_step)
    elif scheme == RateScheme.UNCODED:
        rate = analytics.rate_uncoded_analytic(K, N, M)
    elif scheme == RateScheme.UNCODED_APPROX:
        rate = analytics.rate_uncoded_approx(K, q)
    elif scheme == RateScheme.CSC_OPT:
        rate = analytics.rate_csc_opt_analytic(K, N, M)
    elif scheme == RateScheme.CENTRALIZED:
        rate = analytics.rate_centralized_reference(K, q)
    else:
        raise ConfigurationError(f"no analytic rate for scheme {scheme}")
    return RatePoint(scheme=scheme, source=RateSource.ANALYTIC, K=K, N=N, M=M, delta=delta, rate=rate)


def simulated_rate(spec: ExperimentSpec, workers: Optional[int] = None, dump_path: Optional[Path] = None) -> RatePoint:
    estimate = run_experiment(spec, workers=workers, dump_path=dump_path)
    cfg = spec.cfg
    return RatePoint(
        scheme=REPORTED_AS[spec.scheme],
        source=RateSource.MONTE_CARLO,
        K=cfg.K,
        N=cfg.N,
        M=cfg.M,
        delta=cfg.delta,
        rate=estimate.mean,
        stderr=estimate.stderr,
        trials=estimate.trials,
        large_clique_coverage=estimate.large_clique_coverage_mean,
    )


class SweepAxis(str, Enum):
    M = "M"
    K = "K"
    DELTA = "delta"


def sweep_config(base: CacheNetworkConfig, axis: SweepAxis, value: int, fixed_ratio: bool = False) -> CacheNetworkConfig:
    """Base configuration with one parameter replaced"""
    if axis == SweepAxis.M:
        return CacheNetworkConfig(K=base.K, N=base.N, M=value, delta=base.delta)
    if axis == SweepAxis.DELTA:
        return CacheNetworkConfig(K=base.K, N=base.N, M=base.M, delta=value)
    if not fixed_ratio:
        return CacheNetworkConfig(K=value, N=base.N, M=base.M, delta=base.delta)
    # keep K/N and M/N
    n = max(1, round(value * base.N / base.K))
    m = round(n * base.M / base.N)
    return CacheNetworkConfig(K=value, N=n, M=m, delta=base.delta)


def run_sweep(
    base: ExperimentSpec,
    axis: SweepAxis,
    values: Sequence[int],
    fixed_ratio: bool = False,
    workers: Optional[int] = None,
    ode_step: Optional[float] = None,
) -> List[SweepPoint]:
    """
    One Monte-Carlo estimate per value, each paired with the analytic rate
    of the same configuration, in input order. A failing point is reported
    with its error and the sweep continues.
    """
    axis = SweepAxis(axis)
    points = []
    for value in values:
        try:
            cfg = sweep_config(base.cfg, axis, value, fixed_ratio)
            spec = base.with_config(cfg)
            spec = ExperimentSpec.model_validate(spec.model_dump())
            simulated = simulated_rate(spec, workers=workers)
            analytic = analytic_rate(REPORTED_AS[spec.scheme], cfg, ode_step=ode_step)
            points.append(SweepPoint(value, simulated, analytic))
        except (CacheSimError, ValueError) as e:
            logger.error(f"Sweep point {axis.value}={value} failed: {e}")
            points.append(SweepPoint(value, None, None, str(e)))
    return points
