# 蒙特卡洛试验编排
"""
按确定性种子批量运行任意方案，估计误差概率与 Clopper-Pearson 置信区间，
统计错误事件，并在 n 网格上拟合经验误差指数。

第 i 次试验使用 stream_id = i 的噪声流，消息 W 也从该流中均匀抽取。
试验按 chunk_size 分块，workers > 1 时由进程池并行执行，按块顺序合并，
因此结果与 worker 数无关。
"""

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from app.config import get_settings
from app.schemes.base import ErrorEvent, SimulationScheme, Transcript
from app.services.channel import NoiseStream
from app.utils.helpers import CSV_FLOAT_FORMAT

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "scheme", "M", "P", "alpha", "n", "trials", "errors",
    "p_hat", "ci_low", "ci_high", "e1", "etilde", "e2", "seed",
]
# 拟合所需的最少有效网格点
MIN_FIT_POINTS = 3


@dataclass
class ErrorEstimate:
    """误差概率估计"""
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float
    event_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        """二项分布标准差 √(p(1-p)/trials)"""
        return math.sqrt(self.p_hat * (1.0 - self.p_hat) / self.trials)

    def count(self, event: ErrorEvent) -> int:
        return self.event_counts.get(event.value, 0)


@dataclass
class ExponentFit:
    """经验误差指数拟合结果"""
    points: List[Tuple[int, float]]     # 参与拟合的 (n, p̂)
    slope: float                        # -Δln p̂/Δn
    stderr: float
    intercept: float = 0.0
    excluded: List[int] = field(default_factory=list)   # 零错误被剔除的 n
    estimates: Dict[int, ErrorEstimate] = field(default_factory=dict)


@dataclass
class ResultRow:
    """结果 CSV 的一行"""
    scheme: str
    M: int
    P: float
    alpha: float
    n: int
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float
    e1: int
    etilde: int
    e2: int
    seed: int

    @classmethod
    def from_estimate(cls, scheme: SimulationScheme, estimate: ErrorEstimate, seed: int) -> "ResultRow":
        return cls(
            scheme=scheme.name,
            M=scheme.M,
            P=scheme.spec.P,
            alpha=scheme.spec.alpha,
            n=scheme.spec.n,
            trials=estimate.trials,
            errors=estimate.errors,
            p_hat=estimate.p_hat,
            ci_low=estimate.ci_low,
            ci_high=estimate.ci_high,
            e1=estimate.count(ErrorEvent.E1),
            etilde=estimate.count(ErrorEvent.MISCOORDINATION),
            e2=estimate.count(ErrorEvent.E2),
            seed=seed,
        )


def results_to_csv(rows: Iterable[ResultRow], path_or_buf=None) -> Optional[str]:
    """结果行写出为 CSV（17 位有效数字）"""
    df = pd.DataFrame([asdict(r) for r in rows], columns=RESULT_COLUMNS)
    return df.to_csv(path_or_buf, index=False, float_format=CSV_FLOAT_FORMAT)


def results_from_csv(source) -> List[ResultRow]:
    df = pd.read_csv(source, dtype={"scheme": str}, float_precision="round_trip")
    return [ResultRow(**rec) for rec in df.to_dict(orient="records")]


def clopper_pearson(errors: int, trials: int, level: float = 0.95) -> Tuple[float, float]:
    """二项比例的精确 (Clopper-Pearson) 双侧置信区间"""
    if trials < 1:
        raise ValueError(f"trials 必须 >= 1，当前: {trials}")
    if not 0 <= errors <= trials:
        raise ValueError(f"errors 必须位于 [0, trials]，当前: {errors}")
    if not 0 < level < 1:
        raise ValueError(f"level 必须位于 (0, 1)，当前: {level}")

    tail = (1.0 - level) / 2.0
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(tail, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(stats.beta.ppf(1.0 - tail, errors + 1, trials - errors))
    return lo, hi


def make_estimate(errors: int, trials: int, event_counts: Optional[Dict[str, int]] = None) -> ErrorEstimate:
    lo, hi = clopper_pearson(errors, trials)
    return ErrorEstimate(
        trials=trials,
        errors=errors,
        p_hat=errors / trials,
        ci_low=lo,
        ci_high=hi,
        event_counts=dict(event_counts or {}),
    )


# ============ 分块执行 ============

@dataclass(frozen=True)
class _Chunk:
    scheme: SimulationScheme
    seed: int
    start: int
    stop: int
    zero_noise: bool
    extract: Optional[Callable[[int, Transcript], Any]]


def _trials(chunk: _Chunk):
    alpha = chunk.scheme.spec.alpha
    for i in range(chunk.start, chunk.stop):
        stream = NoiseStream(chunk.seed, i, alpha=alpha, zero_noise=chunk.zero_noise)
        w = stream.message(chunk.scheme.M)
        yield i, chunk.scheme.run_trial(w, stream)


def _count_chunk(chunk: _Chunk) -> Tuple[int, Dict[str, int]]:
    errors = 0
    events: Counter = Counter()
    for _, t in _trials(chunk):
        if t.is_error:
            errors += 1
            events[t.event.value] += 1
    return errors, dict(events)


def _collect_chunk(chunk: _Chunk) -> List[Any]:
    return [chunk.extract(i, t) for i, t in _trials(chunk)]


def _transcript_row(trial: int, transcript: Transcript) -> Dict[str, Any]:
    return transcript.to_row(trial)


def _chunks(
    scheme: SimulationScheme,
    trials: int,
    seed: int,
    chunk_size: int,
    zero_noise: bool = False,
    extract: Optional[Callable[[int, Transcript], Any]] = None,
) -> List[_Chunk]:
    return [
        _Chunk(scheme, seed, start, min(start + chunk_size, trials), zero_noise, extract)
        for start in range(0, trials, chunk_size)
    ]


def _execute(fn: Callable[[_Chunk], Any], chunks: Sequence[_Chunk], workers: int) -> List[Any]:
    """按块顺序返回结果；workers <= 1 或只有一块时在当前进程执行"""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _resolve(trials: int, seed: Optional[int], workers: Optional[int], chunk_size: Optional[int]):
    settings = get_settings()
    if trials < 1:
        raise ValueError(f"trials 必须 >= 1，当前: {trials}")
    seed = settings.default_seed if seed is None else seed
    workers = settings.workers if workers is None else workers
    chunk_size = settings.chunk_size if chunk_size is None else chunk_size
    if chunk_size < 1:
        raise ValueError(f"chunk_size 必须 >= 1，当前: {chunk_size}")
    return seed, max(1, workers), chunk_size


def run_batch(
    scheme: SimulationScheme,
    trials: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    zero_noise: bool = False,
) -> ErrorEstimate:
    """
    运行 trials 次独立试验并估计误差概率

    结果只取决于 (scheme, trials, seed)，与 workers、chunk_size 无关。
    zero_noise=True 为诊断开关，所有噪声置零。
    """
    seed, workers, chunk_size = _resolve(trials, seed, workers, chunk_size)
    chunks = _chunks(scheme, trials, seed, chunk_size, zero_noise)
    logger.debug(f"run_batch: {scheme.name} M={scheme.M} n={scheme.spec.n} trials={trials} chunks={len(chunks)} workers={workers}")

    errors = 0
    events: Counter = Counter()
    for chunk_errors, chunk_events in _execute(_count_chunk, chunks, workers):
        errors += chunk_errors
        events.update(chunk_events)

    estimate = make_estimate(errors, trials, dict(sorted(events.items())))
    logger.info(
        f"{scheme.name} M={scheme.M} n={scheme.spec.n} alpha={scheme.spec.alpha}: "
        f"{errors}/{trials} 错误，p̂={estimate.p_hat:.4g} [{estimate.ci_low:.4g}, {estimate.ci_high:.4g}]"
    )
    return estimate


def collect_trials(
    scheme: SimulationScheme,
    trials: int,
    extract: Callable[[int, Transcript], Any],
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> List[Any]:
    """
    按试验顺序收集 extract(trial, transcript) 的返回值

    extract 需为模块级函数（进程池需要可序列化）。
    """
    seed, workers, chunk_size = _resolve(trials, seed, workers, chunk_size)
    chunks = _chunks(scheme, trials, seed, chunk_size, extract=extract)
    values: List[Any] = []
    for part in _execute(_collect_chunk, chunks, workers):
        values.extend(part)
    return values


def run_transcripts(
    scheme: SimulationScheme,
    trials: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> pd.DataFrame:
    """逐次试验记录表（诊断 CSV），列顺序为 scheme.transcript_columns"""
    rows = collect_trials(scheme, trials, _transcript_row, seed, workers, chunk_size)
    return pd.DataFrame(rows, columns=scheme.transcript_columns)


# ============ 指数拟合 ============

def fit_log_slope(ns: Sequence[float], p: Sequence[float], variances: Sequence[float]) -> Tuple[float, float, float]:
    """
    -ln p 对 n 的加权最小二乘直线

    权重为 1/var(ln p)。返回 (slope, stderr, intercept)。
    """
    x = np.asarray(ns, dtype=float)
    y = -np.log(np.asarray(p, dtype=float))
    if x.size < 2:
        raise ValueError("拟合至少需要 2 个点")
    if np.unique(x).size != x.size:
        raise ValueError("n 网格点必须互不相同")

    # polyfit 的权重作用在残差上，取 1/σ
    sigma = np.sqrt(np.asarray(variances, dtype=float))
    coef, cov = np.polyfit(x, y, 1, w=1.0 / sigma, cov="unscaled")
    return float(coef[0]), math.sqrt(float(cov[0, 0])), float(coef[1])


def fit_exponent(
    make_scheme: Callable[[int], SimulationScheme],
    n_grid: Sequence[int],
    trials: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> ExponentFit:
    """
    在 n 网格上估计 p̂(n) 并拟合经验指数

    var(ln p̂) ≈ (1-p̂)/(p̂·trials)。零错误的网格点剔除并记录在 excluded 中，
    有效点少于 3 个时报错。
    """
    grid = sorted({int(n) for n in n_grid})
    if len(grid) < MIN_FIT_POINTS:
        raise ValueError(f"n 网格至少需要 {MIN_FIT_POINTS} 个不同的点，当前: {list(n_grid)}")

    estimates: Dict[int, ErrorEstimate] = {}
    for n in grid:
        estimates[n] = run_batch(make_scheme(n), trials, seed, workers, chunk_size)

    kept = [n for n in grid if estimates[n].errors > 0]
    excluded = [n for n in grid if estimates[n].errors == 0]
    if excluded:
        logger.warning(f"以下 n 没有观测到错误，已从拟合中剔除: {excluded}")
    if len(kept) < MIN_FIT_POINTS:
        raise ValueError(f"有效网格点不足 {MIN_FIT_POINTS} 个（零错误: {excluded}），请增大 trials 或减小 n")

    p = [estimates[n].p_hat for n in kept]
    var = [(1.0 - q) / (q * trials) for q in p]
    # p̂ = 1 时方差为 0，给一个下限避免除零
    var = [max(v, 1.0 / (trials * trials)) for v in var]
    slope, stderr, intercept = fit_log_slope(kept, p, var)
    logger.info(f"经验指数 {slope:.5g} ± {stderr:.2g}（{len(kept)} 个点）")
    return ExponentFit(
        points=[(n, estimates[n].p_hat) for n in kept],
        slope=slope,
        stderr=stderr,
        intercept=intercept,
        excluded=excluded,
        estimates=estimates,
    )
