# 仿真服务
"""
由 ExperimentConfig 构造方案并调度蒙特卡洛试验，CLI 与 HTTP 接口共用
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from app.config import get_settings
from app.schemas.simulation import ExperimentConfig
from app.schemes.base import SimulationScheme
from app.schemes.baseline import BaselineScheme
from app.schemes.linear import LinearScheme
from app.schemes.registry import build_scheme
from app.schemes.two_stage import TwoStageScheme
from app.services.channel import ChannelSpec
from app.services.montecarlo import (
    ErrorEstimate,
    ExponentFit,
    ResultRow,
    fit_exponent,
    run_batch,
    run_transcripts,
)

logger = logging.getLogger(__name__)


@dataclass
class SimulationOutcome:
    """一次仿真的结果"""
    scheme: SimulationScheme
    estimate: ErrorEstimate
    seed: int
    analytic_bound: Optional[float] = None

    @property
    def row(self) -> ResultRow:
        return ResultRow.from_estimate(self.scheme, self.estimate, self.seed)


def resolve_seed(config: ExperimentConfig) -> int:
    return get_settings().default_seed if config.seed is None else config.seed


def make_scheme(config: ExperimentConfig, n: Optional[int] = None) -> SimulationScheme:
    """按配置构造方案；n 缺省取 config 中的码长"""
    spec = ChannelSpec(P=config.P, n=n if n is not None else config.resolved_n(), alpha=config.alpha)
    return build_scheme(
        config.scheme,
        config.M,
        spec,
        lam=config.lam,
        s=config.s,
        delta=config.delta,
        schedule=config.schedule,
    )


def analytic_bound(scheme: SimulationScheme) -> Optional[float]:
    """方案的解析误差上界（M=2 基线为精确值）"""
    if isinstance(scheme, TwoStageScheme):
        return scheme.event_bounds().total
    if isinstance(scheme, LinearScheme):
        return min(1.0, sum(scheme.error_bounds()))
    if isinstance(scheme, BaselineScheme) and scheme.M == 2:
        return scheme.analytic_error_probability()
    return None


def simulate(config: ExperimentConfig, trials: Optional[int] = None) -> SimulationOutcome:
    """单点仿真"""
    scheme = make_scheme(config)
    seed = resolve_seed(config)
    estimate = run_batch(
        scheme, trials or config.trials, seed=seed, workers=config.workers, zero_noise=config.zero_noise
    )
    return SimulationOutcome(scheme=scheme, estimate=estimate, seed=seed, analytic_bound=analytic_bound(scheme))


def simulate_grid(config: ExperimentConfig) -> List[SimulationOutcome]:
    """在 n 网格（缺省为单点 n）上逐点仿真"""
    grid = config.n_grid or [config.resolved_n()]
    seed = resolve_seed(config)
    outcomes = []
    for n in grid:
        scheme = make_scheme(config, n)
        estimate = run_batch(scheme, config.trials, seed=seed, workers=config.workers, zero_noise=config.zero_noise)
        outcomes.append(SimulationOutcome(scheme, estimate, seed, analytic_bound(scheme)))
    return outcomes


def fit(config: ExperimentConfig) -> Tuple[ExponentFit, Optional[float]]:
    """经验指数拟合，返回 (拟合结果, 解析指数)"""
    if not config.n_grid:
        raise ValueError("拟合需要 n_grid")
    seed = resolve_seed(config)
    result = fit_exponent(
        lambda n: make_scheme(config, n), config.n_grid, config.trials, seed=seed, workers=config.workers
    )
    target = make_scheme(config, config.n_grid[0]).exponent_target()
    return result, target


def transcripts(config: ExperimentConfig):
    """逐次试验诊断表"""
    return run_transcripts(make_scheme(config), config.trials, seed=resolve_seed(config), workers=config.workers)
