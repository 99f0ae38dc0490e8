# 验收套件
"""
逐条运行验收准则并给出实测值与期望值

准则 1-3、11 为解析检查；4-10 为有限 n 下的蒙特卡洛/上界一致性检查；
12 检查不同 worker 数下结果 CSV 逐字节一致。quick 模式跳过 4、5、8，其余蒙特卡洛准则按缩小的试验数运行。
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.schemes.base import ErrorEvent, Transcript
from app.schemes.baseline import BaselineScheme
from app.schemes.linear import LinearParams, LinearScheme, ScheduleMode, noisy_schedule
from app.schemes.two_stage import TwoStageParams, TwoStageScheme, e1_wedge_probability
from app.services import exponents as ex
from app.services.channel import ChannelSpec, NoiseStream
from app.services.montecarlo import (
    ResultRow,
    collect_trials,
    fit_exponent,
    results_to_csv,
    run_batch,
)
from app.utils.numerics import q_function

logger = logging.getLogger(__name__)

ANCHOR_TOL = 1e-12
BALANCE_RTOL = 1e-10
TELESCOPE_TOL = 1e-9
QUICK_CRITERIA = (1, 2, 3, 6, 7, 9, 10, 11, 12)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    expected: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:>2} {self.name}: 实测 {self.measured}；期望 {self.expected} ({self.seconds:.1f}s)"


@dataclass
class VerifyContext:
    seed: int
    workers: int = 1
    quick: bool = False


# ============ 解析准则 ============

def _closed_form_anchors(ctx: VerifyContext) -> CriterionResult:
    checks: Dict[str, float] = {
        "E3(∞)-3/8": ex.exponent_no_feedback(3, 1.0) - 0.375,
        "max|E_M(0)-1/2|": max(abs(ex.exponent_noiseless_feedback(M, 1.0) - 0.5) for M in range(2, 17)),
    }
    point = ex.two_stage_parametric(3, 1.0, 0.0)
    checks["|φ-param(s=0)-(0,0.8,0.4)|"] = max(
        abs(point.alpha_star), abs(point.lambda_star - 0.8), abs(point.phi - 0.4)
    )
    checks["α*(1)-1/4"] = ex.alpha_star(1.0) - 0.25
    checks["max|E''(0)-1/2|"] = max(abs(ex.linear_exponent(M, 1.0, 0.0).exponent - 0.5) for M in range(2, 17))
    worst = max(abs(v) for v in checks.values())
    return CriterionResult(
        1, "闭式锚点", worst <= ANCHOR_TOL, f"最大偏差 {worst:.3g}", f"<= {ANCHOR_TOL:g}"
    )


def _balance_identities(ctx: VerifyContext) -> CriterionResult:
    worst = 0.0
    for M in (3, 5, 8):
        for s in np.arange(1, 10) / 10.0:
            point = ex.two_stage_parametric(M, 1.0, float(s))
            terms = ex.two_stage_min_terms(M, 1.0, point.lambda_star, float(s), point.alpha_star)
            worst = max(worst, (max(terms) - min(terms)) / max(terms))
            worst = max(worst, abs(min(terms) - point.phi) / point.phi)
        for alpha in (1e-3, 1e-2, 1e-1, 1.0):
            delta, lam = ex.optimal_linear_params(M, alpha)
            t1, t2 = ex.linear_min_terms(M, 1.0, lam, delta, alpha)
            worst = max(worst, abs(t1 - t2) / max(t1, t2))
            worst = max(worst, abs(min(t1, t2) - ex.linear_exponent(M, 1.0, alpha).exponent) / max(t1, t2))
    return CriterionResult(
        2, "平衡恒等式", worst <= BALANCE_RTOL, f"最大相对偏差 {worst:.3g}", f"<= {BALANCE_RTOL:g}"
    )


def _endpoint_identity(ctx: VerifyContext) -> CriterionResult:
    worst = max(abs(ex.phi(M, 1.0, 1.0) - ex.exponent_no_feedback(M, 1.0)) for M in range(3, 33))
    return CriterionResult(
        3, "端点恒等式 φ(1)=E_M(∞)", worst <= ANCHOR_TOL, f"最大偏差 {worst:.3g}", f"<= {ANCHOR_TOL:g}"
    )


def _crossover(ctx: VerifyContext) -> CriterionResult:
    M, P = 3, 1.0
    low = ex.linear_exponent(M, P, 1e-4).exponent > ex.two_stage_exponent_at_alpha(M, P, 1e-4).exponent
    high = ex.linear_exponent(M, P, 1e-1).exponent < ex.two_stage_exponent_at_alpha(M, P, 1e-1).exponent
    report = ex.crossover_report(M, P)
    measured = (
        f"strong={report.strong_alpha:.6g}, weak={report.weak_alpha:.6g}, "
        f"参考 {report.reference_alpha:g}, α=1e-4 线性更优={low}, α=0.1 两阶段更优={high}"
    )
    return CriterionResult(11, "交叉点报告", low and high, measured, "两处符号关系均成立")


# ============ 蒙特卡洛准则 ============

def _scale(ctx: VerifyContext, full: int, quick: int) -> int:
    return quick if ctx.quick else full


def _harness_calibration(ctx: VerifyContext) -> CriterionResult:
    scheme = BaselineScheme(2, ChannelSpec(P=1.0, n=4))
    est = run_batch(scheme, 1_000_000, seed=ctx.seed, workers=ctx.workers)
    oracle = q_function(2.0)
    return CriterionResult(
        4, "框架校准 (M=2, nP=4)", est.ci_low <= oracle <= est.ci_high,
        f"p̂={est.p_hat:.6g} CI=[{est.ci_low:.6g}, {est.ci_high:.6g}]", f"CI 包含 Q(2)={oracle:.7g}",
    )


def _two_stage_event_level(ctx: VerifyContext) -> CriterionResult:
    lam, nP, trials = 0.8, 9.0, 200_000
    scheme = TwoStageScheme(TwoStageParams(M=3, lam=lam, s=0.0), ChannelSpec(P=1.0, n=9, alpha=0.0))
    est = run_batch(scheme, trials, seed=ctx.seed, workers=ctx.workers)
    oracle = e1_wedge_probability(lam, nP)
    p_e1 = est.count(ErrorEvent.E1) / trials
    sigma = math.sqrt(oracle * (1.0 - oracle) / trials)
    etilde = est.count(ErrorEvent.MISCOORDINATION)
    passed = abs(p_e1 - oracle) <= 3.0 * sigma and etilde == 0
    return CriterionResult(
        5, "两阶段事件级校验 (α=0)", passed,
        f"P̂(E1)={p_e1:.6g}, 失配次数={etilde}", f"|P̂(E1)-{oracle:.6g}| <= 3σ={3 * sigma:.3g}，失配为 0",
    )


def _two_stage_noisy(ctx: VerifyContext) -> CriterionResult:
    s, n = 0.5, 17
    trials = _scale(ctx, 200_000, 20_000)
    point = ex.two_stage_parametric(3, 1.0, s)
    scheme = TwoStageScheme(
        TwoStageParams(M=3, lam=point.lambda_star, s=s), ChannelSpec(P=1.0, n=n, alpha=point.alpha_star)
    )
    est = run_batch(scheme, trials, seed=ctx.seed, workers=ctx.workers)
    bound = scheme.event_bounds().total
    rate = math.inf if est.errors == 0 else -math.log(est.p_hat) / n
    passed = est.p_hat <= bound and rate >= 0.8 * point.phi
    return CriterionResult(
        6, "两阶段带噪一致性", passed,
        f"p̂={est.p_hat:.4g}, -ln(p̂)/n={rate:.4g}", f"p̂ <= {bound:.4g} 且 -ln(p̂)/n >= {0.8 * point.phi:.4g}",
    )


def _telescoping(ctx: VerifyContext) -> CriterionResult:
    total = _scale(ctx, 100_000, 10_000)
    configs = [(nbar, delta) for nbar in (2, 10, 50) for delta in (0.01, 0.1, 1.0)]
    per_config = total // len(configs)
    worst = 0.0
    trial = 0
    for nbar, delta in configs:
        params = LinearParams(M=3, nbar=nbar, delta=delta, mode=ScheduleMode.NOISY, lam=1e-3)
        scheme = LinearScheme(params, ChannelSpec(P=1e4, n=nbar * nbar, alpha=0.1))
        for _ in range(per_config):
            stream = NoiseStream(ctx.seed, trial, alpha=0.1)
            trial += 1
            t = scheme.run_trial(stream.message(3), stream)
            if t.budget_bound:
                return CriterionResult(7, "线性伸缩恒等式", False, f"η<n̄ 出现于 n̄={nbar}", "η = n̄")
            worst = max(worst, abs(t.xhat1 - scheme.virtual_estimate(t)))
    return CriterionResult(
        7, "线性伸缩恒等式", worst <= TELESCOPE_TOL, f"{trial} 次试验最大 |x̂1-x̂1'|={worst:.3g}", f"<= {TELESCOPE_TOL:g}"
    )


def _estimation_error(trial: int, t: Transcript):
    return (not t.budget_bound, t.xhat1 - t.x[0])


def _estimation_variance(ctx: VerifyContext) -> CriterionResult:
    alpha, n, trials = 0.1, 100, 1_000_000
    params = noisy_schedule(3, n, alpha)
    scheme = LinearScheme(params, ChannelSpec(P=1.0, n=n, alpha=alpha))
    values = collect_trials(scheme, trials, _estimation_error, seed=ctx.seed, workers=ctx.workers)
    err = np.array([e for full, e in values if full])
    sample_var = float(np.var(err, ddof=1))
    target = ex.estimation_noise(params.nbar, params.delta, alpha)
    rel = abs(sample_var - target) / target
    return CriterionResult(
        8, "线性估计噪声方差", rel <= 0.02,
        f"样本方差 {sample_var:.6g}（{err.size} 次 η=n̄）", f"N={target:.6g}，相对偏差 <= 2%",
    )


def _budget_flag(trial: int, t: Transcript) -> bool:
    return t.budget_bound


def _budget_bound(ctx: VerifyContext) -> CriterionResult:
    trials = _scale(ctx, 100_000, 10_000)
    parts = []
    passed = True
    for n, alpha in ((100, 0.5), (49, 0.2)):
        scheme = LinearScheme(noisy_schedule(3, n, alpha), ChannelSpec(P=1.0, n=n, alpha=alpha))
        flags = collect_trials(scheme, trials, _budget_flag, seed=ctx.seed, workers=ctx.workers)
        freq = sum(flags) / trials
        bound = scheme.error_bounds()[1]
        sigma = math.sqrt(max(freq * (1.0 - freq), 1.0 / trials) / trials)
        passed &= freq <= bound + 3.0 * sigma
        parts.append(f"(n={n}, α={alpha}) P̂{{η<n̄}}={freq:.4g} vs {bound:.4g}")
    return CriterionResult(9, "预算截断概率上界", passed, "; ".join(parts), "频率 <= χ² 尾上界 + 3σ")


def _linear_exponent_consistency(ctx: VerifyContext) -> CriterionResult:
    alpha, grid = 0.05, (16, 25, 36, 49)
    trials = _scale(ctx, 200_000, 50_000)

    def make(n: int) -> LinearScheme:
        return LinearScheme(noisy_schedule(3, n, alpha), ChannelSpec(P=1.0, n=n, alpha=alpha))

    result = fit_exponent(make, grid, trials, seed=ctx.seed, workers=ctx.workers)
    target = ex.linear_exponent(3, 1.0, alpha).exponent
    passed = result.slope <= target + 2.0 * result.stderr
    return CriterionResult(
        10, "线性指数一致性", passed,
        f"拟合斜率 {result.slope:.4g} ± {result.stderr:.2g}（剔除 {result.excluded}）",
        f"<= E''={target:.4g} + 2·stderr",
    )


# ============ 确定性 ============

def _determinism_configs():
    point = ex.two_stage_parametric(3, 1.0, 0.5)
    yield BaselineScheme(2, ChannelSpec(P=1.0, n=4))
    yield TwoStageScheme(TwoStageParams(M=3, lam=0.8, s=0.0), ChannelSpec(P=1.0, n=9))
    yield TwoStageScheme(
        TwoStageParams(M=3, lam=point.lambda_star, s=0.5), ChannelSpec(P=1.0, n=17, alpha=point.alpha_star)
    )
    for n, alpha in ((100, 0.1), (49, 0.2), (25, 0.05)):
        yield LinearScheme(noisy_schedule(3, n, alpha), ChannelSpec(P=1.0, n=n, alpha=alpha))


def _determinism(ctx: VerifyContext) -> CriterionResult:
    trials = _scale(ctx, 20_000, 2_000)
    chunk = max(1, trials // 8)
    mismatched = []
    for scheme in _determinism_configs():
        outputs = []
        for workers in (1, 4):
            est = run_batch(scheme, trials, seed=ctx.seed, workers=workers, chunk_size=chunk)
            outputs.append(results_to_csv([ResultRow.from_estimate(scheme, est, ctx.seed)]))
        if outputs[0] != outputs[1]:
            mismatched.append(f"{scheme.name}(n={scheme.spec.n})")
    return CriterionResult(
        12, "确定性 (workers 1 vs 4)", not mismatched,
        "全部一致" if not mismatched else f"不一致: {', '.join(mismatched)}", "CSV 逐字节一致",
    )


CRITERIA: Dict[int, Callable[[VerifyContext], CriterionResult]] = {
    1: _closed_form_anchors,
    2: _balance_identities,
    3: _endpoint_identity,
    4: _harness_calibration,
    5: _two_stage_event_level,
    6: _two_stage_noisy,
    7: _telescoping,
    8: _estimation_variance,
    9: _budget_bound,
    10: _linear_exponent_consistency,
    11: _crossover,
    12: _determinism,
}


def run_acceptance(
    seed: int,
    workers: int = 1,
    quick: bool = False,
    only: Optional[Sequence[int]] = None,
) -> List[CriterionResult]:
    """运行验收准则，返回每条的结果"""
    ctx = VerifyContext(seed=seed, workers=workers, quick=quick)
    numbers = list(only) if only else (list(QUICK_CRITERIA) if quick else sorted(CRITERIA))
    results = []
    for number in numbers:
        if number not in CRITERIA:
            raise ValueError(f"未知验收准则编号: {number}")
        start = time.perf_counter()
        result = CRITERIA[number](ctx)
        result.seconds = time.perf_counter() - start
        logger.info(result.line())
        results.append(result)
    return results
