# 误差指数解析计算
"""
无反馈、无噪反馈、两阶段方案、线性方案的误差指数闭式表达式，
最优参数公式，以及两种方案的交叉点搜索。

指数单位：nats，按 -(1/n)ln P_e 归一化。
"""

import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, NamedTuple, Optional, Tuple, Union

import pandas as pd

from app.utils.helpers import CSV_FLOAT_FORMAT, half_floor, integer_sqrt
from app.utils.numerics import DEFAULT_ROOT_TOL, bracket_and_bisect

logger = logging.getLogger(__name__)

# 两阶段参数族的 α 上界 α*(1)
TWO_STAGE_ALPHA_MAX = 0.25
# 参考曲线图中标注的交叉点位置（M=3）
REFERENCE_CROSSOVER_ALPHA = 5.6e-3
# 交叉点搜索左端点（α=0 处两种方案分别取 P/2 与 φ(0)）
CROSSOVER_ALPHA_MIN = 1e-12

CURVE_COLUMNS = ["scheme", "M", "P", "alpha", "exponent", "s", "lambda", "delta"]


class Scheme(str, Enum):
    """曲线类别"""
    NO_FEEDBACK = "NoFeedback"
    NOISELESS_FEEDBACK = "NoiselessFeedback"
    TWO_STAGE = "TwoStage"
    LINEAR = "Linear"
    LINEAR_WEAK_BOUND = "LinearWeakBound"


@dataclass(frozen=True)
class ExponentPoint:
    """某个 α 下某方案的误差指数"""
    alpha: float
    exponent: float
    scheme: Scheme
    s: Optional[float] = None
    lam: Optional[float] = None
    delta: Optional[float] = None


class TwoStagePoint(NamedTuple):
    """两阶段参数族在参数 s 处的取值"""
    alpha_star: float
    lambda_star: float
    phi: float


@dataclass
class CurveTable:
    """多方案的 (α, 指数) 曲线表"""
    M: int
    P: float
    rows: List[ExponentPoint] = field(default_factory=list)

    def curve(self, scheme: Scheme) -> List[ExponentPoint]:
        return [r for r in self.rows if r.scheme == scheme]

    def to_dataframe(self) -> pd.DataFrame:
        records = [
            {
                "scheme": r.scheme.value,
                "M": self.M,
                "P": self.P,
                "alpha": r.alpha,
                "exponent": r.exponent,
                "s": r.s,
                "lambda": r.lam,
                "delta": r.delta,
            }
            for r in self.rows
        ]
        return pd.DataFrame.from_records(records, columns=CURVE_COLUMNS)

    def to_csv(self, path_or_buf=None) -> Optional[str]:
        """以 17 位有效数字写出 CSV；缺省参数留空"""
        return self.to_dataframe().to_csv(
            path_or_buf, index=False, float_format=CSV_FLOAT_FORMAT, na_rep=""
        )

    @classmethod
    def from_csv(cls, source: Union[str, io.TextIOBase]) -> "CurveTable":
        """解析 to_csv 的输出（用于 round-trip 校验）"""
        df = pd.read_csv(source, dtype={"scheme": str, "M": int}, float_precision="round_trip")
        if df.empty:
            raise ValueError("曲线表为空，无法确定 M 与 P")

        def _opt(value) -> Optional[float]:
            return None if pd.isna(value) else float(value)

        rows = [
            ExponentPoint(
                alpha=float(rec["alpha"]),
                exponent=float(rec["exponent"]),
                scheme=Scheme(rec["scheme"]),
                s=_opt(rec["s"]),
                lam=_opt(rec["lambda"]),
                delta=_opt(rec["delta"]),
            )
            for rec in df.to_dict(orient="records")
        ]
        return cls(M=int(df["M"].iloc[0]), P=float(df["P"].iloc[0]), rows=rows)


def _check_mp(M: int, P: float, min_m: int = 2) -> None:
    if M < min_m:
        raise ValueError(f"M 必须 >= {min_m}，当前: {M}")
    if P <= 0:
        raise ValueError(f"P 必须 > 0，当前: {P}")


def _check_s(s: float) -> None:
    if not 0 <= s <= 1:
        raise ValueError(f"s 必须位于 [0, 1]，当前: {s}")


def _q(s: float) -> float:
    return s * s - 2.0 * s + 4.0


# ============ 参考直线 ============

def exponent_no_feedback(M: int, P: float) -> float:
    """无反馈最优指数 E_M(∞) = MP/(4(M-1))（正则单纯形码）"""
    _check_mp(M, P)
    return M * P / (4.0 * (M - 1))


def exponent_noiseless_feedback(M: int, P: float) -> float:
    """无噪反馈最优指数 E_M(0) = P/2，与 M 无关"""
    _check_mp(M, P)
    return P / 2.0


# ============ 两阶段方案 ============

def alpha_star(s: float) -> float:
    """α*(s) = 3s²/(4(s²-2s+4))，在 [0,1] 上单调递增，α*(1) = 1/4"""
    _check_s(s)
    return 3.0 * s * s / (4.0 * _q(s))


def lambda_star(M: int, s: float) -> float:
    """λ*(s) = (M(s²-2s+4)/(6(M-1)) + (M-2)/(2(M-1)))^{-1}"""
    _check_s(s)
    return 1.0 / (M * _q(s) / (6.0 * (M - 1)) + (M - 2) / (2.0 * (M - 1)))


def phi(M: int, P: float, s: float) -> float:
    """φ(s) = (P/2)(1 - 3(M-2)/(M(s²-2s+4) + 3(M-2)))"""
    _check_s(s)
    return 0.5 * P * (1.0 - 3.0 * (M - 2) / (M * _q(s) + 3.0 * (M - 2)))


def two_stage_parametric(M: int, P: float, s: float) -> TwoStagePoint:
    """两阶段参数族：(α*(s), λ*(s), φ(s))"""
    _check_mp(M, P, min_m=3)
    _check_s(s)
    return TwoStagePoint(alpha_star(s), lambda_star(M, s), phi(M, P, s))


def s_for_alpha(alpha: float, tol: float = DEFAULT_ROOT_TOL) -> float:
    """反解 α*(s) = alpha，alpha ∈ [0, 1/4]"""
    if not 0 <= alpha <= TWO_STAGE_ALPHA_MAX:
        raise ValueError(f"两阶段参数族仅覆盖 alpha ∈ [0, 1/4]，当前: {alpha}")
    if alpha == 0:
        return 0.0
    if alpha == TWO_STAGE_ALPHA_MAX:
        return 1.0
    return bracket_and_bisect(lambda s: alpha_star(s) - alpha, 0.0, 1.0, tol=tol).root


def two_stage_exponent_at_alpha(M: int, P: float, alpha: float) -> ExponentPoint:
    """两阶段方案在给定反馈噪声方差 α 下的指数下界 φ(s(α))"""
    _check_mp(M, P, min_m=3)
    s = s_for_alpha(alpha)
    point = two_stage_parametric(M, P, s)
    return ExponentPoint(
        alpha=alpha, exponent=point.phi, scheme=Scheme.TWO_STAGE, s=s, lam=point.lambda_star
    )


def two_stage_min_terms(M: int, P: float, lam: float, s: float, alpha: float) -> Tuple[float, float, float]:
    """
    两阶段方案指数下界中取最小的三项：
    第一阶段误判、反馈失配、第二阶段误判
    """
    _check_mp(M, P, min_m=3)
    _check_s(s)
    if alpha < 0:
        raise ValueError(f"alpha 必须 >= 0，当前: {alpha}")
    t1 = lam * M * P * _q(s) / (12.0 * (M - 1))
    if alpha == 0:
        t2 = math.inf
    else:
        t2 = s * s * lam * M * P / (16.0 * (M - 1) * alpha)
    t3 = 0.5 * P * (1.0 - (M - 2) * lam / (2.0 * (M - 1)))
    return t1, t2, t3


def two_stage_schedule_exponent(M: int, P: float, lam: float, s: float, alpha: float) -> float:
    """任意 (λ, s) 调度在 α 下的指数下界"""
    return min(two_stage_min_terms(M, P, lam, s, alpha))


def two_stage_noise_free_exponent(P: float, lam: float) -> float:
    """M=3 无噪两阶段方案：min{λP/2, (P/2)(1-λ/4)}，λ=4/5 时为 2P/5"""
    if not 0 < lam < 1:
        raise ValueError(f"lambda 必须位于 (0, 1)，当前: {lam}")
    return min(0.5 * lam * P, 0.5 * P * (1.0 - lam / 4.0))


def two_stage_small_alpha_limit(M: int, P: float) -> float:
    """α→0 时两阶段下界的极限 2PM/(7M-6)，严格小于 P/2"""
    _check_mp(M, P, min_m=3)
    return 2.0 * P * M / (7.0 * M - 6.0)


# ============ 线性方案 ============

def _linear_denominator(M: int, alpha: float) -> float:
    L = half_floor(M)
    return 1.0 + alpha + 4.0 * L * L * alpha + 4.0 * L * math.sqrt(alpha * (1.0 + alpha))


def linear_exponent(M: int, P: float, alpha: float) -> ExponentPoint:
    """线性噪声反馈方案的精确指数 E''_M(α)"""
    _check_mp(M, P)
    if alpha < 0:
        raise ValueError(f"alpha 必须 >= 0，当前: {alpha}")
    value = 0.5 * P / _linear_denominator(M, alpha)
    if alpha == 0:
        return ExponentPoint(alpha=alpha, exponent=value, scheme=Scheme.LINEAR)
    delta, lam = optimal_linear_params(M, alpha)
    return ExponentPoint(alpha=alpha, exponent=value, scheme=Scheme.LINEAR, lam=lam, delta=delta)


def linear_weak_bound(M: int, P: float, alpha: float) -> float:
    """较弱的闭式下界 (P/2)/(√α·M + √(1+α))²，M 为偶数时与 E''_M 相等"""
    _check_mp(M, P)
    if alpha < 0:
        raise ValueError(f"alpha 必须 >= 0，当前: {alpha}")
    root = math.sqrt(alpha) * M + math.sqrt(1.0 + alpha)
    return 0.5 * P / (root * root)


def optimal_linear_params(M: int, alpha: float) -> Tuple[float, float]:
    """
    α 下的最优 (δ, λ)

        δ(α) = (1 + √(4L²α/(1+α)))^{1/2} - 1
        λ(α) = (1 + √((1+α)/(4L²α)))^{-1}
    """
    if M < 2:
        raise ValueError(f"M 必须 >= 2，当前: {M}")
    if alpha <= 0:
        raise ValueError("alpha = 0 时 δ、λ 退化，请改用无噪调度 noise_free_schedule")
    L = half_floor(M)
    delta = math.sqrt(1.0 + math.sqrt(4.0 * L * L * alpha / (1.0 + alpha))) - 1.0
    lam = 1.0 / (1.0 + math.sqrt((1.0 + alpha) / (4.0 * L * L * alpha)))
    return delta, lam


def linear_min_terms(M: int, P: float, lam: float, delta: float, alpha: float) -> Tuple[float, float]:
    """线性方案指数下界中取最小的两项：估计噪声项、能量耗尽项"""
    _check_mp(M, P)
    L = half_floor(M)
    g = (1.0 + delta) ** 2
    if alpha == 0:
        t1 = math.inf
    else:
        t1 = lam * P / (8.0 * L * L * alpha) * (g - 1.0) / g
    t2 = (1.0 - lam) * P / (2.0 * g * (1.0 + alpha))
    return t1, t2


def pinsker_delta(M: int, n: int) -> float:
    """无噪调度的放大系数 δ(n) = ln(4nL²)/(2n̄)"""
    nbar = integer_sqrt(n)
    L = half_floor(M)
    return math.log(4.0 * n * L * L) / (2.0 * nbar)


def pinsker_finite_n_terms(M: int, P: float, n: int) -> Tuple[float, float]:
    """无噪线性方案在有限 n 下的两项：P(1+δ)^{2(n̄-1)}/(8nL²) 与 P/(2(1+δ)²)"""
    _check_mp(M, P)
    nbar = integer_sqrt(n)
    L = half_floor(M)
    delta = pinsker_delta(M, n)
    t1 = P * (1.0 + delta) ** (2 * (nbar - 1)) / (8.0 * n * L * L)
    t2 = P / (2.0 * (1.0 + delta) ** 2)
    return t1, t2


def estimation_noise(nbar: int, delta: float, alpha: float) -> float:
    """
    约束未触发时估计误差 x̂1 - X1 的方差

        N = Σ_{i=1}^{n̄-1} α/(1+δ)^{2(i-1)} + (1+δ)^{-2(n̄-1)}
    """
    if nbar < 1:
        raise ValueError(f"nbar 必须 >= 1，当前: {nbar}")
    g = (1.0 + delta) ** 2
    total = sum(alpha / g ** (i - 1) for i in range(1, nbar))
    return total + g ** (-(nbar - 1))


def estimation_noise_limit(delta: float, alpha: float) -> float:
    """n̄→∞ 时 N 的极限 α(1+δ)²/((1+δ)²-1)"""
    if delta <= 0:
        raise ValueError(f"delta 必须 > 0，当前: {delta}")
    g = (1.0 + delta) ** 2
    return alpha * g / (g - 1.0)


# ============ 交叉点 ============

def _linear_value(M: int, P: float, alpha: float, weak: bool) -> float:
    if weak:
        return linear_weak_bound(M, P, alpha)
    return linear_exponent(M, P, alpha).exponent


def crossover_alpha(M: int, P: float, weak: bool = False) -> float:
    """
    线性方案与两阶段方案指数曲线的交点

    g(α) = E''(α) - φ(s(α))，α ∈ (0, 1/4]；交点以下线性方案更优，以上两阶段更优。
    weak=True 时线性曲线改用较弱的闭式下界。
    """
    _check_mp(M, P, min_m=3)

    def gap(alpha: float) -> float:
        return _linear_value(M, P, alpha, weak) - two_stage_exponent_at_alpha(M, P, alpha).exponent

    try:
        result = bracket_and_bisect(gap, CROSSOVER_ALPHA_MIN, TWO_STAGE_ALPHA_MAX)
    except ValueError as e:
        raise ValueError(f"M={M}, P={P} 下两条曲线在 (0, 1/4] 内不相交: {e}") from e
    return result.root


@dataclass(frozen=True)
class CrossoverReport:
    """交叉点报告：两种线性表达式分别求根，并与参考标注比较"""
    M: int
    P: float
    strong_alpha: Optional[float]
    strong_exponent: Optional[float]            # 两阶段指数 φ(s(α))
    weak_alpha: Optional[float]
    weak_exponent: Optional[float]
    strong_linear_exponent: Optional[float] = None   # E''(α)
    weak_linear_exponent: Optional[float] = None     # 弱闭式下界
    reference_alpha: float = REFERENCE_CROSSOVER_ALPHA

    def discrepancy(self, weak: bool = False) -> Optional[float]:
        """相对参考标注的相对偏差"""
        value = self.weak_alpha if weak else self.strong_alpha
        if value is None:
            return None
        return (value - self.reference_alpha) / self.reference_alpha


def crossover_report(M: int, P: float) -> CrossoverReport:
    """分别用两种线性表达式求交叉点"""
    _check_mp(M, P, min_m=3)
    found = {}
    for weak in (False, True):
        try:
            alpha = crossover_alpha(M, P, weak=weak)
            found[weak] = (
                alpha,
                two_stage_exponent_at_alpha(M, P, alpha).exponent,
                _linear_value(M, P, alpha, weak),
            )
        except ValueError as e:
            logger.warning(f"交叉点不存在 (weak={weak}): {e}")
            found[weak] = (None, None, None)

    report = CrossoverReport(
        M=M,
        P=P,
        strong_alpha=found[False][0],
        strong_exponent=found[False][1],
        weak_alpha=found[True][0],
        weak_exponent=found[True][1],
        strong_linear_exponent=found[False][2],
        weak_linear_exponent=found[True][2],
    )
    if M == 3 and report.strong_alpha is not None:
        logger.info(
            f"交叉点 α={report.strong_alpha:.6g}，参考标注 {REFERENCE_CROSSOVER_ALPHA:g}，"
            f"相对偏差 {report.discrepancy():+.3%}"
        )
    return report


# ============ 曲线表 ============

def emit_curves(M: int, P: float, alpha_grid: Iterable[float]) -> CurveTable:
    """
    在 α 网格上计算五条曲线

    网格点超出某方案定义域时（两阶段 α > 1/4）该点缺省，而不是报错。
    """
    _check_mp(M, P, min_m=3)
    grid = [float(a) for a in alpha_grid]
    if not grid:
        raise ValueError("alpha 网格不能为空")
    if any(a < 0 for a in grid):
        raise ValueError("alpha 网格必须非负")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("alpha 网格必须严格递增")

    table = CurveTable(M=M, P=P)
    e_inf = exponent_no_feedback(M, P)
    e_zero = exponent_noiseless_feedback(M, P)

    table.rows.extend(ExponentPoint(alpha=a, exponent=e_inf, scheme=Scheme.NO_FEEDBACK) for a in grid)
    table.rows.extend(ExponentPoint(alpha=a, exponent=e_zero, scheme=Scheme.NOISELESS_FEEDBACK) for a in grid)

    skipped = 0
    for a in grid:
        if a > TWO_STAGE_ALPHA_MAX:
            skipped += 1
            continue
        table.rows.append(two_stage_exponent_at_alpha(M, P, a))
    if skipped:
        logger.info(f"{skipped} 个 α 网格点超出两阶段参数族 (α > 1/4)，该处以无反馈基线为准")

    table.rows.extend(linear_exponent(M, P, a) for a in grid)
    # 弱下界是闭式表达，不对应某个 (λ, δ) 调度，参数列留空
    table.rows.extend(
        ExponentPoint(alpha=a, exponent=linear_weak_bound(M, P, a), scheme=Scheme.LINEAR_WEAK_BOUND)
        for a in grid
    )
    return table
