# 标量数值核
"""
高斯尾函数 Q(x)、指数上界、卡方尾概率上界、区间二分求根

全部为无状态纯函数，可被任意数量的 worker 并发调用。
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

# 二分求根默认容差（自变量绝对误差）
DEFAULT_ROOT_TOL = 1e-12
# 二分最大迭代次数（双精度下 [0, 1e6] 区间 80 次已足够）
MAX_BISECT_ITER = 200

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class BracketedRoot:
    """二分求根结果"""
    lo: float           # 最终区间左端
    hi: float           # 最终区间右端
    root: float         # 根的估计值
    residual: float     # f(root)


def q_function(x: float) -> float:
    """
    标准高斯上尾概率 Q(x) = P{Z > x}

    x >= 0 时使用缩放互补误差函数 erfcx 计算，避免大 x 下的精度损失；
    x < 0 时 erfc 的值落在 (1, 2)，直接计算不存在抵消误差。
    """
    if not math.isfinite(x):
        raise ValueError(f"x 必须是有限值，当前: {x}")
    if x >= 0:
        u = x / _SQRT2
        return float(0.5 * special.erfcx(u) * math.exp(-u * u))
    return float(0.5 * special.erfc(x / _SQRT2))


def q_exponential_bound(x: float) -> float:
    """Q(x) 的指数上界 (1/2)exp(-x²/2)，仅对 x >= 0 成立"""
    if x < 0:
        raise ValueError(f"指数上界仅对 x >= 0 成立，当前: {x}")
    return 0.5 * math.exp(-0.5 * x * x)


def chi_square_tail_bound(k: int, x: float) -> float:
    """
    自由度为 k 的卡方变量尾概率上界

        P{χ²_k > x} <= exp(-x/2 + (k/2)·ln(e·x/k)),  k >= 1, x >= k
    """
    if k < 1:
        raise ValueError(f"自由度 k 必须 >= 1，当前: {k}")
    if x < k:
        raise ValueError(f"上界仅在 x >= k 时成立，当前 k={k}, x={x}")
    return math.exp(-0.5 * x + 0.5 * k * math.log(math.e * x / k))


def bracket_and_bisect(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_ROOT_TOL,
) -> BracketedRoot:
    """
    在 [lo, hi] 上二分求单调函数的根

    要求 f(lo) 与 f(hi) 异号（允许端点恰为根）。区间宽度收缩到 tol 以下后返回。
    """
    if tol <= 0:
        raise ValueError(f"tol 必须 > 0，当前: {tol}")
    if lo > hi:
        lo, hi = hi, lo

    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0:
        return BracketedRoot(lo=lo, hi=lo, root=lo, residual=0.0)
    if f_hi == 0:
        return BracketedRoot(lo=hi, hi=hi, root=hi, residual=0.0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(
            f"区间 [{lo}, {hi}] 内没有变号: f(lo)={f_lo}, f(hi)={f_hi}"
        )

    for _ in range(MAX_BISECT_ITER):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # 已到浮点分辨率
            break
        f_mid = f(mid)
        if f_mid == 0:
            return BracketedRoot(lo=mid, hi=mid, root=mid, residual=0.0)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    root = 0.5 * (lo + hi)
    return BracketedRoot(lo=lo, hi=hi, root=root, residual=f(root))
