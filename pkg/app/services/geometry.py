# 星座几何
"""
等能量正则单纯形星座、第一阶段判决/保护区域、特征距离 d1-d6

消息编号统一从 1 开始（w ∈ [1:M]）；内部数组下标从 0 开始。
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import integrate

from app.utils.numerics import bracket_and_bisect, q_function

logger = logging.getLogger(__name__)

# 保护参数 t 的上界 (√3-1)/2，对应 s = 1
T_MAX = (math.sqrt(3.0) - 1.0) / 2.0
# 距离比较的相对容差（用于判定并列）
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Constellation:
    """等能量正则单纯形星座"""
    points: np.ndarray      # 形状 (M, M-1)，第 w-1 行是消息 w 的码字
    energy: float           # 每个码字的平方范数
    M: int

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def pairwise_distance(self) -> float:
        """任意两码字间的欧氏距离 √(2·E·M/(M-1))"""
        return math.sqrt(2.0 * self.energy * self.M / (self.M - 1))

    def point(self, w: int) -> np.ndarray:
        """消息 w（从 1 开始）对应的码字"""
        if not 1 <= w <= self.M:
            raise ValueError(f"消息编号越界: w={w}, M={self.M}")
        return self.points[w - 1]

    def squared_distances(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ValueError(f"观测维度不匹配: 期望 {self.dim}，实际 {y.shape}")
        diff = self.points - y
        return np.einsum("ij,ij->i", diff, diff)

    def tie_eps(self, d2: np.ndarray) -> float:
        """平方距离（或代价）比较的并列容差"""
        return TIE_RTOL * max(float(d2.max()), self.energy, 1.0)

    def distance_eps(self, d2: np.ndarray) -> float:
        """距离比较的并列容差，d2 为平方距离"""
        return TIE_RTOL * math.sqrt(max(float(d2.max()), self.energy, 1.0))


class RegionKind(Enum):
    """第一阶段观测空间划分"""
    PROTECTION = "protection"   # 落入信号保护区 B_w，立即判决
    AMBIGUOUS = "ambiguous"     # 落入 A'_{ww'}，等待第二阶段


@dataclass(frozen=True)
class RegionLabel:
    """区域标签：Protection(w) 或 Ambiguous(w, w')，后者满足 w < w'"""
    kind: RegionKind
    w: int
    w2: Optional[int] = None

    @property
    def is_protection(self) -> bool:
        return self.kind == RegionKind.PROTECTION

    def __str__(self) -> str:
        if self.is_protection:
            return f"B{self.w}"
        return f"A{self.w}_{self.w2}"


@dataclass(frozen=True)
class StageDistances:
    """
    两阶段方案的特征距离

    d1-d6 为 M=3 时的形式；带 p 后缀的是一般 M 下第一阶段距离的缩放形式，
    第二阶段的 d3 与 M 无关（d3p == d3）。d_prime 为 M 元星座的实际两两距离。
    """
    d1: float
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float
    d_prime: float
    d1p: float
    d2p: float
    d3p: float
    d4p: float
    d5p: float
    d6p: float


def make_simplex(M: int, energy: float) -> Constellation:
    """
    构造 M 点正则单纯形

    码字 A(e_w - (1/M)Σe) 投影到与全 1 向量正交的 M-1 维子空间，
    投影基取 Helmert 正交基，因此 M=2 时恰为 {+√E, -√E}。
    """
    if M < 2:
        raise ValueError(f"M 必须 >= 2，当前: {M}")
    if energy < 0:
        raise ValueError(f"energy 必须 >= 0，当前: {energy}")

    # Helmert 基：第 k 行为 (1,...,1,-k,0,...,0)/√(k(k+1))
    basis = np.zeros((M - 1, M))
    for k in range(1, M):
        basis[k - 1, :k] = 1.0
        basis[k - 1, k] = -float(k)
        basis[k - 1] /= math.sqrt(k * (k + 1))

    A = math.sqrt(M * energy / (M - 1))
    points = A * basis.T
    return Constellation(points=points, energy=float(energy), M=M)


def two_most_probable(y: np.ndarray, c: Constellation) -> Tuple[int, int]:
    """
    两个最可能的消息（高斯信道 + 均匀先验下即两个最近码字）

    并列时取编号较小者。返回 (w1, w2)，w1 不比 w2 远。
    """
    d2 = c.squared_distances(y)
    eps = c.tie_eps(d2)

    w1 = _nearest_index(d2, eps)
    rest = d2.copy()
    rest[w1] = np.inf
    w2 = _nearest_index(rest, eps)
    return w1 + 1, w2 + 1


def nearest_message(y: np.ndarray, c: Constellation) -> int:
    """最近码字（最大似然判决），并列取编号较小者"""
    d2 = c.squared_distances(y)
    return _nearest_index(d2, c.tie_eps(d2)) + 1


def _nearest_index(d2: np.ndarray, eps: float) -> int:
    # 距离在容差内视为并列，取最小下标
    best = float(d2.min())
    return int(np.flatnonzero(d2 <= best + eps)[0])


def classify_region(y: np.ndarray, c: Constellation, t: float) -> RegionLabel:
    """
    第一阶段区域判定

    Protection(w)：w 是最近码字，且其余码字两两距离差的绝对值都不超过 t·d'；
    否则 Ambiguous(w1, w2)。所有不等式取闭（<=），并列按编号打破。
    """
    if not -1e-15 <= t <= T_MAX + 1e-12:
        raise ValueError(f"t 必须位于 [0, (√3-1)/2]，当前: {t}")

    d2 = c.squared_distances(y)
    eps = c.tie_eps(d2)
    w1 = _nearest_index(d2, eps)

    others = np.delete(np.sqrt(d2), w1)
    if others.size == 0 or float(others.max() - others.min()) <= t * c.pairwise_distance + c.distance_eps(d2):
        return RegionLabel(kind=RegionKind.PROTECTION, w=w1 + 1)

    rest = d2.copy()
    rest[w1] = np.inf
    w2 = _nearest_index(rest, eps)
    a, b = sorted((w1 + 1, w2 + 1))
    return RegionLabel(kind=RegionKind.AMBIGUOUS, w=a, w2=b)


def protection_margin_t_to_s(t: float) -> float:
    """
    由保护参数 t 求边距参数 s

    在三个相关码字张成的二维面内（外接圆半径取 1，边长 √3）：
    沿码字 a、b 的中垂线从面心出发，找到 |K-x_c| - |K-x_a| = t·√3 的点 K，
    其到面心的距离 r 即 d4/d1，s = 2r。由余弦定理
        r + 1 - √(1 + r² - r) = c,  c = √3·t
    解得 r = c(2-c)/(3-2c)。
    """
    if not 0 <= t <= T_MAX + 1e-12:
        raise ValueError(f"t 必须位于 [0, (√3-1)/2]，当前: {t}")
    c = math.sqrt(3.0) * t
    r = c * (2.0 - c) / (3.0 - 2.0 * c)
    return 2.0 * r


def protection_margin_s_to_t(M: int, s: float, tol: float = 1e-13) -> float:
    """
    由边距参数 s 反解保护参数 t（二分）

    二维面内的几何与 M 无关（任意三个码字构成等边三角形，距离整体按 d' 缩放），
    因此结果只依赖 s。
    """
    if M < 2:
        raise ValueError(f"M 必须 >= 2，当前: {M}")
    if not 0 <= s <= 1:
        raise ValueError(f"s 必须位于 [0, 1]，当前: {s}")
    if s == 0:
        return 0.0

    result = bracket_and_bisect(lambda t: protection_margin_t_to_s(t) - s, 0.0, T_MAX, tol=tol)
    return min(result.root, T_MAX)


def general_m_scale(M: int) -> float:
    """
    一般 M 时第一阶段距离相对 M=3 的缩放因子 √(2M/(3(M-1)))

    与 make_simplex 构造的两两距离 √(2EM/(M-1)) 及一般 M 的指数项 M/(12(M-1)) 一致。
    """
    return math.sqrt(2.0 * M / (3.0 * (M - 1)))


def stage_distances(M: int, lam: float, s: float, total_energy: float) -> StageDistances:
    """两阶段方案的全部特征距离（第一阶段能量 λE，第二阶段能量 (1-λ)E）"""
    if M < 3:
        raise ValueError(f"两阶段方案要求 M >= 3，当前: {M}")
    if not 0 < lam < 1:
        raise ValueError(f"lambda 必须位于 (0, 1)，当前: {lam}")
    if not 0 <= s <= 1:
        raise ValueError(f"s 必须位于 [0, 1]，当前: {s}")
    if total_energy < 0:
        raise ValueError(f"total_energy 必须 >= 0，当前: {total_energy}")

    e1 = lam * total_energy
    d1 = math.sqrt(e1)
    d2 = math.sqrt(3.0 * e1)
    d3 = math.sqrt(4.0 * (1.0 - lam) * total_energy)
    d4 = 0.5 * s * d1
    d5 = math.sqrt(d1 * d1 + d4 * d4 - d1 * d4)
    d6 = 0.5 * math.sqrt(3.0) * d4

    k = general_m_scale(M)
    return StageDistances(
        d1=d1, d2=d2, d3=d3, d4=d4, d5=d5, d6=d6,
        d_prime=math.sqrt(2.0 * e1 * M / (M - 1)),
        d1p=d1 * k, d2p=d2 * k, d3p=d3, d4p=d4 * k, d5p=d5 * k, d6p=d6 * k,
    )


def wedge_probability(center: np.ndarray, theta_lo: float, theta_hi: float) -> float:
    """
    二维标准高斯 N(center, I) 落入顶点在原点、角度区间 [theta_lo, theta_hi] 的楔形的概率

    对半径解析积分后剩一维角度积分：
        (1/2π)∫ [e^{-R²/2} + a√(2π) e^{(a²-R²)/2} Φ(a)] dθ,  a = <center, u(θ)>
    """
    center = np.asarray(center, dtype=float)
    if center.shape != (2,):
        raise ValueError("楔形概率仅适用于二维")
    r2 = float(center @ center)

    def integrand(theta: float) -> float:
        a = center[0] * math.cos(theta) + center[1] * math.sin(theta)
        phi = q_function(-a)
        return (math.exp(-0.5 * r2) + a * math.sqrt(2.0 * math.pi) * math.exp(0.5 * (a * a - r2)) * phi) / (2.0 * math.pi)

    value, _ = integrate.quad(integrand, theta_lo, theta_hi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return float(value)


def opposite_wedge_probability(c: Constellation, w: int) -> float:
    """
    M=3 时发送 w、第一阶段观测落入 A_{w'w''}（w 最远）的精确概率

    A_{w'w''} 是以 -x(w) 方向为轴、半角 60° 的楔形，顶点在原点。
    """
    if c.M != 3:
        raise ValueError("楔形积分仅对 M=3 成立")
    x = c.point(w)
    axis = math.atan2(-x[1], -x[0])
    return wedge_probability(x, axis - math.pi / 3.0, axis + math.pi / 3.0)
