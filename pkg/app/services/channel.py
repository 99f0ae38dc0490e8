# 信道仿真
"""
前向 AWGN 信道 Y = X + Z、带噪反馈链路 Ỹ = Y + Z̃，以及峰值能量约束账本

噪声流使用计数器型 Philox 生成器：key = (stream_id << 64) | seed，
前向噪声、反馈噪声、消息抽样分别取同一密钥下互不重叠的子流（jumped）。
高斯样本由 numpy Generator.standard_normal（ziggurat 算法）生成。
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# 能量账本在边界上的绝对容差
LEDGER_TOL = 1e-9
_UINT64_MAX = (1 << 64) - 1


class EnergyConstraintError(RuntimeError):
    """峰值能量约束被违反（编码器缺陷，从不静默截断）"""


@dataclass(frozen=True)
class ChannelSpec:
    """信道参数：功率 P、码长 n、反馈噪声方差 alpha；前向噪声方差固定为 1"""
    P: float
    n: int
    alpha: float = 0.0

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError(f"P 必须 > 0，当前: {self.P}")
        if self.n < 1:
            raise ValueError(f"n 必须 >= 1，当前: {self.n}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha 必须 >= 0，当前: {self.alpha}")

    @property
    def budget(self) -> float:
        """总能量预算 nP"""
        return self.n * self.P

    def ledger(self, tol: float = LEDGER_TOL) -> "EnergyLedger":
        return EnergyLedger(budget=self.budget, tol=tol)


@dataclass
class EnergyLedger:
    """单次试验的能量账本，spent 始终不超过 budget（含容差）"""
    budget: float
    spent: float = 0.0
    tol: float = LEDGER_TOL

    @property
    def remaining(self) -> float:
        return self.budget - self.spent

    def can_spend(self, energy: float) -> bool:
        return self.spent + energy <= self.budget + self.tol

    def spend(self, energy: float) -> None:
        if energy < 0:
            raise ValueError(f"能量必须 >= 0，当前: {energy}")
        if not self.can_spend(energy):
            raise EnergyConstraintError(
                f"超出峰值能量约束: 已用 {self.spent:.17g} + 本次 {energy:.17g} > 预算 {self.budget:.17g}"
            )
        self.spent += energy


class NoiseSource(Protocol):
    """方案所需的噪声接口"""
    alpha: float

    def forward_noise(self) -> float: ...

    def feedback_noise(self) -> float: ...

    def message(self, M: int) -> int: ...


class NoiseStream:
    """
    单次试验的可复现噪声流

    同一 (seed, stream_id) 无论在哪个 worker、以何种顺序运行都得到相同的实现。
    反馈噪声每次都会抽取（alpha=0 时乘 0 丢弃），使前向噪声序列与 alpha 无关。
    zero_noise=True 为诊断开关：照常抽样但输出置零，消息抽样不受影响。
    """

    def __init__(self, seed: int, stream_id: int, alpha: float = 0.0, zero_noise: bool = False):
        if not 0 <= seed <= _UINT64_MAX:
            raise ValueError(f"seed 必须是 64 位无符号整数，当前: {seed}")
        if not 0 <= stream_id <= _UINT64_MAX:
            raise ValueError(f"stream_id 必须是 64 位无符号整数，当前: {stream_id}")
        if not alpha >= 0:
            raise ValueError(f"alpha 必须 >= 0，当前: {alpha}")

        self.seed = seed
        self.stream_id = stream_id
        self.alpha = float(alpha)
        self.zero_noise = zero_noise
        self._sigma = math.sqrt(self.alpha)

        base = np.random.Philox(key=(stream_id << 64) | seed)
        # 先派生子流再开始抽样
        self._feedback = np.random.Generator(base.jumped(1))
        self._message = np.random.Generator(base.jumped(2))
        self._forward = np.random.Generator(base)

    def forward_noise(self) -> float:
        """Z ~ N(0, 1)"""
        z = float(self._forward.standard_normal())
        return 0.0 if self.zero_noise else z

    def feedback_noise(self) -> float:
        """Z̃ ~ N(0, alpha)"""
        z = self._sigma * float(self._feedback.standard_normal())
        return 0.0 if self.zero_noise else z

    def message(self, M: int) -> int:
        """均匀抽取消息 W ∈ [1:M]"""
        return int(self._message.integers(1, M + 1))


@dataclass
class ScriptedNoise:
    """
    预先给定的噪声序列（白盒测试用）

    序列耗尽后返回 0。
    """
    forward: Sequence[float] = ()
    feedback: Sequence[float] = ()
    alpha: float = 0.0
    w: Optional[int] = None
    _i: int = field(default=0, repr=False)
    _j: int = field(default=0, repr=False)

    def forward_noise(self) -> float:
        value = float(self.forward[self._i]) if self._i < len(self.forward) else 0.0
        self._i += 1
        return value

    def feedback_noise(self) -> float:
        value = float(self.feedback[self._j]) if self._j < len(self.feedback) else 0.0
        self._j += 1
        return value

    def message(self, M: int) -> int:
        return self.w if self.w is not None else 1


def forward(x: float, stream: NoiseSource, ledger: EnergyLedger) -> float:
    """前向信道：记账后返回 x + Z"""
    ledger.spend(x * x)
    return x + stream.forward_noise()


def feedback(y: float, stream: NoiseSource) -> float:
    """反馈链路：返回 y + Z̃；alpha = 0 时逐位等于 y"""
    z = stream.feedback_noise()
    if stream.alpha == 0:
        return y
    return y + z


def forward_vector(x: np.ndarray, stream: NoiseSource, ledger: EnergyLedger) -> np.ndarray:
    """逐坐标经过前向信道"""
    return np.array([forward(float(xi), stream, ledger) for xi in np.asarray(x, dtype=float)])


def feedback_vector(y: np.ndarray, stream: NoiseSource) -> np.ndarray:
    """逐坐标经过反馈链路"""
    return np.array([feedback(float(yi), stream) for yi in np.asarray(y, dtype=float)])
