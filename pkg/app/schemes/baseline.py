# 无反馈单纯形基线
"""
无反馈正则单纯形码 + 最大似然（最近点）译码，作为参考曲线与蒙特卡洛框架的校准锚点
"""

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from app.schemes.base import ErrorEvent, SimulationScheme, Transcript
from app.services.channel import ChannelSpec, NoiseSource, forward_vector
from app.services.exponents import exponent_no_feedback
from app.services.geometry import Constellation, make_simplex, nearest_message
from app.utils.numerics import q_function

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineParams:
    M: int
    energy: float

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M 必须 >= 2，当前: {self.M}")
        if self.energy < 0:
            raise ValueError(f"energy 必须 >= 0，当前: {self.energy}")


class BaselineScheme(SimulationScheme):
    """无反馈基线：整个能量预算 nP 用于一次单纯形发送"""
    name = "baseline"

    def __init__(self, M: int, spec: ChannelSpec):
        super().__init__(M, spec)
        self.params = BaselineParams(M=M, energy=spec.budget)
        self.constellation: Constellation = make_simplex(M, self.params.energy)

    @classmethod
    def from_options(cls, M: int, spec: ChannelSpec, **_: Any) -> "BaselineScheme":
        return cls(M, spec)

    def encode(self, w: int) -> np.ndarray:
        return self.constellation.point(w).copy()

    def decode(self, y: np.ndarray) -> int:
        """最近码字，并列取编号较小者"""
        return nearest_message(y, self.constellation)

    def run_trial(self, w: int, stream: NoiseSource) -> Transcript:
        self.check_message(w)
        ledger = self.spec.ledger()
        y = forward_vector(self.encode(w), stream, ledger)
        w_hat = self.decode(y)
        return Transcript(w=w, w_hat=w_hat, event=None if w_hat == w else ErrorEvent.DECODING)

    def exponent_target(self) -> float:
        return exponent_no_feedback(self.M, self.spec.P)

    def analytic_error_probability(self) -> float:
        """M=2 时精确为 Q(√(nP))；其他 M 没有闭式"""
        if self.M != 2:
            raise ValueError("闭式误差概率仅适用于 M=2")
        return antipodal_error_probability(self.spec.budget)


def antipodal_error_probability(nP: float) -> float:
    """二元对称信号在能量 nP 下的误差概率 Q(√(nP))"""
    if nP < 0:
        raise ValueError(f"nP 必须 >= 0，当前: {nP}")
    return q_function(math.sqrt(nP))
