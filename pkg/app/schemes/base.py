# 编码方案基类
"""
所有仿真方案共享的接口：单次试验 run_trial、试验记录 Transcript、错误事件标签
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional

from app.services.channel import ChannelSpec, NoiseSource

logger = logging.getLogger(__name__)


class ErrorEvent(str, Enum):
    """错误事件标签"""
    E1 = "E1"                           # 第一阶段：提前误判或译码器候选对不含 w
    MISCOORDINATION = "Etilde"          # 编码器与译码器候选对不一致
    E2 = "E2"                           # 候选对一致且含 w，第二阶段误判
    ESTIMATION = "Estimation"           # 线性方案：约束未触发，估计误差过大
    BUDGET = "BudgetBound"              # 线性方案：能量约束提前截断 (η < n̄)
    DECODING = "Decoding"               # 无反馈基线的最近点误判


@dataclass
class Transcript:
    """单次试验记录"""
    w: int
    w_hat: int
    event: Optional[ErrorEvent]

    @property
    def is_error(self) -> bool:
        return self.w_hat != self.w

    def to_row(self, trial: int) -> Dict[str, Any]:
        return {"trial": trial, "w": self.w, "what": self.w_hat}


class SimulationScheme(ABC):
    """
    仿真方案

    实例在参数确定后不可变，可在进程间传递；单次试验的状态只存在于 run_trial 内部。
    """
    name: ClassVar[str] = ""
    transcript_columns: ClassVar[List[str]] = ["trial", "w", "what"]

    def __init__(self, M: int, spec: ChannelSpec):
        if M < 2:
            raise ValueError(f"M 必须 >= 2，当前: {M}")
        self.M = M
        self.spec = spec

    @abstractmethod
    def run_trial(self, w: int, stream: NoiseSource) -> Transcript:
        """发送消息 w 并完成一次编译码"""

    def exponent_target(self) -> Optional[float]:
        """该方案在当前参数下的渐近误差指数，没有解析值时为 None"""
        return None

    def check_message(self, w: int) -> None:
        if not 1 <= w <= self.M:
            raise ValueError(f"消息编号越界: w={w}, M={self.M}")

    def describe(self) -> Dict[str, Any]:
        """结果 CSV 中的方案参数列"""
        return {
            "scheme": self.name,
            "M": self.M,
            "P": self.spec.P,
            "alpha": self.spec.alpha,
            "n": self.spec.n,
        }
