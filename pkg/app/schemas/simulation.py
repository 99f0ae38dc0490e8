# 仿真数据模型
"""
实验配置与蒙特卡洛结果的 Pydantic 数据模型
"""

import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemes.registry import list_supported_schemes


class ExperimentConfig(BaseModel):
    """一次实验的完整配置（CLI 的 JSON 配置文件与 HTTP 请求体共用）"""
    scheme: str = Field(default="two_stage", description="方案：baseline / two_stage / linear")
    M: int = Field(default=3, ge=2, description="消息数")
    P: float = Field(default=1.0, gt=0, description="每次信道使用的功率")
    alpha: float = Field(default=0.0, ge=0, description="反馈噪声方差")
    n: Optional[int] = Field(default=None, ge=1, description="码长（线性方案须为完全平方数）")
    nP: Optional[float] = Field(default=None, gt=0, description="总能量；给出时 n = nP/P")
    n_grid: Optional[List[int]] = Field(default=None, description="拟合经验指数的 n 网格")
    alpha_grid: Optional[List[float]] = Field(default=None, description="解析曲线的 α 网格")
    lam: Optional[float] = Field(default=None, gt=0, lt=1, description="λ 覆盖值")
    s: Optional[float] = Field(default=None, ge=0, le=1, description="两阶段保护边距 s 覆盖值")
    delta: Optional[float] = Field(default=None, gt=0, description="线性方案 δ 覆盖值")
    schedule: Optional[str] = Field(default=None, description="线性方案调度：noisy / noise_free")
    trials: int = Field(default=10_000, ge=1, description="每个网格点的试验次数")
    seed: Optional[int] = Field(default=None, ge=0, lt=2 ** 64, description="随机种子（缺省取 DEFAULT_SEED）")
    workers: Optional[int] = Field(default=None, ge=1, description="并行进程数（不影响结果）")
    output: Optional[str] = Field(default=None, description="输出 CSV 路径，缺省写到 stdout")
    zero_noise: bool = Field(default=False, description="诊断开关：所有噪声置零")

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.scheme.replace("-", "_") not in list_supported_schemes():
            raise ValueError(f"未知方案: {self.scheme}")
        self.scheme = self.scheme.replace("-", "_")
        if self.schedule is not None and self.schedule not in ("noisy", "noise_free"):
            raise ValueError(f"schedule 只能是 noisy 或 noise_free，当前: {self.schedule}")
        if self.nP is not None:
            n = self.nP / self.P
            if self.n is None:
                if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
                    raise ValueError(f"nP/P 必须是正整数: nP={self.nP}, P={self.P}")
                self.n = int(round(n))
            elif not math.isclose(self.n * self.P, self.nP, rel_tol=1e-12):
                raise ValueError(f"n·P 与 nP 不一致: n={self.n}, P={self.P}, nP={self.nP}")
        return self

    def resolved_n(self) -> int:
        if self.n is None:
            raise ValueError("必须给出 n 或 nP")
        return self.n


class ErrorEstimateResponse(BaseModel):
    """误差概率估计"""
    scheme: str = Field(description="方案")
    M: int = Field(description="消息数")
    P: float = Field(description="功率")
    alpha: float = Field(description="反馈噪声方差")
    n: int = Field(description="码长")
    seed: int = Field(description="随机种子")
    trials: int = Field(description="试验次数")
    errors: int = Field(description="错误次数")
    p_hat: float = Field(description="误差概率估计")
    ci_low: float = Field(description="95% Clopper-Pearson 下界")
    ci_high: float = Field(description="95% Clopper-Pearson 上界")
    event_counts: Dict[str, int] = Field(default_factory=dict, description="各错误事件计数")
    analytic_bound: Optional[float] = Field(default=None, description="方案的解析误差上界（若有）")
