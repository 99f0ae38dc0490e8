# 误差指数数据模型
"""
解析曲线与交叉点的 Pydantic 数据模型
"""

from typing import List, Optional

from pydantic import BaseModel, Field


class ExponentPointResponse(BaseModel):
    """曲线上的一个点"""
    scheme: str = Field(description="曲线类别")
    alpha: float = Field(description="反馈噪声方差")
    exponent: float = Field(description="误差指数（nats）")
    s: Optional[float] = Field(default=None, description="两阶段保护边距 s")
    lam: Optional[float] = Field(default=None, description="λ")
    delta: Optional[float] = Field(default=None, description="线性方案 δ")


class CurveTableResponse(BaseModel):
    """五条曲线"""
    M: int = Field(description="消息数")
    P: float = Field(description="功率")
    rows: List[ExponentPointResponse] = Field(default_factory=list, description="曲线点")


class CrossoverResponse(BaseModel):
    """交叉点报告"""
    M: int = Field(description="消息数")
    P: float = Field(description="功率")
    strong_alpha: Optional[float] = Field(default=None, description="精确线性指数下的交叉点")
    strong_exponent: Optional[float] = Field(default=None, description="交叉点处的两阶段方案指数")
    weak_alpha: Optional[float] = Field(default=None, description="弱闭式下界下的交叉点")
    weak_exponent: Optional[float] = Field(default=None, description="交叉点处的两阶段方案指数")
    strong_linear_exponent: Optional[float] = Field(default=None, description="精确交叉点处的线性方案指数 E''")
    weak_linear_exponent: Optional[float] = Field(default=None, description="弱交叉点处的线性方案弱下界")
    reference_alpha: float = Field(description="参考曲线图标注的交叉点")
    discrepancy: Optional[float] = Field(default=None, description="精确交叉点相对参考标注的相对偏差")
