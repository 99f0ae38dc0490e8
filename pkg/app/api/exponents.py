# 误差指数API
"""
解析曲线与交叉点
"""

import logging
from typing import Optional

import numpy as np
from fastapi import APIRouter, HTTPException, Query

from app.config import get_settings
from app.schemas.common import Response
from app.schemas.exponents import CrossoverResponse, CurveTableResponse, ExponentPointResponse
from app.services import exponents as ex

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/exponents", tags=["误差指数"])


@router.get("/curves", response_model=Response[CurveTableResponse])
async def get_curves(
    M: Optional[int] = Query(default=None, description="消息数（>= 3）"),
    P: Optional[float] = Query(default=None, description="功率"),
    alpha_max: float = Query(default=0.25, gt=0, description="α 网格上界"),
    points: int = Query(default=26, ge=2, le=2001, description="α 网格点数"),
):
    """五条解析曲线：NoFeedback、NoiselessFeedback、TwoStage、Linear、LinearWeakBound"""
    settings = get_settings()
    M = settings.default_M if M is None else M
    P = settings.default_P if P is None else P
    try:
        table = ex.emit_curves(M, P, np.linspace(0.0, alpha_max, points).tolist())
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return Response(data=CurveTableResponse(
        M=table.M,
        P=table.P,
        rows=[
            ExponentPointResponse(
                scheme=r.scheme.value, alpha=r.alpha, exponent=r.exponent, s=r.s, lam=r.lam, delta=r.delta
            )
            for r in table.rows
        ],
    ))


@router.get("/crossover", response_model=Response[CrossoverResponse])
async def get_crossover(
    M: Optional[int] = Query(default=None, description="消息数（>= 3）"),
    P: Optional[float] = Query(default=None, description="功率"),
):
    """线性方案与两阶段方案的交叉点，附参考标注"""
    settings = get_settings()
    M = settings.default_M if M is None else M
    P = settings.default_P if P is None else P
    try:
        report = ex.crossover_report(M, P)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    return Response(data=CrossoverResponse(
        M=report.M,
        P=report.P,
        strong_alpha=report.strong_alpha,
        strong_exponent=report.strong_exponent,
        weak_alpha=report.weak_alpha,
        weak_exponent=report.weak_exponent,
        strong_linear_exponent=report.strong_linear_exponent,
        weak_linear_exponent=report.weak_linear_exponent,
        reference_alpha=report.reference_alpha,
        discrepancy=report.discrepancy(),
    ))
