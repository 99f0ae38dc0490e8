# 仿真API
"""
小规模蒙特卡洛仿真（试验数受 api_max_trials 限制，大规模实验请使用 CLI）
"""

import asyncio
import logging

from fastapi import APIRouter, HTTPException

from app.config import get_settings
from app.schemas.common import Response
from app.schemas.simulation import ErrorEstimateResponse, ExperimentConfig
from app.services import simulation_service
from app.services.channel import EnergyConstraintError

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/simulate", tags=["仿真"])


@router.post("", response_model=Response[ErrorEstimateResponse])
async def simulate(config: ExperimentConfig):
    """单点仿真，返回误差概率估计与解析上界"""
    settings = get_settings()
    if config.trials > settings.api_max_trials:
        raise HTTPException(
            status_code=400,
            detail=f"trials 超过上限 {settings.api_max_trials}，当前: {config.trials}",
        )
    if config.n is None:
        raise HTTPException(status_code=400, detail="必须给出 n 或 nP")

    # HTTP 请求在当前进程内执行
    config = config.model_copy(update={"workers": 1})
    try:
        outcome = await asyncio.to_thread(simulation_service.simulate, config)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except EnergyConstraintError as e:
        logger.error(f"内部约束被违反: {e}")
        raise HTTPException(status_code=500, detail=str(e))

    scheme, est = outcome.scheme, outcome.estimate
    return Response(data=ErrorEstimateResponse(
        scheme=scheme.name,
        M=scheme.M,
        P=scheme.spec.P,
        alpha=scheme.spec.alpha,
        n=scheme.spec.n,
        seed=outcome.seed,
        trials=est.trials,
        errors=est.errors,
        p_hat=est.p_hat,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        event_counts=est.event_counts,
        analytic_bound=outcome.analytic_bound,
    ))
