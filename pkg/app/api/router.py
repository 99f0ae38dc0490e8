# API 主路由
"""
所有 API 路由的汇总注册
"""

from fastapi import APIRouter

from app.api import exponents, simulate

api_router = APIRouter()

# 注册各模块路由
api_router.include_router(exponents.router)
api_router.include_router(simulate.router)
