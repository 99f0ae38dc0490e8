# Schemes 模块
"""
编码方案：无反馈单纯形基线、两阶段带噪反馈方案、线性带噪反馈方案
"""

from app.schemes.base import ErrorEvent, SimulationScheme, Transcript
from app.schemes.registry import build_scheme, list_supported_schemes, load_scheme_class

__all__ = [
    "ErrorEvent",
    "SimulationScheme",
    "Transcript",
    "build_scheme",
    "list_supported_schemes",
    "load_scheme_class",
]
