# 方案注册表
"""
集中管理“方案名称 -> 方案类”的映射，CLI 与 HTTP 接口按名称构造方案，不直接依赖各方案模块。

新增方案只需在注册表登记（或运行时 register_scheme）；方案类需提供
from_options(M, spec, **overrides) 类方法。
"""

from __future__ import annotations

import importlib
from typing import Any, Dict, Tuple, Type

from app.schemes.base import SimulationScheme
from app.services.channel import ChannelSpec


SCHEME_SPECS: Dict[str, Tuple[str, str]] = {
    "baseline": ("app.schemes.baseline", "BaselineScheme"),
    "two_stage": ("app.schemes.two_stage", "TwoStageScheme"),
    "linear": ("app.schemes.linear", "LinearScheme"),
}


def register_scheme(name: str, module: str, attr: str) -> None:
    """运行时注册/覆盖某个方案（便于扩展与测试）。"""
    key = (name or "").strip()
    if not key:
        raise ValueError("scheme 不能为空")
    if not module or not attr:
        raise ValueError("module/attr 不能为空")
    SCHEME_SPECS[key] = (module, attr)


def load_scheme_class(name: str) -> Type[SimulationScheme]:
    """按名称加载方案类（延迟 import + getattr，兼容 monkeypatch）。"""
    key = (name or "").strip().replace("-", "_")
    spec = SCHEME_SPECS.get(key)
    if not spec:
        raise ValueError(f"未知方案: {name}，可选: {', '.join(list_supported_schemes())}")

    module_name, attr_name = spec
    module = importlib.import_module(module_name)
    cls = getattr(module, attr_name, None)
    if cls is None:
        raise RuntimeError(f"方案类不存在: {module_name}.{attr_name}")
    return cls


def build_scheme(name: str, M: int, spec: ChannelSpec, **overrides: Any) -> SimulationScheme:
    """按名称构造方案实例；值为 None 的覆盖项视为未指定"""
    cls = load_scheme_class(name)
    options = {k: v for k, v in overrides.items() if v is not None}
    return cls.from_options(M, spec, **options)


def list_supported_schemes() -> list[str]:
    """列出当前支持的方案名称。"""
    return sorted(SCHEME_SPECS.keys())
