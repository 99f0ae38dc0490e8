"""
pytest 全局配置：

- 固定默认种子、单进程执行，保证用例可重复；
- 每个用例前后清空 get_settings 缓存，monkeypatch 的环境变量才能生效。
"""

import os

import pytest

os.environ.setdefault("DEFAULT_SEED", "12345")
os.environ.setdefault("WORKERS", "1")
os.environ.setdefault("LOG_LEVEL", "WARNING")


@pytest.fixture(autouse=True)
def _reset_settings_cache():
    from app.config import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def seed() -> int:
    return 12345
