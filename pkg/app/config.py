# 配置管理模块
"""
使用 pydantic-settings 管理实验室配置

优先级：命令行参数 > JSON 配置文件 > 环境变量/.env > 默认值
"""

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


# 版本信息
VERSION = "1.0.0"


class Settings(BaseSettings):
    """应用配置"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # 应用配置
    app_name: str = "Noisy-Feedback Exponent Lab"
    debug: bool = False
    version: str = VERSION

    # HTTP 服务配置
    host: str = "127.0.0.1"
    port: int = 8001
    # HTTP 接口单次仿真的试验数上限（大规模仿真请走 CLI）
    api_max_trials: int = 200_000

    # 日志配置
    log_level: str = "INFO"

    # 仿真默认值
    default_seed: int = 20100407
    workers: int = 1
    chunk_size: int = 20_000

    # 默认信道参数
    default_M: int = 3
    default_P: float = 1.0


@lru_cache
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()
