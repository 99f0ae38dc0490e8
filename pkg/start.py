#!/usr/bin/env python
"""
启动 HTTP 服务

    python start.py            # 按 .env / 环境变量中的 HOST、PORT 启动
    python start.py --reload   # 开发模式
"""

import sys

import uvicorn

from app.config import get_settings


def main() -> None:
    settings = get_settings()
    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload="--reload" in sys.argv[1:],
        log_level=settings.log_level.lower(),
    )


if __name__ == "__main__":
    main()
