# API 模块
"""
误差指数曲线、交叉点与小规模仿真的 HTTP 路由
"""
