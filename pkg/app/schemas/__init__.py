# Schemas 模块
"""
曲线、交叉点、实验配置与误差估计的 Pydantic 模型
"""
