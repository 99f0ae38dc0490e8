# Utils 模块
"""
工具函数与标量数值核
"""
