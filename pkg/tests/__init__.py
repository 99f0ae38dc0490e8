# Tests 模块
"""
数值核、方案、蒙特卡洛、CLI 与 HTTP 接口的测试
"""
