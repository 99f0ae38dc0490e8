# Noisy-Feedback Exponent Lab
"""
带噪反馈 AWGN 信道误差指数实验：解析曲线、蒙特卡洛仿真、验收套件
"""

__version__ = "1.0.0"
