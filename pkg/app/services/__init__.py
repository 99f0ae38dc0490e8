# Services 模块
"""
数值服务：星座几何、误差指数、信道仿真、蒙特卡洛编排、验收套件
"""
