# Utils 工具函数
"""
通用工具函数：CSV 浮点格式、完全平方数判断、消息对排序
"""

import math
from typing import Optional, Tuple


# CSV 浮点输出统一使用 17 位有效数字，保证 round-trip 不丢精度
CSV_FLOAT_FORMAT = "%.17g"


def format_float(value: Optional[float]) -> str:
    """格式化浮点数（17 位有效数字），None 输出为空串"""
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return CSV_FLOAT_FORMAT % value


def is_perfect_square(n: int) -> bool:
    """判断 n 是否为正的完全平方数"""
    if n < 1:
        return False
    root = math.isqrt(n)
    return root * root == n


def integer_sqrt(n: int) -> int:
    """
    返回 n̄ = √n

    n 必须是完全平方数（线性方案要求迭代次数为整数），否则直接拒绝而不是取整。
    """
    if not is_perfect_square(n):
        raise ValueError(f"n 必须是完全平方数，当前: {n}")
    return math.isqrt(n)


def ordered_pair(a: int, b: int) -> Tuple[int, int]:
    """返回按索引升序排列的消息对"""
    return (a, b) if a <= b else (b, a)


def half_floor(M: int) -> int:
    """L = ⌊M/2⌋"""
    return M // 2
