# 线性带噪反馈方案
"""
首次发送 PAM 点 X1(w)，之后每次发送 (1+δ)·(ỹ_{i-1} - x_{i-1})，即编码器从反馈中
得到的新息，直到能量账本不再允许（停时 η），此后输入为 0。
译码器以交错符号几何加权和估计 X1，再取最近 PAM 点。

两种调度：
- noisy：δ(α)、λ(α) 最优参数，首发幅度 √(λnP)
- noise_free：δ(n) = ln(4nL²)/(2n̄)，首发幅度 √P
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from app.schemes.base import ErrorEvent, SimulationScheme, Transcript
from app.services.channel import ChannelSpec, NoiseSource, feedback, forward
from app.services.exponents import (
    estimation_noise,
    exponent_noiseless_feedback,
    linear_exponent,
    optimal_linear_params,
    pinsker_delta,
)
from app.utils.helpers import format_float, half_floor, integer_sqrt
from app.utils.numerics import chi_square_tail_bound, q_function

logger = logging.getLogger(__name__)


class ScheduleMode(str, Enum):
    NOISY = "noisy"
    NOISE_FREE = "noise_free"


@dataclass(frozen=True)
class LinearParams:
    """线性方案参数；noisy 调度需要 lam，noise_free 调度的首发幅度固定为 √P"""
    M: int
    nbar: int
    delta: float
    mode: ScheduleMode = ScheduleMode.NOISY
    lam: Optional[float] = None

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"M 必须 >= 2，当前: {self.M}")
        if self.nbar < 1:
            raise ValueError(f"nbar 必须 >= 1，当前: {self.nbar}")
        if not self.delta > 0:
            raise ValueError(f"delta 必须 > 0，当前: {self.delta}")
        if self.mode == ScheduleMode.NOISY:
            if self.lam is None or not 0 < self.lam < 1:
                raise ValueError(f"noisy 调度要求 lambda ∈ (0, 1)，当前: {self.lam}")

    @property
    def L(self) -> int:
        return half_floor(self.M)

    @property
    def n(self) -> int:
        return self.nbar * self.nbar

    def amplitude(self, P: float) -> float:
        """PAM 首发幅度"""
        if self.mode == ScheduleMode.NOISE_FREE:
            return math.sqrt(P)
        return math.sqrt(self.lam * self.n * P)


@dataclass
class LinearTranscript(Transcript):
    """线性方案单次试验记录；x、y、ỹ 均为长度 n̄ 的序列"""
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    yt: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eta: int = 0
    xhat1: float = 0.0

    @property
    def budget_bound(self) -> bool:
        """能量约束是否提前截断 (η < n̄)"""
        return self.eta < len(self.x)

    def to_row(self, trial: int) -> Dict[str, Any]:
        return {
            "trial": trial,
            "w": self.w,
            "eta": self.eta,
            "xhat1": format_float(self.xhat1),
            "what": self.w_hat,
            "budget_bound": int(self.budget_bound),
        }


def pam_point(w: int, M: int, amplitude: float) -> float:
    """
    PAM 星座点

    M = 2L+1：((L+1-w)/L)·amplitude；M = 2L：((L+1/2-w)/L)·amplitude。相邻间距 amplitude/L。
    """
    if M < 2:
        raise ValueError(f"M 必须 >= 2，当前: {M}")
    if not 1 <= w <= M:
        raise ValueError(f"消息编号越界: w={w}, M={M}")
    if amplitude < 0:
        raise ValueError(f"amplitude 必须 >= 0，当前: {amplitude}")
    L = half_floor(M)
    offset = L + 1.0 if M % 2 else L + 0.5
    return (offset - w) / L * amplitude


def noise_free_schedule(M: int, n: int) -> LinearParams:
    """无噪反馈调度：幅度 √P，δ(n) = ln(4nL²)/(2n̄)"""
    nbar = integer_sqrt(n)
    return LinearParams(M=M, nbar=nbar, delta=pinsker_delta(M, n), mode=ScheduleMode.NOISE_FREE)


def noisy_schedule(M: int, n: int, alpha: float) -> LinearParams:
    """带噪反馈调度：α 下最优的 (δ, λ)，幅度 √(λnP)"""
    nbar = integer_sqrt(n)
    if alpha <= 0:
        raise ValueError("alpha = 0 时请使用 noise_free_schedule")
    delta, lam = optimal_linear_params(M, alpha)
    return LinearParams(M=M, nbar=nbar, delta=delta, mode=ScheduleMode.NOISY, lam=lam)


class LinearScheme(SimulationScheme):
    """线性带噪反馈编译码器，共 n̄ = √n 次信道使用"""
    name = "linear"
    transcript_columns = ["trial", "w", "eta", "xhat1", "what", "budget_bound"]

    def __init__(self, params: LinearParams, spec: ChannelSpec):
        super().__init__(params.M, spec)
        if params.n != spec.n:
            raise ValueError(f"n 必须等于 n̄²: n={spec.n}, n̄={params.nbar}")
        self.params = params
        self.amplitude = params.amplitude(spec.P)
        if self.amplitude ** 2 > spec.budget:
            raise ValueError(f"首发能量 {self.amplitude ** 2} 超过预算 {spec.budget}")
        self._points = np.array([pam_point(w, self.M, self.amplitude) for w in range(1, self.M + 1)])
        # 交错符号几何权重 (-1)^{i-1}/(1+δ)^{i-1}
        i = np.arange(params.nbar)
        self._weights = (-1.0) ** i / (1.0 + params.delta) ** i

    @classmethod
    def from_options(
        cls,
        M: int,
        spec: ChannelSpec,
        lam: Optional[float] = None,
        delta: Optional[float] = None,
        schedule: Optional[str] = None,
        **_: Any,
    ) -> "LinearScheme":
        """
        未指定调度时：alpha > 0 取 noisy，alpha = 0 取 noise_free。
        lam、delta 覆盖所选调度的对应参数。
        """
        mode = ScheduleMode(schedule) if schedule else (
            ScheduleMode.NOISY if spec.alpha > 0 else ScheduleMode.NOISE_FREE
        )
        if mode == ScheduleMode.NOISE_FREE:
            base = noise_free_schedule(M, spec.n)
        elif spec.alpha > 0:
            base = noisy_schedule(M, spec.n, spec.alpha)
        else:
            if lam is None or delta is None:
                raise ValueError("alpha = 0 时 noisy 调度需要显式给出 lambda 与 delta")
            base = LinearParams(M=M, nbar=integer_sqrt(spec.n), delta=delta, lam=lam)
        params = LinearParams(
            M=M,
            nbar=base.nbar,
            delta=delta if delta is not None else base.delta,
            mode=mode,
            lam=(lam if lam is not None else base.lam) if mode == ScheduleMode.NOISY else None,
        )
        return cls(params, spec)

    def pam_point(self, w: int) -> float:
        return float(self._points[w - 1])

    def encode(self, w: int, stream: NoiseSource) -> LinearTranscript:
        """逐次发送并记录 x、y、ỹ；每一步都抽取反馈噪声，噪声消耗与 η 无关"""
        self.check_message(w)
        nbar = self.params.nbar
        gain = 1.0 + self.params.delta
        ledger = self.spec.ledger()

        x = np.zeros(nbar)
        y = np.zeros(nbar)
        yt = np.zeros(nbar)

        x[0] = self.pam_point(w)
        y[0] = forward(x[0], stream, ledger)
        yt[0] = feedback(y[0], stream)
        eta = 1
        active = True

        for i in range(1, nbar):
            if active:
                candidate = gain * (yt[i - 1] - x[i - 1])
                if ledger.can_spend(candidate * candidate):
                    x[i] = candidate
                    eta = i + 1
                else:
                    active = False
            y[i] = forward(x[i], stream, ledger)
            yt[i] = feedback(y[i], stream)

        return LinearTranscript(w=w, w_hat=0, event=None, x=x, y=y, yt=yt, eta=eta)

    def estimate(self, y: np.ndarray) -> float:
        """x̂1 = Σ (-1)^{i-1} y_i / (1+δ)^{i-1}"""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.params.nbar,):
            raise ValueError(f"观测长度必须为 n̄={self.params.nbar}，当前: {y.shape}")
        return float(self._weights @ y)

    def decode(self, y: np.ndarray) -> Tuple[float, int]:
        """返回 (x̂1, ŵ)，ŵ 为最近 PAM 点，并列取编号较小者"""
        xhat1 = self.estimate(y)
        dist = np.abs(self._points - xhat1)
        eps = 1e-12 * max(self.amplitude, 1.0)
        w_hat = int(np.flatnonzero(dist <= dist.min() + eps)[0]) + 1
        return xhat1, w_hat

    def run_trial(self, w: int, stream: NoiseSource) -> LinearTranscript:
        transcript = self.encode(w, stream)
        xhat1, w_hat = self.decode(transcript.y)
        transcript.xhat1 = xhat1
        transcript.w_hat = w_hat
        if w_hat != w:
            transcript.event = ErrorEvent.BUDGET if transcript.budget_bound else ErrorEvent.ESTIMATION
        return transcript

    def virtual_estimate(self, transcript: LinearTranscript) -> float:
        """
        虚拟发送下的估计（白盒校验用）

            x̂1' = X1 + (-1)^{n̄-1} z_{n̄}/(1+δ)^{n̄-1} + Σ_{i=1}^{n̄-1} (-1)^i z̃_i/(1+δ)^{i-1}

        z = y - x，z̃ = ỹ - y。η = n̄ 时与 decode 的 x̂1 相等。
        """
        nbar = self.params.nbar
        gain = 1.0 + self.params.delta
        z = transcript.y - transcript.x
        zt = transcript.yt - transcript.y

        value = transcript.x[0] + (-1.0) ** (nbar - 1) * z[nbar - 1] / gain ** (nbar - 1)
        for i in range(1, nbar):
            value += (-1.0) ** i * zt[i - 1] / gain ** (i - 1)
        return float(value)

    def error_bounds(self) -> Tuple[float, float]:
        """
        (P1 上界, P2 上界)

        P1：约束未触发时估计误差越过判决门限，2Q(amplitude/(2L√N))；
        P2：能量约束提前截断，χ²_{n̄-1} 尾概率上界，参数为 (nP - amplitude²)/((1+δ)²(1+α))，
        参数小于自由度时上界取 1。
        """
        p = self.params
        N = estimation_noise(p.nbar, p.delta, self.spec.alpha)
        p1 = min(1.0, 2.0 * q_function(self.amplitude / (2.0 * p.L * math.sqrt(N))))

        if p.nbar < 2:
            return p1, 0.0
        k = p.nbar - 1
        arg = (self.spec.budget - self.amplitude ** 2) / ((1.0 + p.delta) ** 2 * (1.0 + self.spec.alpha))
        p2 = 1.0 if arg < k else min(1.0, chi_square_tail_bound(k, arg))
        return p1, p2

    def exponent_target(self) -> Optional[float]:
        """noisy 调度为 E''_M(α)；noise_free 调度仅在 α = 0 时给出 P/2"""
        if self.params.mode == ScheduleMode.NOISY:
            return linear_exponent(self.M, self.spec.P, self.spec.alpha).exponent
        if self.spec.alpha == 0:
            return exponent_noiseless_feedback(self.M, self.spec.P)
        return None

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info.update({
            "schedule": self.params.mode.value,
            "lambda": format_float(self.params.lam),
            "delta": format_float(self.params.delta),
        })
        return info
