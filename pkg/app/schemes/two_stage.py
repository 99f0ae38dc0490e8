# 两阶段带噪反馈方案
"""
第一阶段发送 M 点单纯形（能量 λnP），译码器若观测落入信号保护区则立即判决；
否则编码器依据带噪反馈选出两个最可能的消息，第二阶段对这两个消息做二元对称发送（能量 (1-λ)nP）。

每次试验记录编码器/译码器的候选对并归因错误事件：E1、失配 Ẽ、E2。
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from app.schemes.base import ErrorEvent, SimulationScheme, Transcript
from app.services.channel import ChannelSpec, NoiseSource, feedback_vector, forward, forward_vector
from app.services.exponents import (
    TWO_STAGE_ALPHA_MAX,
    lambda_star,
    s_for_alpha,
    two_stage_schedule_exponent,
)
from app.services.geometry import (
    Constellation,
    RegionLabel,
    classify_region,
    make_simplex,
    opposite_wedge_probability,
    protection_margin_s_to_t,
    stage_distances,
    two_most_probable,
)
from app.utils.helpers import format_float, ordered_pair
from app.utils.numerics import q_function

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


@dataclass(frozen=True)
class TwoStageParams:
    """两阶段方案参数：M、第一阶段能量占比 lam、保护边距 s"""
    M: int
    lam: float
    s: float

    def __post_init__(self):
        if self.M < 3:
            raise ValueError(f"两阶段方案要求 M >= 3，当前: {self.M}")
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda 必须位于 (0, 1)，当前: {self.lam}")
        if not 0 <= self.s <= 1:
            raise ValueError(f"s 必须位于 [0, 1]，当前: {self.s}")

    @property
    def t(self) -> float:
        """保护区参数 t = t(s)"""
        return protection_margin_s_to_t(self.M, self.s)

    @classmethod
    def optimal(cls, M: int, alpha: float) -> "TwoStageParams":
        """α 下的最优调度 (λ*(s), s)，s = s(α)"""
        if alpha >= TWO_STAGE_ALPHA_MAX:
            raise ValueError(
                f"alpha={alpha} >= 1/4 时 λ* = 1，方案退化为无反馈单纯形码，请改用 baseline"
            )
        s = s_for_alpha(alpha)
        return cls(M=M, lam=lambda_star(M, s), s=s)

    @classmethod
    def noise_free(cls, M: int = 3) -> "TwoStageParams":
        """无噪反馈方案：s = 0，λ = λ*(0)（M=3 时为 4/5）"""
        return cls(M=M, lam=lambda_star(M, 0.0), s=0.0)


@dataclass
class TwoStageTranscript(Transcript):
    """两阶段方案单次试验记录"""
    encoder_pair: Pair = (0, 0)
    early: bool = False
    region: Optional[RegionLabel] = None
    decoder_pair: Optional[Pair] = None
    spent: float = 0.0

    def to_row(self, trial: int) -> Dict[str, Any]:
        wh1, wh2 = self.decoder_pair if self.decoder_pair else ("", "")
        return {
            "trial": trial,
            "w": self.w,
            "wt1": self.encoder_pair[0],
            "wt2": self.encoder_pair[1],
            "early": int(self.early),
            "region": str(self.region) if self.region else "",
            "wh1": wh1,
            "wh2": wh2,
            "what": self.w_hat,
            "event": self.event.value if self.event else "",
        }


@dataclass(frozen=True)
class DecodeResult:
    w_hat: int
    early: bool
    region: RegionLabel
    pair: Optional[Pair]


@dataclass(frozen=True)
class EventBounds:
    """三类错误事件的解析上界"""
    e1: float
    etilde: float
    e2: float

    @property
    def total(self) -> float:
        return self.e1 + self.etilde + self.e2


def attribute_event(
    w: int, w_hat: int, early: bool, decoder_pair: Optional[Pair], encoder_pair: Pair
) -> Optional[ErrorEvent]:
    """错误事件归因，仅在 ŵ ≠ w 时给出标签"""
    if w_hat == w:
        return None
    if early or decoder_pair is None or w not in decoder_pair:
        return ErrorEvent.E1
    if set(decoder_pair) != set(encoder_pair):
        return ErrorEvent.MISCOORDINATION
    return ErrorEvent.E2


class TwoStageScheme(SimulationScheme):
    """
    两阶段带噪反馈编译码器

    第一阶段占用 M-1 次信道使用，第二阶段 1 次，与 n 无关。
    编码器不使用保护区，始终依据 ỹ 选出候选对。
    """
    name = "two_stage"
    transcript_columns = ["trial", "w", "wt1", "wt2", "early", "region", "wh1", "wh2", "what", "event"]

    def __init__(self, params: TwoStageParams, spec: ChannelSpec):
        super().__init__(params.M, spec)
        self.params = params
        self.t = params.t
        self.constellation: Constellation = make_simplex(params.M, params.lam * spec.budget)
        self.stage2_amplitude = math.sqrt((1.0 - params.lam) * spec.budget)

    @classmethod
    def from_options(
        cls,
        M: int,
        spec: ChannelSpec,
        lam: Optional[float] = None,
        s: Optional[float] = None,
        **_: Any,
    ) -> "TwoStageScheme":
        """未指定 λ、s 时按 spec.alpha 取最优调度；只指定其一时另一个补齐"""
        if lam is None and s is None:
            params = TwoStageParams.optimal(M, spec.alpha)
        elif lam is None:
            params = TwoStageParams(M=M, lam=lambda_star(M, s), s=s)
        elif s is None:
            params = TwoStageParams(M=M, lam=lam, s=s_for_alpha(spec.alpha))
        else:
            params = TwoStageParams(M=M, lam=lam, s=s)
        return cls(params, spec)

    # ============ 编码 ============

    def encode_stage1(self, w: int) -> np.ndarray:
        return self.constellation.point(w).copy()

    def encoder_select_pair(self, yt_stage1: np.ndarray) -> Pair:
        """编码器依据带噪反馈选出的候选对（升序）"""
        return ordered_pair(*two_most_probable(yt_stage1, self.constellation))

    def stage2_symbol(self, w: int, pair: Pair) -> float:
        """候选对中编号小者 +√((1-λ)nP)，编号大者 -√((1-λ)nP)，不在候选对中为 0"""
        lo, hi = ordered_pair(*pair)
        if w == lo:
            return self.stage2_amplitude
        if w == hi:
            return -self.stage2_amplitude
        return 0.0

    def encode_stage2(self, w: int, pair: Pair) -> float:
        return self.stage2_symbol(w, pair)

    # ============ 译码 ============

    def decode(self, y_stage1: np.ndarray, y_stage2: float) -> DecodeResult:
        region = classify_region(y_stage1, self.constellation, self.t)
        if region.is_protection:
            return DecodeResult(w_hat=region.w, early=True, region=region, pair=None)

        pair = (region.w, region.w2)
        d2 = self.constellation.squared_distances(y_stage1)
        costs = [d2[w - 1] + (self.stage2_symbol(w, pair) - y_stage2) ** 2 for w in pair]
        eps = self.constellation.tie_eps(np.asarray(costs))
        w_hat = pair[0] if costs[0] <= costs[1] + eps else pair[1]
        return DecodeResult(w_hat=w_hat, early=False, region=region, pair=pair)

    def run_trial(self, w: int, stream: NoiseSource) -> TwoStageTranscript:
        self.check_message(w)
        ledger = self.spec.ledger()

        y1 = forward_vector(self.encode_stage1(w), stream, ledger)
        yt1 = feedback_vector(y1, stream)
        encoder_pair = self.encoder_select_pair(yt1)
        y2 = forward(self.encode_stage2(w, encoder_pair), stream, ledger)

        result = self.decode(y1, y2)
        return TwoStageTranscript(
            w=w,
            w_hat=result.w_hat,
            event=attribute_event(w, result.w_hat, result.early, result.pair, encoder_pair),
            encoder_pair=encoder_pair,
            early=result.early,
            region=result.region,
            decoder_pair=result.pair,
            spent=ledger.spent,
        )

    def exponent_target(self) -> float:
        """该调度在当前 α 下的渐近指数下界（最优调度上即 φ(s)）"""
        p = self.params
        return two_stage_schedule_exponent(p.M, self.spec.P, p.lam, p.s, self.spec.alpha)

    def event_bounds(self) -> EventBounds:
        return event_bounds(self.M, self.params.lam, self.params.s, self.spec.alpha, self.spec.budget)

    def describe(self) -> Dict[str, Any]:
        info = super().describe()
        info.update({"lambda": format_float(self.params.lam), "s": format_float(self.params.s)})
        return info


def event_bounds(M: int, lam: float, s: float, alpha: float, nP: float) -> EventBounds:
    """
    三类事件的解析上界

    M=3：2Q(d5)、2·2Q(d6/√α)、Q(√((1-λ/4)nP))；
    一般 M：M²Q(d5')、M·M²Q(d6'/√α)、Q(√((1-(M-2)λ/(2(M-1)))nP))。α=0 时失配上界为 0。
    """
    if alpha < 0:
        raise ValueError(f"alpha 必须 >= 0，当前: {alpha}")
    d = stage_distances(M, lam, s, nP)
    if M == 3:
        d5, d6, c1, c2 = d.d5, d.d6, 2.0, 4.0
    else:
        d5, d6, c1, c2 = d.d5p, d.d6p, float(M * M), float(M ** 3)

    e1 = min(1.0, c1 * q_function(d5))
    if alpha == 0:
        etilde = 0.0
    else:
        etilde = min(1.0, c2 * q_function(d6 / math.sqrt(alpha)))
    e2 = q_function(math.sqrt((1.0 - (M - 2) * lam / (2.0 * (M - 1))) * nP))
    return EventBounds(e1=e1, etilde=etilde, e2=e2)


def e1_wedge_probability(lam: float, nP: float) -> float:
    """M=3、s=0 时 P{Y ∈ A23 | W=1} 的精确值（极坐标一维积分）"""
    c = make_simplex(3, lam * nP)
    return opposite_wedge_probability(c, 1)


def noise_free_reference_trial(
    w: int, lam: float, M: int, spec: ChannelSpec, stream: NoiseSource
) -> Transcript:
    """
    无噪反馈两阶段方案的直接实现（无保护区，编码器直接使用 y）

    消耗噪声的顺序与 TwoStageScheme.run_trial 相同，用于 α=0、s=0 的退化对照。
    """
    c = make_simplex(M, lam * spec.budget)
    amplitude = math.sqrt((1.0 - lam) * spec.budget)
    ledger = spec.ledger()

    y1 = forward_vector(c.point(w), stream, ledger)
    feedback_vector(y1, stream)
    pair = ordered_pair(*two_most_probable(y1, c))
    x2 = amplitude if w == pair[0] else (-amplitude if w == pair[1] else 0.0)
    y2 = forward(x2, stream, ledger)

    d2 = c.squared_distances(y1)
    cost_lo = d2[pair[0] - 1] + (amplitude - y2) ** 2
    cost_hi = d2[pair[1] - 1] + (-amplitude - y2) ** 2
    w_hat = pair[0] if cost_lo <= cost_hi + c.tie_eps(np.array([cost_lo, cost_hi])) else pair[1]

    if w_hat == w:
        event = None
    elif w not in pair:
        event = ErrorEvent.E1
    else:
        event = ErrorEvent.E2
    return Transcript(w=w, w_hat=w_hat, event=event)
