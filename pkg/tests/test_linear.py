import math

import numpy as np
import pytest

from app.schemes.base import ErrorEvent
from app.schemes.linear import (
    LinearParams,
    LinearScheme,
    ScheduleMode,
    noise_free_schedule,
    noisy_schedule,
    pam_point,
)
from app.services.channel import ChannelSpec, NoiseStream, ScriptedNoise
from app.services.exponents import estimation_noise, pinsker_delta
from app.services.montecarlo import collect_trials


def _explicit(nbar=2, delta=0.5, lam=0.5, alpha=0.1, P=1.0):
    params = LinearParams(M=3, nbar=nbar, delta=delta, mode=ScheduleMode.NOISY, lam=lam)
    return LinearScheme(params, ChannelSpec(P=P, n=nbar * nbar, alpha=alpha))


def _estimation_error(trial, t):
    return (t.budget_bound, t.xhat1 - t.x[0])


def _pinsker_reference(w, M, n, P, stream):
    """无噪反馈线性方案的直接实现：每步重发上一次前向噪声的 (1+δ) 倍"""
    nbar = math.isqrt(n)
    g = 1.0 + pinsker_delta(M, n)
    points = [pam_point(v, M, math.sqrt(P)) for v in range(1, M + 1)]
    x = points[w - 1]
    spent, active, eta = 0.0, True, 1
    ys = []
    z_prev = 0.0
    for i in range(nbar):
        if i > 0:
            candidate = g * z_prev if active else 0.0
            if active and spent + candidate * candidate <= n * P + 1e-9:
                x = candidate
                eta = i + 1
            else:
                active = False
                x = 0.0
        spent += x * x
        z_prev = stream.forward_noise()
        stream.feedback_noise()
        ys.append(x + z_prev)
    xhat = sum((-1) ** i * y / g ** i for i, y in enumerate(ys))
    dist = [abs(p - xhat) for p in points]
    return dist.index(min(dist)) + 1, eta


def test_pam_points():
    assert [pam_point(w, 3, 2.0) for w in (1, 2, 3)] == [2.0, 0.0, -2.0]
    assert [pam_point(w, 4, 2.0) for w in (1, 2, 3, 4)] == pytest.approx([1.5, 0.5, -0.5, -1.5])
    assert pam_point(1, 5, 2.0) - pam_point(2, 5, 2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pam_point(4, 3, 1.0)


def test_schedules():
    params = noise_free_schedule(3, 10000)
    assert params.mode == ScheduleMode.NOISE_FREE
    assert params.nbar == 100
    assert params.delta == pytest.approx(0.052983, abs=1e-6)
    assert params.amplitude(2.0) == pytest.approx(math.sqrt(2.0))
    with pytest.raises(ValueError):
        noise_free_schedule(3, 10001)

    params = noisy_schedule(3, 100, 1.0)
    assert params.delta == pytest.approx(0.553774, abs=1e-6)
    assert params.lam == pytest.approx(0.585786, abs=1e-6)
    assert params.amplitude(1.0) == pytest.approx(math.sqrt(params.lam * 100))
    with pytest.raises(ValueError):
        noisy_schedule(3, 100, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        LinearParams(M=3, nbar=0, delta=0.5, lam=0.5)
    with pytest.raises(ValueError):
        LinearParams(M=3, nbar=3, delta=0.0, lam=0.5)
    with pytest.raises(ValueError):
        LinearParams(M=3, nbar=3, delta=0.5, mode=ScheduleMode.NOISY, lam=None)
    params = LinearParams(M=3, nbar=3, delta=0.5, lam=0.5)
    with pytest.raises(ValueError):
        LinearScheme(params, ChannelSpec(P=1.0, n=10))


def test_noiseless_trial():
    scheme = LinearScheme(noisy_schedule(3, 100, 0.1), ChannelSpec(P=1.0, n=100, alpha=0.1))
    for w in (1, 2, 3):
        t = scheme.run_trial(w, ScriptedNoise(alpha=0.1))
        assert t.eta == 10
        assert not t.budget_bound
        np.testing.assert_array_equal(t.x[1:], 0.0)
        assert t.xhat1 == pytest.approx(t.x[0])
        assert t.w_hat == w
        assert t.event is None


def test_scripted_two_step_trial():
    scheme = _explicit()
    noise = ScriptedNoise(forward=[0.3, 0.2], feedback=[-0.1, 0.0], alpha=0.1)
    t = scheme.run_trial(1, noise)
    assert t.x[0] == pytest.approx(math.sqrt(2.0))
    assert t.x[1] == pytest.approx(1.5 * (0.3 - 0.1))
    assert t.eta == 2
    assert t.xhat1 == pytest.approx(math.sqrt(2.0) + 0.3 - 0.5 / 1.5)
    assert t.xhat1 == pytest.approx(scheme.virtual_estimate(t), abs=1e-12)
    assert t.w_hat == 1


def test_budget_stops_retransmission():
    scheme = _explicit()
    t = scheme.run_trial(1, ScriptedNoise(forward=[-10.0], alpha=0.1))
    assert t.eta == 1
    assert t.budget_bound
    assert t.x[1] == 0.0
    assert t.w_hat == 3
    assert t.event == ErrorEvent.BUDGET
    row = t.to_row(4)
    assert list(row) == scheme.transcript_columns
    assert row["budget_bound"] == 1


def test_estimation_error_is_tagged():
    scheme = _explicit()
    t = scheme.run_trial(2, ScriptedNoise(forward=[0.0, -3.0], alpha=0.1))
    assert not t.budget_bound
    assert t.w_hat == 1
    assert t.event == ErrorEvent.ESTIMATION


@pytest.mark.parametrize("nbar", [2, 10, 50])
@pytest.mark.parametrize("delta", [0.01, 0.1, 1.0])
def test_telescoping_identity(nbar, delta, seed):
    scheme = _explicit(nbar=nbar, delta=delta, lam=1e-3, alpha=0.1, P=1e4)
    for i in range(300):
        stream = NoiseStream(seed, i, alpha=0.1)
        t = scheme.run_trial(stream.message(3), stream)
        assert not t.budget_bound
        assert t.xhat1 == pytest.approx(scheme.virtual_estimate(t), abs=1e-9)


def test_virtual_estimate_without_feedback_noise(seed):
    scheme = _explicit(nbar=5, delta=0.2, lam=1e-3, alpha=0.0, P=1e4)
    stream = NoiseStream(seed, 0, alpha=0.0)
    t = scheme.run_trial(1, stream)
    z_last = t.y[-1] - t.x[-1]
    assert scheme.virtual_estimate(t) == pytest.approx(t.x[0] + z_last / 1.2 ** 4, abs=1e-9)


def test_estimation_noise_variance(seed):
    alpha, n = 0.1, 100
    params = noisy_schedule(3, n, alpha)
    scheme = LinearScheme(params, ChannelSpec(P=1.0, n=n, alpha=alpha))
    values = collect_trials(scheme, 20_000, _estimation_error, seed=seed, workers=1)
    err = np.array([e for bound, e in values if not bound])
    assert err.size > 19_000
    target = estimation_noise(params.nbar, params.delta, alpha)
    assert np.var(err, ddof=1) == pytest.approx(target, rel=0.05)


def test_error_bounds():
    scheme = LinearScheme(noisy_schedule(3, 100, 0.5), ChannelSpec(P=1.0, n=100, alpha=0.5))
    p1, p2 = scheme.error_bounds()
    assert 0 < p1 <= 1
    assert 0.4 < p2 < 0.7
    # 剩余预算小于自由度时上界取 1
    tight = _explicit(nbar=10, delta=1.0, lam=0.9, alpha=0.1)
    assert tight.error_bounds()[1] == 1.0


def test_reduces_to_noise_free_scheme(seed):
    spec = ChannelSpec(P=1.0, n=25, alpha=0.0)
    scheme = LinearScheme.from_options(3, spec)
    assert scheme.params.mode == ScheduleMode.NOISE_FREE
    assert scheme.exponent_target() == 0.5
    for i in range(500):
        a = NoiseStream(seed, i, alpha=0.0)
        b = NoiseStream(seed, i, alpha=0.0)
        w = a.message(3)
        b.message(3)
        t = scheme.run_trial(w, a)
        w_hat, eta = _pinsker_reference(w, 3, 25, 1.0, b)
        assert t.w_hat == w_hat
        assert t.eta == eta


def test_from_options_overrides():
    spec = ChannelSpec(P=1.0, n=49, alpha=0.2)
    scheme = LinearScheme.from_options(3, spec, lam=0.3)
    assert scheme.params.lam == 0.3
    assert scheme.params.delta == pytest.approx(noisy_schedule(3, 49, 0.2).delta)
    with pytest.raises(ValueError):
        LinearScheme.from_options(3, ChannelSpec(P=1.0, n=49, alpha=0.0), schedule="noisy")
    assert LinearScheme.from_options(3, spec).describe()["schedule"] == "noisy"
