import io
import math

import numpy as np
import pytest

from app.schemes.base import ErrorEvent
from app.schemes.baseline import BaselineScheme
from app.schemes.linear import LinearScheme, noisy_schedule
from app.schemes.two_stage import TwoStageParams, TwoStageScheme
from app.services.channel import ChannelSpec, NoiseStream
from app.services.exponents import two_stage_parametric
from app.services.montecarlo import (
    RESULT_COLUMNS,
    ResultRow,
    clopper_pearson,
    fit_exponent,
    fit_log_slope,
    make_estimate,
    results_from_csv,
    results_to_csv,
    run_batch,
    run_transcripts,
)
from app.utils.numerics import q_function


def _two_stage(alpha=0.2, n=4):
    point = two_stage_parametric(3, 1.0, 0.5)
    return TwoStageScheme(TwoStageParams(M=3, lam=point.lambda_star, s=0.5), ChannelSpec(P=1.0, n=n, alpha=alpha))


def test_clopper_pearson_edges():
    lo, hi = clopper_pearson(0, 10)
    assert lo == 0.0
    assert hi == pytest.approx(1 - 0.025 ** 0.1, rel=1e-9)
    lo, hi = clopper_pearson(10, 10)
    assert lo == pytest.approx(0.025 ** 0.1, rel=1e-9)
    assert hi == 1.0
    with pytest.raises(ValueError):
        clopper_pearson(11, 10)
    with pytest.raises(ValueError):
        clopper_pearson(0, 0)


def test_make_estimate():
    est = make_estimate(25, 1000, {"E1": 20, "E2": 5})
    assert est.p_hat == 0.025
    assert est.ci_low < 0.025 < est.ci_high
    assert est.count(ErrorEvent.E1) == 20
    assert est.count(ErrorEvent.MISCOORDINATION) == 0
    assert est.sigma == pytest.approx(math.sqrt(0.025 * 0.975 / 1000))


@pytest.mark.parametrize("p", [0.5, 0.01])
def test_clopper_pearson_coverage(p):
    rng = np.random.default_rng(99)
    batches, size = 400, 200
    covered = 0
    for errors in rng.binomial(size, p, batches):
        lo, hi = clopper_pearson(int(errors), size)
        covered += lo <= p <= hi
    assert covered / batches >= 0.92


def test_zero_noise_has_no_errors(seed):
    schemes = [
        BaselineScheme(3, ChannelSpec(P=1.0, n=1)),
        _two_stage(alpha=0.2, n=2),
        LinearScheme(noisy_schedule(3, 4, 0.2), ChannelSpec(P=1.0, n=4, alpha=0.2)),
    ]
    for scheme in schemes:
        est = run_batch(scheme, 300, seed=seed, workers=1, zero_noise=True)
        assert est.errors == 0


def test_result_does_not_depend_on_chunking(seed):
    scheme = _two_stage()
    reference = run_batch(scheme, 1000, seed=seed, workers=1)
    assert run_batch(scheme, 1000, seed=seed, workers=1, chunk_size=97) == reference
    assert run_batch(scheme, 1000, seed=seed, workers=2, chunk_size=250) == reference


def test_different_seeds_differ():
    scheme = _two_stage()
    a = run_transcripts(scheme, 200, seed=1, workers=1)
    b = run_transcripts(scheme, 200, seed=2, workers=1)
    assert not a.equals(b)


def test_event_counts_add_up(seed):
    est = run_batch(_two_stage(), 2000, seed=seed, workers=1)
    assert est.errors > 0
    assert sum(est.event_counts.values()) == est.errors


def test_transcripts_follow_trial_streams(seed):
    scheme = _two_stage()
    df = run_transcripts(scheme, 50, seed=seed, workers=1, chunk_size=7)
    assert list(df["trial"]) == list(range(50))
    for i in (0, 13, 49):
        stream = NoiseStream(seed, i, alpha=scheme.spec.alpha)
        t = scheme.run_trial(stream.message(3), stream)
        assert df.iloc[i]["w"] == t.w
        assert df.iloc[i]["what"] == t.w_hat


def test_results_csv_round_trip(seed):
    scheme = _two_stage()
    est = run_batch(scheme, 500, seed=seed, workers=1)
    rows = [ResultRow.from_estimate(scheme, est, seed)]
    text = results_to_csv(rows)
    assert text.splitlines()[0] == ",".join(RESULT_COLUMNS)
    assert results_from_csv(io.StringIO(text)) == rows


def test_fit_log_slope_recovers_line():
    ns = [4, 8, 12, 16]
    p = [math.exp(-0.3 * n - 0.5) for n in ns]
    slope, stderr, intercept = fit_log_slope(ns, p, [0.01] * 4)
    assert slope == pytest.approx(0.3)
    assert intercept == pytest.approx(0.5)
    assert stderr > 0
    with pytest.raises(ValueError):
        fit_log_slope([4, 4], [0.1, 0.2], [1.0, 1.0])


def test_fit_requires_errors():
    with pytest.raises(ValueError):
        fit_exponent(lambda n: BaselineScheme(2, ChannelSpec(P=100.0, n=n)), [1, 2, 3], 200, seed=1, workers=1)
    with pytest.raises(ValueError):
        fit_exponent(lambda n: BaselineScheme(2, ChannelSpec(P=1.0, n=n)), [1, 2], 200, seed=1, workers=1)


def test_baseline_fit_matches_exact_curve(seed):
    P, trials, grid = 0.25, 20_000, [4, 8, 12, 16]
    result = fit_exponent(lambda n: BaselineScheme(2, ChannelSpec(P=P, n=n)), grid, trials, seed=seed, workers=1)
    assert result.excluded == []
    p = [q_function(math.sqrt(n * P)) for n in grid]
    oracle, _, _ = fit_log_slope(grid, p, [(1 - q) / (q * trials) for q in p])
    assert abs(result.slope - oracle) <= 4 * result.stderr
