import math

import numpy as np
import pytest

from app.services.geometry import (
    T_MAX,
    TIE_RTOL,
    RegionKind,
    classify_region,
    general_m_scale,
    make_simplex,
    nearest_message,
    opposite_wedge_probability,
    protection_margin_s_to_t,
    protection_margin_t_to_s,
    stage_distances,
    two_most_probable,
    wedge_probability,
)


def test_binary_simplex_is_antipodal():
    c = make_simplex(2, 4.0)
    assert c.points.shape == (2, 1)
    assert c.point(1)[0] == pytest.approx(2.0)
    assert c.point(2)[0] == pytest.approx(-2.0)


@pytest.mark.parametrize("M", [3, 4, 5, 8])
def test_simplex_is_regular(M):
    energy = 2.5
    c = make_simplex(M, energy)
    assert c.points.shape == (M, M - 1)
    np.testing.assert_allclose(np.sum(c.points ** 2, axis=1), energy, rtol=1e-12)
    np.testing.assert_allclose(c.points.sum(axis=0), 0.0, atol=1e-12)
    expected = math.sqrt(2.0 * energy * M / (M - 1))
    for i in range(M):
        for j in range(i + 1, M):
            assert np.linalg.norm(c.points[i] - c.points[j]) == pytest.approx(expected, rel=1e-12)


def test_three_point_pairwise_distance():
    c = make_simplex(3, 0.8)
    assert c.pairwise_distance == pytest.approx(math.sqrt(3 * 0.8))


def test_point_index_is_one_based():
    c = make_simplex(3, 1.0)
    with pytest.raises(ValueError):
        c.point(0)
    with pytest.raises(ValueError):
        c.point(4)
    with pytest.raises(ValueError):
        make_simplex(1, 1.0)


def test_two_most_probable_and_ties():
    c = make_simplex(3, 1.0)
    assert two_most_probable(c.points[1], c)[0] == 2
    # 原点与三个码字等距，按编号打破并列
    assert two_most_probable(np.zeros(2), c) == (1, 2)
    assert nearest_message(np.zeros(2), c) == 1


def test_codeword_lies_in_its_protection_region():
    c = make_simplex(3, 1.0)
    for t in (0.0, 0.1, T_MAX):
        for w in (1, 2, 3):
            label = classify_region(c.point(w), c, t)
            assert label.kind == RegionKind.PROTECTION
            assert label.w == w


def test_far_side_of_midline_is_ambiguous():
    c = make_simplex(3, 1.0)
    # 位于 1、3 的中垂线上且远离 2
    y = -2.0 * c.point(2) + 0.01 * (c.point(1) - c.point(3))
    label = classify_region(y, c, protection_margin_s_to_t(3, 0.5))
    assert label.kind == RegionKind.AMBIGUOUS
    assert (label.w, label.w2) == (1, 3)
    assert str(label) == "A1_3"


def test_protection_boundary_matches_margin():
    c = make_simplex(3, 1.0)
    s = 0.5
    t = protection_margin_s_to_t(3, s)
    r = s / 2.0
    axis = -c.point(3) / np.linalg.norm(c.point(3))
    inside = classify_region(0.99 * r * axis, c, t)
    outside = classify_region(1.01 * r * axis, c, t)
    assert inside.is_protection
    assert not outside.is_protection
    assert (outside.w, outside.w2) == (1, 2)


def test_margin_maps():
    assert protection_margin_t_to_s(0.0) == 0.0
    assert protection_margin_t_to_s(T_MAX) == pytest.approx(1.0, abs=1e-12)
    t = protection_margin_s_to_t(3, 0.5)
    assert t == pytest.approx(0.201271, abs=1e-6)
    closed_form = (1.0 + 0.25 - math.sqrt(1.0 - 0.25 + 0.0625)) / math.sqrt(3.0)
    assert t == pytest.approx(closed_form, abs=1e-12)
    assert protection_margin_t_to_s(t) == pytest.approx(0.5, abs=1e-12)
    assert protection_margin_s_to_t(7, 0.5) == pytest.approx(t, abs=1e-13)
    assert protection_margin_s_to_t(3, 0.0) == 0.0
    with pytest.raises(ValueError):
        protection_margin_s_to_t(3, 1.5)


def test_stage_distances_three_messages():
    d = stage_distances(3, 0.8, 0.0, 9.0)
    assert d.d1 == pytest.approx(math.sqrt(7.2))
    assert d.d2 == pytest.approx(math.sqrt(21.6))
    assert d.d3 == pytest.approx(math.sqrt(4 * 0.2 * 9.0))
    assert d.d4 == 0.0
    assert d.d5 == pytest.approx(d.d1)
    assert d.d6 == 0.0
    assert d.d_prime == pytest.approx(d.d2)
    assert general_m_scale(3) == pytest.approx(1.0)
    assert d.d1p == pytest.approx(d.d1)


@pytest.mark.parametrize("M", [4, 6, 10])
def test_general_m_prime_distance_matches_constellation(M):
    lam, nP = 0.7, 5.0
    d = stage_distances(M, lam, 0.4, nP)
    assert d.d_prime == pytest.approx(make_simplex(M, lam * nP).pairwise_distance)
    assert d.d3p == d.d3
    assert d.d5p == pytest.approx(d.d5 * general_m_scale(M))


def test_stage_distances_domain():
    with pytest.raises(ValueError):
        stage_distances(2, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        stage_distances(3, 1.0, 0.5, 1.0)


@pytest.mark.parametrize("M", [3, 4, 8])
def test_d5_never_below_its_floor(M):
    # d5² = (d1 - d4/2)² + 3d4²/4，d4 <= d1/2 时下界为 (√3/2)·d1
    for lam in (0.1, 0.5, 0.9):
        for s in np.linspace(0.0, 1.0, 21):
            for energy in (0.5, 9.0, 400.0):
                d = stage_distances(M, lam, float(s), energy)
                assert d.d5 >= 0.5 * math.sqrt(3.0) * d.d1 * (1.0 - 1e-12)
                assert d.d5p >= 0.5 * math.sqrt(3.0) * d.d1p * (1.0 - 1e-12)
    d = stage_distances(M, 0.5, 1.0, 9.0)
    assert d.d5 == pytest.approx(0.5 * math.sqrt(3.0) * d.d1)


def _expected_regions(Y, c, t):
    """逐点最近码字 + 其余距离极差的向量化判定"""
    D = np.sqrt(((Y[:, None, :] - c.points[None, :, :]) ** 2).sum(axis=2))
    order = np.argsort(D, axis=1)
    rows = np.arange(len(Y))
    rest = D.copy()
    rest[rows, order[:, 0]] = np.nan
    spread = np.nanmax(rest, axis=1) - np.nanmin(rest, axis=1)
    return order[:, 0] + 1, order[:, 1] + 1, spread - t * c.pairwise_distance


@pytest.mark.parametrize("M,count", [(3, 100_000), (5, 20_000)])
def test_regions_partition_observation_space(M, count):
    c = make_simplex(M, 4.0)
    t = protection_margin_s_to_t(M, 0.5)
    Y = np.random.default_rng(2024).normal(scale=2.5, size=(count, M - 1))
    w1, w2, margin = _expected_regions(Y, c, t)

    checked = 0
    for i, y in enumerate(Y):
        # 距边界过近的点留给容差处理，不参与比对
        if abs(margin[i]) < 1e-9:
            continue
        label = classify_region(y, c, t)
        pair = two_most_probable(y, c)
        assert pair == (w1[i], w2[i])
        if margin[i] <= 0:
            assert label.kind == RegionKind.PROTECTION
            assert (label.w, label.w2) == (w1[i], None)
        else:
            assert label.kind == RegionKind.AMBIGUOUS
            assert (label.w, label.w2) == tuple(sorted(pair))
        checked += 1
    assert checked >= count - 10


def test_tie_tolerances_scale_with_energy():
    big = make_simplex(3, 1e6)
    d2 = np.array([1.0, 2.0, 4e6])
    assert big.tie_eps(d2) == pytest.approx(TIE_RTOL * 4e6)
    assert big.distance_eps(d2) == pytest.approx(TIE_RTOL * 2e3)
    small = make_simplex(3, 0.01)
    assert small.tie_eps(np.array([0.1, 0.2])) == pytest.approx(TIE_RTOL)
    # 容差内的两个距离视为并列，取编号较小者
    y = np.zeros(2)
    assert nearest_message(y, small) == 1


def test_wedge_probability_sanity():
    assert wedge_probability(np.array([0.3, -0.2]), -math.pi, math.pi) == pytest.approx(1.0, rel=1e-9)
    assert wedge_probability(np.zeros(2), 0.0, 2 * math.pi / 3) == pytest.approx(1.0 / 3.0, rel=1e-9)


def test_opposite_wedge_matches_sampling():
    c = make_simplex(3, 2.0)
    rng = np.random.default_rng(2024)
    trials = 200_000
    y = c.point(1) + rng.standard_normal((trials, 2))
    d2 = ((y[:, None, :] - c.points[None, :, :]) ** 2).sum(axis=2)
    farthest = np.mean(np.argmax(d2, axis=1) == 0)
    p = opposite_wedge_probability(c, 1)
    sigma = math.sqrt(p * (1 - p) / trials)
    assert abs(farthest - p) <= 4 * sigma
