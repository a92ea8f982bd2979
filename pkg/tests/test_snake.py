import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifsverify import snake
from ifsverify.engine import IfsSystem, MapError, check_weak_contraction, hutchinson
from ifsverify.geometry import PointCloud, PolarPoint, hausdorff_distance, polyline_length, to_polar_arrays
from oracles import f_tilde_exact, lipschitz_all_pairs


@pytest.fixture(scope="module")
def S12():
    return snake.build_snake(12, 2e-3, 2e-3)


# radial profile


@settings(max_examples=200)
@given(st.fractions(min_value=Fraction(1, 10**6), max_value=1, max_denominator=10**6))
def test_profile_matches_exact_interpolation(r):
    assert snake.radial_profile(float(r)) == pytest.approx(float(f_tilde_exact(r)), rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 50, 999])
def test_profile_sends_arc_radius_two_steps_in(n):
    assert snake.radial_profile(1.0 / n) == pytest.approx(1.0 / (n + 2), rel=1e-14)
    assert snake.radial_branch_value(n, 1.0 / (n + 1)) == pytest.approx(1.0 / (n + 3), rel=1e-14)


@given(st.floats(1e-9, 1.0, exclude_min=False))
def test_profile_below_identity(r):
    assert snake.radial_profile(r) < r


@given(st.floats(1e-9, 1.0), st.floats(1e-9, 1.0))
def test_profile_increasing(a, b):
    if a < b:
        assert snake.radial_profile(a) < snake.radial_profile(b)


def test_profile_at_zero_and_domain():
    assert snake.radial_profile(0.0) == 0.0
    with pytest.raises(snake.SnakeDomainError):
        snake.radial_profile(1.5)
    with pytest.raises(snake.SnakeDomainError):
        snake.radial_profile(-0.1)


# construction


def test_labels_and_precondition(S12):
    want = {f"O_{n}" for n in range(1, 13)} | {f"I_{n}" for n in range(1, 13)} | {"origin"}
    assert S12.cloud.label_set() == want
    with pytest.raises(ValueError):
        snake.build_snake(0)


def test_pieces_chain_end_to_end(S12):
    order = [p for n in range(1, 13) for p in (f"O_{n}", f"I_{n}")]
    np.testing.assert_array_equal(S12.pieces["O_1"].vertices[0], [1.0, 0.0])
    for a, b in zip(order, order[1:]):
        np.testing.assert_array_equal(S12.pieces[a].vertices[-1], S12.pieces[b].vertices[0])


def test_samples_lie_on_snake(S12):
    r, a = to_polar_arrays(S12.cloud.points)
    assert all(snake.in_snake(PolarPoint(float(x), float(y)), 1e-9) for x, y in zip(r[::37], a[::37]))
    assert not snake.in_snake(PolarPoint(0.75, 1.0))


def test_weak_map_keeps_angle():
    p = PolarPoint(0.5, 0.25 * math.pi)
    q = snake.snake_weak_map(PolarPoint(0.5, 0.0))
    assert q.alpha == 0.0 and q.r == pytest.approx(0.25)
    with pytest.raises(snake.SnakeDomainError):
        snake.snake_weak_map(p)


def test_f_maps_snake_into_snake(S12):
    img = snake.snake_f().fn(S12.cloud.points)
    r, a = to_polar_arrays(img)
    assert all(snake.in_snake(PolarPoint(float(x), float(y)), 1e-9) for x, y in zip(r[::11], a[::11]))


def test_f_rejects_points_outside_disk():
    with pytest.raises(MapError):
        snake.snake_f().fn(np.array([[2.0, 0.0]]))


def test_weak_contraction_all_pairs(S12):
    sub = S12.cloud.points[::5]
    assert lipschitz_all_pairs(snake.snake_f().fn, sub) < 1.0


@pytest.mark.parametrize("seed", [0, 1])
def test_weak_contraction_sampled(S12, seed):
    rep = check_weak_contraction(snake.snake_f(), S12.cloud, 20_000, seed)
    assert rep.passed


def test_shift_law(S12):
    for n in range(1, 11):
        d = hausdorff_distance(snake.image_cloud(S12, f"O_{n}", f"I_{n}"), S12.piece_cloud(f"O_{n + 2}", f"I_{n + 2}"))
        assert d <= 2 * S12.resolution


def test_shift_label():
    assert snake.shift_label("O_3") == "O_5"
    assert snake.shift_label("origin") == "origin"
    with pytest.raises(ValueError):
        snake.shift_label("Q_1")


# cover maps


def test_k_roundtrip(S12):
    K = snake.k_cloud(S12)
    s = snake.k_position(K.points)
    assert s.min() >= 0.0 and s.max() <= snake.K_LENGTH + 1e-12
    np.testing.assert_allclose(snake.k_point(s), K.points, atol=1e-12)


def test_k_length_closed_form():
    want = 1.5 * math.pi + 0.5 + 0.75 * math.pi + 1.0 / 6.0
    assert snake.K_LENGTH == pytest.approx(want, rel=1e-15)


def test_cover_maps_cover_k(S12):
    m = 16
    F = IfsSystem(tuple(snake.cover_map(i, m) for i in range(1, m + 1)), "weak")
    img = hutchinson(F, S12.cloud)
    assert hausdorff_distance(img, snake.k_cloud(S12)) <= 2 * S12.resolution


def test_minimal_cover_count_is_first_admissible(S12):
    m = snake.minimal_cover_count(S12, rng_seed=0)
    assert m & (m - 1) == 0
    assert snake._cover_sup(S12, m, 20_000, 0) < snake.COVER_LIP_CEILING
    if m > 1:
        assert snake._cover_sup(S12, m // 2, 20_000, 0) >= snake.COVER_LIP_CEILING


def test_cover_count_too_small(S12):
    with pytest.raises(snake.CoverCountError):
        snake.build_cover_maps(S12, 1)


def test_cover_map_parameters():
    with pytest.raises(MapError):
        snake.cover_map(0, 4).fn
    with pytest.raises(MapError):
        snake.cover_map(5, 4).fn


def test_invariance_small_depth(S12):
    F = snake.snake_system(S12, 16)
    d = hausdorff_distance(S12.cloud, hutchinson(F, S12.cloud))
    assert d <= 2 / S12.depth + 2 * S12.resolution


# lengths


@pytest.mark.parametrize("n", [1, 2, 5, 40])
def test_piece_lengths(n):
    assert polyline_length(snake.arc_piece(n, 1e-3)) == pytest.approx(1.5 * math.pi / n, abs=1e-3)
    assert polyline_length(snake.segment_piece(n, 1e-3)) == pytest.approx(1 / (n * (n + 1)), abs=1e-12)


def test_sanders_report_diverges():
    rep = snake.sanders_report(100)
    assert rep.finite_part_lengths[-1] >= 24.0
    assert rep.divergence_witness is not None
    assert all(b > a for a, b in zip(rep.finite_part_lengths, rep.finite_part_lengths[1:]))
    with pytest.raises(ValueError):
        snake.sanders_report(1)
