import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ifsverify import sharkteeth as st_
from ifsverify.engine import MapError, certify_composition_diameter, estimate_lipschitz, hutchinson
from ifsverify.geometry import PointCloud, hausdorff_distance, polyline_length
from oracles import lipschitz_all_pairs, max_word_diameter


def small_system():
    return st_.worked_system(rows=2, resolution=0.05)


# waves and rows


@given(st.fractions(min_value=-3, max_value=3, max_denominator=1000))
def test_wave_is_distance_to_nearest_integer(t):
    exact = min(t - math.floor(t), math.ceil(t) - t)
    assert st_.wave(float(t)) == pytest.approx(float(exact), abs=1e-15)


@given(st.integers(0, 12), st.fractions(min_value=0, max_value=1, max_denominator=4096))
def test_scaled_wave_range(n, t):
    v = st_.scaled_wave(n, float(t))
    assert 0.0 <= v <= 2.0 ** (-n - 1)


def test_row_index_small_values():
    # floor(log2 log2 (k+1)) for k = 1..20
    want = [0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2]
    assert [st_.row_index(k) for k in range(1, 21)] == want
    assert st_.row_index(2**16 - 1) == 4 and st_.row_index(2**16 - 2) == 3
    with pytest.raises(ValueError):
        st_.row_index(0)


@pytest.mark.parametrize("k", [1, 2, 3, 15, 255])
def test_row_max_height(k):
    c = st_.row_curve(k)
    assert c.vertices[:, 1].max() == pytest.approx(st_.row_amplitude(k), rel=1e-15)
    assert c.vertices[0, 1] == 0.0 and c.vertices[-1, 1] == 0.0


def test_tent_contraction_images_and_lipschitz():
    x = np.linspace(0, 1, 1001)
    for i in range(3):
        y = st_.tent_contraction(i, x)
        assert y.min() == pytest.approx(i / 3) and y.max() == pytest.approx((i + 1) / 3)
        assert np.max(np.abs(np.diff(y)) / np.diff(x)) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        st_.tent_contraction(3, 0.5)
    with pytest.raises(ValueError):
        st_.tent(1.5)


def test_tent_f_map_exact_on_rationals():
    f = st_._build_tent_f((1,), None)
    xs = [Fraction(k, 64) for k in range(65)]
    got = f(np.array([[float(x), 0.0] for x in xs]))[:, 0]
    want = [float((1 + 2 * min(x, 1 - x)) / 3) for x in xs]
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)


def test_shark_teeth_space_labels():
    M = st_.build_shark_teeth(4, 65)
    assert M.cloud.label_set() == {"bone", "M_1", "M_2", "M_3", "M_4"}
    with pytest.raises(ValueError):
        st_.build_shark_teeth(0)


def test_loop_is_closed_and_covers_rows():
    for K in (1, 2, 5):
        loop = st_.shark_teeth_loop(K)
        np.testing.assert_array_equal(loop.vertices[0], loop.vertices[-1])
        M = st_.build_shark_teeth(K, 257)
        assert hausdorff_distance(M.cloud.points, loop.resample(1e-3)) <= 4e-3


# free arcs


def test_worked_instance_shape():
    P = st_.worked_instance(3, 0.01)
    assert P.nonempty_sides() == [1, 2]
    assert polyline_length(P.arc) == st_.WORKED_ARC_LENGTH
    assert P.sides[1].length == pytest.approx(st_.WORKED_LOOP_LENGTH, rel=1e-12)
    np.testing.assert_array_equal(P.rho(1.0)[0], [0.0, 0.0])


def test_invert_roundtrip():
    P = st_.worked_instance(3, 0.01)
    t = np.linspace(0, 1, 77)
    on, s = P.invert(P.rho(t))
    assert on.all()
    np.testing.assert_allclose(s, t, atol=1e-15)
    on, _ = P.invert(np.array([[-1.0, 0.5]]))
    assert not on[0]


def test_bent_arc_invert():
    arc = np.array([[0, 0], [1, 0], [1, 1]], dtype=float)
    P = st_.free_arc_space(arc, [], 0.01)
    on, s = P.invert(np.array([[1.0, 0.5], [0.5, 0.0], [0.9, 0.9]]))
    assert on.tolist() == [True, True, False]
    np.testing.assert_allclose(s[:2], [0.75, 0.25])


def test_free_arc_rejects_side_meeting_interior():
    arc = np.array([[0, 0], [2, 0]], dtype=float)
    loop = [[1, 0], [1, 1], [1.5, 1], [1, 0]]
    with pytest.raises(st_.FreeArcError, match="not a free arc"):
        st_.free_arc_space(arc, [None, loop], 0.01)


def test_free_arc_rejects_detached_side():
    arc = np.array([[0, 0], [2, 0]], dtype=float)
    with pytest.raises(st_.FreeArcError, match="does not meet"):
        st_.free_arc_space(arc, [[(5.0, 5.0)]], 0.01)


def test_free_arc_rejects_open_side_and_self_crossing_arc():
    with pytest.raises(st_.FreeArcError, match="closed"):
        st_.free_arc_space(np.array([[0, 0], [1, 0]], float), [[[0, 0], [0, 1], [-1, 1]]], 0.01)
    with pytest.raises(st_.FreeArcError, match="self-intersects"):
        st_.free_arc_space(np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float), [], 0.01)


def test_free_arc_json():
    P = st_.free_arc_from_json('{"arc": [[0, 0], [1, 0]], "sides": [[[0, 0]]]}', 0.01)
    assert P.nonempty_sides() == [1]


# maps


def test_F_folds_arc_and_collapses_rest():
    fs = small_system()
    P = fs.space
    t = np.linspace(0, 1, 51)
    for i in range(3):
        F = fs.maps.maps[i].fn
        np.testing.assert_allclose(F(P.rho(t)), P.rho(st_.tent_contraction(i, t)), atol=1e-12)
        rest = P.side_cloud(2).points
        np.testing.assert_allclose(F(rest), np.tile(P.rho(i / 3)[0], (len(rest), 1)), atol=1e-12)


def test_maps_continuous_at_glue_points():
    fs = small_system()
    P = fs.space
    for spec in fs.maps.maps:
        a = spec.fn(P.rho(1.0))[0]
        b = spec.fn(P.side_cloud(2).points[:1] + [1e-9, 1e-9])[0]
        assert np.hypot(*(a - b)) <= 1e-9


def test_F_lipschitz_all_pairs():
    fs = small_system()
    X = fs.space.cloud.points
    for i in range(3):
        assert lipschitz_all_pairs(fs.maps.maps[i].fn, X) <= 2 / 3 + 1e-9
    rep = estimate_lipschitz(fs.maps.maps[0], fs.space.cloud, 10_000, rng_seed=0)
    assert rep.sup_ratio <= 2 / 3 + 1e-9


def test_G_for_empty_side_is_omitted():
    P = st_.free_arc_space(np.array([[0, 0], [1, 0]], float), [], 0.05)
    fs = st_.build_free_arc_system(P)
    assert fs.g_indices == () and len(fs.maps.maps) == 3
    with pytest.raises(MapError):
        st_._build_G((1,), P)


def test_union_of_images_covers_space():
    fs = small_system()
    img = hutchinson(fs.maps, fs.space.cloud)
    assert hausdorff_distance(img, fs.space.cloud) <= 2 * fs.space.resolution


@pytest.mark.parametrize("m", [1, 2, 3])
def test_certificate_matches_enumeration(m):
    fs = small_system()
    X = fs.space.cloud
    cert = certify_composition_diameter(fs.maps, X, m, 1.0)
    oracle, _ = max_word_diameter([f.fn for f in fs.maps.maps], X.points, m)
    assert cert.max_diameter == pytest.approx(oracle, rel=1e-12, abs=1e-15)
    assert cert.max_diameter <= st_.diameter_bound(m) + 2 * X.resolution


def test_inner_g_words_collapse():
    fs = small_system()
    cert = certify_composition_diameter(fs.maps, fs.space.cloud, 3, 1.0, track=fs.g_indices)
    # a G anywhere but outermost sends everything off L, where the next map is constant
    assert cert.inner_max_diameter <= 1e-12


def test_json_roundtrip_of_worked_system():
    from ifsverify.engine import IfsSystem

    fs = small_system()
    G = IfsSystem.from_json(fs.maps.to_json())
    X = fs.space.cloud.points[::3]
    for a, b in zip(fs.maps.maps, G.maps):
        np.testing.assert_array_equal(a.fn(X), b.fn(X))
