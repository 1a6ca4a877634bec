import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
import shapely
from scipy.spatial import ConvexHull

from oracles import affine_cross_ratio, klein_distance
from projglue.errors import (
    CollinearityViolation,
    DegenerateQuadruple,
    EmptyInput,
    NotInClosure,
    NotOnBoundary,
    OutsideDomain,
)
from projglue.projcore import (
    ConvexBody,
    ProjMap,
    Ray,
    Segment,
    convexity_sample_oracle,
    cross_ratio,
    eigen_split,
    hausdorff_hulls,
    hilbert_distance,
    hull_distance,
    is_c1_point,
    supporting_halfspace,
)

SQUARE = ConvexBody.from_chart_points([[0, 0], [1, 0], [1, 1], [0, 1]])


def line(t):
    """Point t of the affine line inside R^2."""
    return np.array([t, 1.0])


INF = np.array([1.0, 0.0])


# ---------------------------------------------------------------- rays and maps


def test_ray_normalises_and_keeps_sign():
    r = Ray([3.0, 4.0])
    assert np.allclose(r.v, [0.6, 0.8])
    assert not r.isclose(-r)


def test_projmap_unimodular_and_acts_on_rays():
    g = ProjMap(np.diag([2.0, 3.0, 4.0]))
    assert abs(abs(np.linalg.det(g.m)) - 1.0) < 1e-12
    assert g(Ray([0, 0, 1])).isclose([0, 0, 1])


def test_segment_contains_midpoint_only():
    s = Segment(Ray([1, 0, 1]), Ray([0, 1, 1]))
    assert s.contains(s.point(0.5).v)
    assert not s.contains([1, 1, -1])


# ---------------------------------------------------------------- cross-ratio


@given(st.floats(-50, 50).filter(lambda t: abs(t - 1) > 1e-3))
def test_cross_ratio_normalisation(t):
    assert cross_ratio(line(0), line(1), line(t), INF) == pytest.approx(t, rel=1e-12, abs=1e-12)


def test_cross_ratio_examples():
    assert cross_ratio(line(-1), line(0), line(0.5), line(1)) == pytest.approx(3.0, rel=1e-14)
    assert cross_ratio(line(-1), line(0.3), line(0.3), line(1)) == pytest.approx(1.0, rel=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4, unique=True))
def test_cross_ratio_matches_affine_formula(pts):
    a, x, y, b = pts
    if min(abs(x - a), abs(b - y)) < 1e-2:
        return
    got = cross_ratio(line(a), line(x), line(y), line(b))
    assert got == pytest.approx(affine_cross_ratio(a, x, y, b), rel=1e-9)


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_cross_ratio_projective_invariance(seed):
    rng = np.random.default_rng(seed)
    p, q = rng.normal(size=(2, 4))
    coeffs = np.sort(rng.uniform(-2, 2, size=4))
    pts = [p + c * q for c in coeffs]
    g = rng.normal(size=(4, 4))
    if np.linalg.cond(g) > 1e3:
        return
    before = cross_ratio(*pts)
    after = cross_ratio(*[g @ x for x in pts])
    assert after == pytest.approx(before, rel=1e-10)


def test_cross_ratio_errors():
    with pytest.raises(CollinearityViolation):
        cross_ratio([1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1])
    with pytest.raises(DegenerateQuadruple):
        cross_ratio(line(0), line(0), line(1), line(2))


# ---------------------------------------------------------------- hilbert metric


def test_interval_distance():
    interval = ConvexBody.from_chart_points([[-1.0], [1.0]])
    assert hilbert_distance(interval, [0, 1], [0.5, 1]) == pytest.approx(0.5 * math.log(3), rel=1e-14)
    assert hilbert_distance(interval, [0.2, 1], [0.2, 1]) == 0.0


def test_outside_point_rejected():
    with pytest.raises(OutsideDomain):
        hilbert_distance(SQUARE, [0.5, 0.5, 1], [2, 2, 1])


@settings(max_examples=200)
@given(st.integers(0, 10**6))
def test_klein_disk_matches_hyperbolic_distance(seed):
    rng = np.random.default_rng(seed)
    ball = ConvexBody.klein_ball(2)
    x, y = (rng.uniform(-1, 1, 2) * rng.uniform(0, 0.95) for _ in range(2))
    x, y = [v / max(1.0, np.linalg.norm(v) / 0.95) for v in (x, y)]
    got = hilbert_distance(ball, np.append(x, 1), np.append(y, 1))
    assert got == pytest.approx(klein_distance(x, y), abs=1e-9)


def _random_inside(rng, body, n):
    pts = body.chart_points()
    w = rng.dirichlet(np.ones(len(pts)), size=n)
    return np.hstack([w @ pts, np.ones((n, 1))])


def test_triangle_inequality_and_symmetry():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(9, 2))
    body = ConvexBody.from_chart_points(pts)
    samples = _random_inside(rng, body, 300)
    for x, y, z in samples.reshape(100, 3, 3):
        dxy = hilbert_distance(body, x, y)
        assert dxy == pytest.approx(hilbert_distance(body, y, x), rel=1e-9, abs=1e-12)
        assert dxy <= hilbert_distance(body, x, z) + hilbert_distance(body, z, y) + 1e-9


def test_inclusion_monotonicity():
    rng = np.random.default_rng(2)
    inner = ConvexBody.from_chart_points([[0.1, 0.1], [0.9, 0.1], [0.9, 0.9], [0.1, 0.9]])
    for x, y in _random_inside(rng, inner, 200).reshape(100, 2, 3):
        assert hilbert_distance(inner, x, y) >= hilbert_distance(SQUARE, x, y) - 1e-12


# ---------------------------------------------------------------- support


def test_support_on_square_edge():
    cert = supporting_halfspace(SQUARE, [0.5, 0, 1])
    # the functional restricted to the chart is a multiple of x_2
    assert cert.functional[0] == pytest.approx(0, abs=1e-12)
    assert cert.functional[1] > 0
    assert supporting_halfspace(SQUARE, [0.5, 0.5, 1]) is None
    with pytest.raises(NotInClosure):
        supporting_halfspace(SQUARE, [3, 3, 1])


def test_support_certificate_on_random_polytope_vertices():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(12, 2))
    body = ConvexBody.from_chart_points(pts)
    for v in body.vertices[ConvexHull(pts).vertices]:
        cert = supporting_halfspace(body, v)
        assert cert is not None
        assert cert.min_on_vertices >= -1e-12
        assert abs(cert.value_at_point) < 1e-12


def test_c1_points():
    assert is_c1_point(SQUARE, [0.5, 0, 1])[0]
    assert not is_c1_point(SQUARE, [1, 1, 1])[0]
    disk = ConvexBody.sampled_disk(1024)
    ok, wit = is_c1_point(disk, disk.vertices[17])
    assert ok and wit.tolerance == pytest.approx(2 * 2 * np.pi / 1024)
    with pytest.raises(NotOnBoundary):
        is_c1_point(SQUARE, [0.5, 0.5, 1])


# ---------------------------------------------------------------- spectra


def test_eigen_split_diagonal_and_rotation():
    parts = eigen_split(np.diag([1 / 3, 3.0, 1.0]))
    assert [p.value.real for p in parts] == pytest.approx([3, 1, 1 / 3])
    assert np.allclose(np.abs(parts[0].vector), [0, 1, 0])
    th = 0.7
    rot = eigen_split(np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]))
    assert len(rot) == 1 and rot[0].kind != "real"
    assert rot[0].modulus == pytest.approx(1.0) and rot[0].angle == pytest.approx(th)


@settings(max_examples=50)
@given(st.integers(0, 10**6))
def test_eigen_split_residuals(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4))
    for p in eigen_split(g):
        if p.kind == "real":
            v = p.vector
            assert np.linalg.norm(g @ v - p.value.real * v) <= 1e-9 * np.linalg.norm(g)


# ---------------------------------------------------------------- hulls and oracle


def test_hausdorff_hulls():
    a = [[0, 0], [1, 0], [0, 1]]
    assert hausdorff_hulls(a, a) == 0.0
    assert hausdorff_hulls(a, [[0, 0], [2, 0], [0, 1]]) == pytest.approx(1.0)


def test_oracle_adjacent_squares_pass():
    right = ConvexBody.from_chart_points([[1, 0], [2, 0], [2, 1], [1, 1]])
    assert convexity_sample_oracle([SQUARE, right], 2000).passed


def test_oracle_corner_squares_fail():
    diag = ConvexBody.from_chart_points([[1, 1], [2, 1], [2, 2], [1, 2]])
    res = convexity_sample_oracle([SQUARE, diag], 2000)
    assert not res.passed
    assert res.counterexample is not None


def test_oracle_empty():
    with pytest.raises(EmptyInput):
        convexity_sample_oracle([], 10)


def test_hull_distance_on_near_degenerate_arc():
    p = [[0.6687403049764219, 0.6687403049764221], [-0.6687403049764219, 0.6687403049764223],
         [-0.2207524600161782, 0.7809788144085638], [0.2207524600161782, 0.7809788144085638]]
    assert hausdorff_hulls(p, p) < 1e-12


@settings(max_examples=200)
@given(st.integers(0, 10**6), st.integers(1, 12))
def test_hull_distance_matches_planar_oracle(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 2))
    x = rng.normal(size=2) * 2
    oracle = shapely.MultiPoint(pts).convex_hull.distance(shapely.Point(x))
    assert hull_distance(x, pts) == pytest.approx(oracle, abs=1e-9)
