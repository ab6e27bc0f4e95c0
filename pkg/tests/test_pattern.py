import math

import numpy as np
import pytest

from kirigami.pattern import (
    GeometryError,
    ResolutionError,
    assign_rest_metrics,
    circle,
    clip_convex,
    coverage_fraction,
    cross,
    custom,
    diamond,
    empty_pattern,
    generate_mesh,
    is_simple,
    lobes,
    points_in_polygon,
    polygon_area,
    read_obj,
    square,
    write_obj,
    write_outline_csv,
)


def test_polygon_area_signed():
    sq = np.array([(0, 0), (2, 0), (2, 1), (0, 1)], float)
    assert polygon_area(sq) == pytest.approx(2.0)
    assert polygon_area(sq[::-1]) == pytest.approx(-2.0)


def test_self_intersecting_rejected():
    bow = [(0, 0), (1, 1), (1, 0), (0, 1)]
    assert not is_simple(np.array(bow, float))
    with pytest.raises(GeometryError):
        custom([bow])


def test_cross_parameters_validated():
    with pytest.raises(GeometryError):
        cross(10, 0)
    with pytest.raises(GeometryError):
        cross(10, 11)
    assert cross(10, 10).area == pytest.approx(100.0)


def test_cross_area():
    assert cross(60, 20).area == pytest.approx(2 * 60 * 20 - 20**2)


def test_coverage_cross_in_square():
    n = coverage_fraction(cross(60, 20), square(60))
    assert n == pytest.approx((2 * 60 * 20 - 400) / 3600, abs=1e-12)


def test_coverage_matches_monte_carlo():
    pat, sub = cross(60, 20), square(60)
    rng = np.random.default_rng(12345)
    pts = rng.uniform(-30, 30, size=(1_000_000, 2))
    mc = pat.contains(pts).mean()
    assert abs(coverage_fraction(pat, sub) - mc) < 0.003


def test_coverage_diamond_clipping():
    # arm ends are cut by the diamond edges
    pat, sub = cross(60, 20), diamond(60)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-30, 30, size=(1_000_000, 2))
    inside_sub = points_in_polygon(pts, sub.polygon())
    mc = (pat.contains(pts) & inside_sub).sum() / inside_sub.sum()
    assert abs(coverage_fraction(pat, sub) - mc) < 0.003


def test_coverage_trivial_limits():
    assert coverage_fraction(empty_pattern(), square(10)) == 0.0
    big = custom([[(-20, -20), (20, -20), (20, 20), (-20, 20)]])
    assert coverage_fraction(big, square(10)) == 1.0
    assert coverage_fraction(big, circle(5)) == pytest.approx(1.0)


def test_clip_convex_square_overlap():
    a = np.array([(0, 0), (2, 0), (2, 2), (0, 2)], float)
    b = a + 1.0
    assert polygon_area(clip_convex(a, b)) == pytest.approx(1.0)


def test_circle_resolution():
    with pytest.raises(GeometryError):
        circle(5).__class__("circle", 5.0, 0.0, 64)
    c = circle(3.0)
    assert c.area == pytest.approx(math.pi * 9, rel=2e-4)


def test_lobes_are_simple_and_star_shaped():
    for k in (1, 2, 3):
        p = lobes(k, 20.0)
        assert is_simple(p.polygons[0])
        assert p.contains(np.zeros((1, 2)))[0]


def test_mesh_no_pattern_structural():
    m = generate_mesh(empty_pattern(), square(10), 5.0)
    assert len(m.faces) >= 8
    assert not m.face_covered.any()


def test_mesh_resolution_error():
    with pytest.raises(ResolutionError):
        generate_mesh(cross(60, 20), square(60), 5.1)


@pytest.fixture(scope="module")
def cross_mesh():
    return generate_mesh(cross(60, 20), square(60), 2.5)


def test_mesh_tally_close_to_exact(cross_mesh):
    exact = coverage_fraction(cross(60, 20), square(60))
    assert abs(cross_mesh.covered_area_fraction() - exact) < 0.02 * exact


def test_mesh_quality(cross_mesh):
    m = cross_mesh
    assert m.min_angle_deg() > 15.0
    assert len(np.unique(m.vertices, axis=0)) == m.n_vertices
    n_edges = len(m.edges)
    assert m.n_vertices - n_edges + len(m.faces) == 1
    # planar orientation: all faces counter-clockwise
    assert np.all(m.face_areas() > 0)
    x = m.vertices
    e1 = x[m.faces[:, 1]] - x[m.faces[:, 0]]
    e2 = x[m.faces[:, 2]] - x[m.faces[:, 0]]
    assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)


def test_hinges_reference_two_faces(cross_mesh):
    m = cross_mesh
    for (a, b, c, d), (f0, f1) in zip(m.hinges[:200], m.hinge_faces[:200]):
        assert {a, b, c} == set(m.faces[f0])
        assert {a, b, d} == set(m.faces[f1])


@pytest.mark.parametrize("sign", [np.array([1, -1]), np.array([-1, 1]), np.array([-1, -1])])
def test_mesh_mirror_symmetric(cross_mesh, sign):
    from scipy.spatial import cKDTree

    xy = cross_mesh.vertices[:, :2]
    d, _ = cKDTree(xy).query(xy * sign)
    assert d.max() < 1e-9


def test_rest_metrics(cross_mesh):
    m1 = assign_rest_metrics(cross_mesh, 1.0)
    g = m1.planar_metric()
    assert np.array_equal(m1.rest_metric_substrate, g)
    cov = m1.face_covered
    assert np.array_equal(m1.rest_metric_face[cov], g[cov])
    assert np.all(np.isnan(m1.rest_metric_face[~cov]))
    m2 = assign_rest_metrics(cross_mesh, 2.0)
    assert np.allclose(np.sqrt(m2.rest_metric_substrate[:, 0, 0]), 0.5 * np.sqrt(g[:, 0, 0]), rtol=1e-15)
    det = lambda a: a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] ** 2
    assert np.allclose(np.sqrt(det(m2.rest_metric_substrate)), np.sqrt(det(g)) / 4, rtol=1e-14)
    assert assign_rest_metrics(m1, 1.0).rest_metric_substrate.tobytes() == m1.rest_metric_substrate.tobytes()
    with pytest.raises(ValueError):
        assign_rest_metrics(cross_mesh, 0.99)


def test_obj_and_outline_round_trip(tmp_path, cross_mesh):
    p = tmp_path / "m.obj"
    write_obj(p, cross_mesh.vertices, cross_mesh.faces)
    v, f = read_obj(p)
    assert np.array_equal(f, cross_mesh.faces)
    assert np.allclose(v, cross_mesh.vertices, rtol=1e-8, atol=1e-9)
    assert min(int(line.split()[1]) for line in p.read_text().splitlines() if line.startswith("f")) == 1
    q = tmp_path / "o.csv"
    write_outline_csv(q, cross(60, 20))
    lines = q.read_text().splitlines()
    assert lines[0] == "polygon,x_mm,y_mm"
    assert len(lines) == 13
