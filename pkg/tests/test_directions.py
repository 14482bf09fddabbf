import numpy as np
import pytest

from simplechar.directions import (
    CertGrid,
    check_admissibility_cond1,
    check_admissibility_cond2,
    count_clusters,
    direction_set_from,
    find_directions,
    perp_basis,
    second_order_directions,
    second_order_eps,
    sphere_candidates,
    tangent_set_sample,
)
from simplechar.errors import BudgetExhausted, DoubleCharacteristic
from simplechar.poly import normalize_second_order, parse_poly


@pytest.mark.parametrize("theta", [[1, 0, 0], [0, 0, 1], [1, 1, 1], [0.3, -0.2, 0.9]])
def test_perp_basis_orthonormal(theta):
    t = np.asarray(theta, float) / np.linalg.norm(theta)
    B = perp_basis(t)
    full = np.column_stack([t, B])
    np.testing.assert_allclose(full.T @ full, np.eye(3), atol=1e-14)


def test_helmholtz_tangent_set_is_the_unit_circle_points():
    # along e1 the double roots of 1 - tau^2 - xi_2^2 sit at xi_2 = +-1
    P = parse_poly("1 - x1^2 - x2^2", 2)
    s = tangent_set_sample(P, [1.0, 0.0], 3.0, 6001)
    assert s.distance(np.array([[0.0, 1.0], [5.0, -1.0]])) == pytest.approx([0.0, 0.0], abs=2e-3)
    assert s.distance(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0, abs=2e-3)


def test_laplacian_cannot_be_covered():
    P = parse_poly("x1^2 + x2^2", 2)
    with pytest.raises(BudgetExhausted) as info:
        find_directions(P, r0=0.05, cert_grid=CertGrid(1.0, 41), budget=6)
    assert info.value.clusters == 1


def test_helmholtz_2d_axes_leave_four_corners():
    # both axis tangent sets pass through (+-1, +-1); a third direction covers them
    P = parse_poly("1 - x1^2 - x2^2", 2)
    grid = CertGrid(2.0, 81)
    axes = direction_set_from(P, [[1, 0], [0, 1]], 0.05, cert_grid=grid)
    assert not axes.certified
    assert axes.uncovered_clusters() == 4
    np.testing.assert_allclose(np.abs(axes.uncovered).mean(axis=0), [1, 1], atol=0.05)
    ds = find_directions(P, r0=0.05, cert_grid=grid)
    assert ds.certified
    assert len(ds.directions) == 3


def test_quartic_admissibility_formula():
    P = parse_poly("x1^2 x2^2 - 1", 2)
    theta = np.array([1.0, 1.0]) / np.sqrt(2)
    eps, rep = check_admissibility_cond1(P, theta, 0.1)
    assert eps ** 2 >= 8 * 0.1 * np.sqrt(0.5)
    assert rep.max_dist_bad <= 0.1
    assert check_admissibility_cond2(P, theta, [1.0, -1.0], 3.0)


def test_second_order_plans():
    nf = normalize_second_order(parse_poly("1 - x1^2 - x2^2", 2))
    plan = second_order_directions(nf)
    assert plan.eps == pytest.approx(second_order_eps(nf))
    assert 0 < plan.eps < 1
    with pytest.raises(DoubleCharacteristic):
        second_order_directions(normalize_second_order(parse_poly("-x1^2 - x2^2 - x3^2", 3)))


def test_sphere_candidates_start_with_axes():
    c = sphere_candidates(3, 8, seed=1)
    np.testing.assert_allclose(c[:3], np.eye(3))
    np.testing.assert_allclose(np.linalg.norm(c, axis=1), 1.0)


def test_count_clusters():
    pts = np.array([[0, 0], [0.1, 0], [5, 5], [5.05, 5.1]])
    assert count_clusters(pts, 0.2) == 2
