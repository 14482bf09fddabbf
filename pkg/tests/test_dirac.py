import numpy as np
import pytest

from simplechar.dirac import (
    VectorField4,
    build_matrices,
    dirac_residual,
    m_of_xi,
    mixed_exact_residual,
    normality_defect,
    solve_dirac,
    spectral_projections,
)
from simplechar.errors import NotNormal, ValidationError
from simplechar.fields import GridField

SIGNS = {(0, 1): (1, 2), (0, 2): (-1, 1), (1, 0): (-1, 2), (1, 2): (1, 0), (2, 0): (1, 1), (2, 1): (-1, 0)}


def source(N=32, L=16.0, width=0.45, pol=(1.0, 0.5, -0.25, 0.75)):
    g = GridField.zeros((N,) * 3, (L,) * 3)
    base = np.exp(-np.sum(g.points() ** 2, axis=-1) / (2 * width ** 2))
    return VectorField4.from_array(np.asarray(pol)[:, None, None, None] * base[None], g)


def test_matrix_identities_are_exact_integers():
    dm = build_matrices(1.0)
    for A in dm.A:
        assert A.dtype.kind == "i"
        assert np.array_equal(A.T, -A)
        assert np.array_equal(A @ A, -np.eye(4, dtype=int))
    assert dm.sign_table() == SIGNS


def test_m_is_hermitian_with_known_spectrum():
    dm = build_matrices(0.7)
    xi = np.random.default_rng(0).normal(size=(100, 3)) * 3
    for k in range(3):
        M = m_of_xi(dm, xi, k)
        assert normality_defect(M).max() < 1e-10
        np.testing.assert_allclose(M, np.conj(np.swapaxes(M, -1, -2)), atol=1e-14)
        perp = np.sum(np.delete(xi, k, axis=1) ** 2, axis=1)
        ev = np.sort(np.linalg.eigvalsh(M), axis=-1)
        r = np.sqrt(perp + 0.49)
        np.testing.assert_allclose(ev, np.stack([-r, -r, r, r], -1), atol=1e-12)


def test_projections_are_orthogonal():
    dm = build_matrices(1.0)
    M = m_of_xi(dm, np.array([0.3, -1.2, 0.0]))
    Pp, Pm = spectral_projections(M)
    np.testing.assert_allclose(Pp + Pm, np.eye(4), atol=1e-13)
    np.testing.assert_allclose(Pp @ Pp, Pp, atol=1e-13)
    np.testing.assert_allclose(Pp, Pp.conj().T, atol=1e-13)
    np.testing.assert_allclose(Pp @ Pm, 0, atol=1e-13)


def test_non_normal_matrix_rejected():
    with pytest.raises(NotNormal):
        spectral_projections(np.array([[1.0, 1.0], [0.0, 2.0]]))


def test_zero_source_gives_zero():
    f = source(pol=(0, 0, 0, 0))
    res = solve_dirac(f, 1.0)
    assert np.abs(res.u.array()).max() == 0
    assert res.ratio == 0.0


def test_constant_quadrature_contract():
    dm = build_matrices(1.0)
    res = solve_dirac(source(), 1.0, 2, dm, "constant")
    assert mixed_exact_residual(res, dm) < 1e-10
    assert res.ratio <= 1 + 1e-6


def test_spectral_solution_residual():
    f = source(N=64)
    dm = build_matrices(1.0)
    res = solve_dirac(f, 1.0, 2, dm)
    assert dirac_residual(res.u, f, dm) < 5e-3
    with pytest.raises(ValidationError):
        mixed_exact_residual(res, dm)
