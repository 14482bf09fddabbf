import numpy as np
import pytest

from simplechar.errors import ValidationError
from simplechar.fields import (
    DomainSpec,
    GridField,
    dft_full,
    diameter,
    domain_weights,
    idft_full,
    l2_on_domain,
    mixed_norm,
    partial_dft,
    partial_idft,
    read_fields,
    rotate_resample,
    write_fields,
)


def gaussian(N=64, L=20.0, n=2):
    return GridField.from_function(lambda *x: np.exp(-sum(c * c for c in x) / 2), (N,) * n, (L,) * n)


def test_continuum_transform_of_gaussian():
    g = gaussian()
    F = dft_full(g)
    expected = np.exp(-np.sum(F.freq_points() ** 2, axis=-1) / 2)
    np.testing.assert_allclose(F.samples, expected, atol=1e-14)
    assert F.l2() == pytest.approx(g.l2(), rel=1e-13)
    np.testing.assert_allclose(idft_full(F).samples, g.samples, atol=1e-14)


def test_partial_transform_roundtrip():
    rng = np.random.default_rng(0)
    g = GridField(rng.normal(size=(16, 32)) + 0j, ((-4, 4), (-8, 8)))
    m = partial_dft(g, 1)
    assert m.axis == 1
    assert m.l2() == pytest.approx(g.l2(), rel=1e-13)
    np.testing.assert_allclose(partial_idft(m).samples, g.samples, atol=1e-13)


def test_mixed_norm_of_separable_field():
    # u(t, y) = a(t) b(y): Theta(inf, 2) = max|a| * ||b||_2
    g = GridField.from_function(lambda t, y: (1 + 0.5 * np.cos(t)) * np.exp(-y * y), (64, 64), (16, 16))
    m = partial_dft(g, 0)
    b_norm = np.sqrt(np.sum(np.exp(-2 * g.coords(1) ** 2)) * g.spacing[1])
    assert mixed_norm(m, "inf", 2) == pytest.approx(1.5 * b_norm, rel=1e-12)


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ValidationError):
        GridField(np.zeros((10, 16)), ((0, 1), (0, 1)))


def test_domain_diameters():
    assert diameter(DomainSpec.ball([0, 0], 2.5)) == 5.0
    assert diameter(DomainSpec.box_([0, 0], [3, 4])) == pytest.approx(5.0)
    d, bound = diameter(DomainSpec.union([([0, 0], 1.0), ([5, 0], 1.0)]), return_bound=True)
    assert d == pytest.approx(4.0)
    assert bound == pytest.approx(4.0)


def test_coverage_weights_measure_area():
    g = GridField.zeros((128, 128), (16, 16))
    D = DomainSpec.ball([0.3, -0.2], 3.0)
    area = domain_weights(g, D).sum() * g.cell_volume()
    assert area == pytest.approx(np.pi * 9, rel=2e-3)


def test_domain_norm_monotone():
    g = gaussian()
    small = l2_on_domain(g, DomainSpec.ball([0, 0], 1.0))
    big = l2_on_domain(g, DomainSpec.ball([0, 0], 2.0))
    assert small < big <= g.l2()


def test_quarter_turn_is_exact():
    rng = np.random.default_rng(2)
    c = rng.normal(size=2)
    g = GridField.from_function(lambda x, y: np.exp(-((x - c[0]) ** 2 + (y - c[1]) ** 2)), (64, 64), (16, 16))
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    r = rotate_resample(g, R)
    Rc = R @ c
    ref = np.exp(-np.sum((g.points() - Rc) ** 2, axis=-1))
    np.testing.assert_allclose(r.samples, ref, atol=1e-12)


def test_general_rotation_of_band_limited_field():
    g = GridField.from_function(lambda x, y: np.exp(-((x - 1) ** 2 + y ** 2) / 2), (128, 128), (32, 32))
    a = np.deg2rad(37.0)
    R = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    r = rotate_resample(g, R)
    ref = np.exp(-np.sum((g.points() - R @ [1.0, 0.0]) ** 2, axis=-1) / 2)
    assert np.abs(r.samples - ref).max() < 1e-8


def test_field_file_roundtrip(tmp_path):
    g = gaussian(16)
    m = partial_dft(g, 1)
    path = tmp_path / "f.scfd"
    write_fields(path, [g, m])
    back = read_fields(path)
    assert len(back) == 2
    assert back[1].axis == 1 and back[1].space == "mixed"
    np.testing.assert_array_equal(back[0].samples, g.samples)
    assert back[0].box == g.box
    assert path.read_bytes()[:4] == b"SCFD"
