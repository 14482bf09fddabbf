import numpy as np
import pytest

from simplechar.errors import PolyParseError, ValidationError
from simplechar.poly import (
    MultiPoly,
    discriminant,
    discriminant_line,
    is_nonsingular_sampled,
    line_coefficients,
    normalize_second_order,
    parse_poly,
    restrict_to_line,
)


def test_parse_and_print_roundtrip():
    P = parse_poly("x1^2 x2^2 - 1 + (2+3i) * x2")
    Q = parse_poly(P.to_string(), 2)
    assert P == Q
    assert P.degree == 4
    assert P([2.0, 1.0]) == pytest.approx(3 + 2 + 3j)


@pytest.mark.parametrize("text", ["x1^", "2 ** x1", "x0 + 1", "1 + + x1"])
def test_parse_rejects(text):
    with pytest.raises((PolyParseError, ValidationError)):
        parse_poly(text, 2)


def test_line_coefficients_match_direct_evaluation():
    rng = np.random.default_rng(3)
    P = parse_poly("x1^3 - 2 x1 x2^2 + (0.5+1i) x2 - 4", 2)
    theta = np.array([0.6, 0.8])
    xi = rng.normal(size=(5, 2))
    c = line_coefficients(P, theta, xi)
    for tau in (-1.3, 0.2, 2.7):
        direct = P(tau * theta + xi)
        via = np.polynomial.polynomial.polyval(tau, c.T)
        np.testing.assert_allclose(via, direct, rtol=1e-12)


def test_helmholtz_discriminant_closed_form():
    # p(tau) = k^2 - |xi_perp|^2 - tau^2 has disc = 4 (k^2 - |xi_perp|^2)
    k = 1.7
    P = parse_poly(f"{k * k} - x1^2 - x2^2", 2)
    for b in (0.0, 0.4, 2.5):
        p = restrict_to_line(P, [1.0, 0.0], [0.0, b])
        assert discriminant_line(p) == pytest.approx(4 * (k * k - b * b), rel=1e-12)


def test_discriminant_detects_double_root():
    P = parse_poly("1 - x1^2 - x2^2", 2)
    assert abs(discriminant(P, np.array([1.0, 0.0]), np.array([0.0, 1.0]))) < 1e-12


def test_normal_form_helmholtz_and_faddeev():
    nf = normalize_second_order(parse_poly("4 - x1^2 - x2^2", 2))
    assert list(nf.eps) == [1, 1]
    assert nf.b == pytest.approx(4.0)
    np.testing.assert_allclose(nf.beta, 0.0)
    nf = normalize_second_order(parse_poly("-x1^2 - x2^2 + 2i x1", 2))
    # Delta + 2 d_1 = (d_1 + 1)^2 + d_2^2 - 1
    assert nf.b == pytest.approx(-1.0)
    assert abs(nf.beta[0]) == pytest.approx(1.0)
    xi = np.random.default_rng(0).normal(size=(10, 2))
    P = parse_poly("-x1^2 - x2^2 + 2i x1", 2)
    np.testing.assert_allclose(nf.symbol(nf.eta_from_xi(xi)), P(xi), atol=1e-12)


def test_normal_form_rejects_complex_operator():
    with pytest.raises(ValidationError):
        normalize_second_order(parse_poly("1i - x1^2", 1))


def test_compose_linear_rotation():
    P = parse_poly("x1^2 x2^2 - 1", 2)
    c = 1 / np.sqrt(2)
    R = np.array([[c, -c], [c, c]])
    Q = P.compose_linear(R)
    xi = np.random.default_rng(1).normal(size=(6, 2))
    np.testing.assert_allclose(Q(xi), P(xi @ R.T), atol=1e-12)


def test_nonsingular_sampling_finds_cone_tip():
    lap = parse_poly("x1^2 + x2^2", 2)
    rep = is_nonsingular_sampled(lap, np.array([[1e-7, 0.0], [0.0, 2e-7]]))
    assert rep.verdict == "violation found"
    helm = parse_poly("1 - x1^2 - x2^2", 2)
    rep = is_nonsingular_sampled(helm, np.random.default_rng(0).normal(size=(400, 2)))
    assert rep.verdict == "no violation found"
    assert rep.min_grad > 1.9


def test_arithmetic():
    x = MultiPoly.variable(2, 0)
    y = MultiPoly.variable(2, 1)
    P = (x + y) ** 2 - x * x - y * y
    assert P == x * y * 2
    assert P.derivative(0) == y * 2
