import numpy as np
import pytest
from scipy.special import erf

from simplechar.errors import BadSetLeakage, DirectionOnCharacteristicCone
from simplechar.fields import GridField, partial_dft
from simplechar.ode import (
    FirstOrderProblem,
    integration_sides,
    recurrence_residual,
    residual,
    solve_first_order,
    solve_fourier_division,
    solve_lines,
    solve_scalar_direction,
)
from simplechar.poly import parse_poly


def exact_gaussian_response(t, q):
    # w = i int_{-inf}^t exp(iq(t - s)) exp(-s^2) ds
    return 1j * np.exp(1j * q * t - q * q / 4) * np.sqrt(np.pi) / 2 * (1 + erf(t + 1j * q / 2))


def test_indicator_closed_form():
    T = 1024
    h = 4 / T
    t = -2 + h * np.arange(T)
    g = ((t >= 0) & (t < 1)).astype(complex)[None]
    w = solve_lines(np.array([1j]), g, h, "constant")
    tc = np.clip(t, 0, 1)
    ex = np.where(t < 0, 0, np.where(t <= 1, 1j * (1 - np.exp(-tc)),
                                     1j * (1 - np.exp(-1)) * np.exp(-(t - 1))))
    assert np.abs(w[0] - ex).max() < 1e-12


@pytest.mark.parametrize("quadrature, order", [("constant", 1), ("linear", 2)])
def test_quadrature_orders(quadrature, order):
    q = np.array([0.7 + 0.2j])
    errs = []
    for T in (256, 512, 1024):
        h = 20 / T
        t = -10 + h * np.arange(T)
        w = solve_lines(q, np.exp(-t * t)[None], h, quadrature)
        errs.append(np.abs(w[0] - exact_gaussian_response(t, q[0])).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > order - 0.2)


def test_spectral_quadrature_is_exact_for_smooth_data():
    q = np.array([0.7 + 0.2j, -1.3 - 0.5j])
    T = 256
    h = 24 / T
    t = -12 + h * np.arange(T)
    w = solve_lines(q, np.tile(np.exp(-t * t), (2, 1)), h, "spectral")
    assert np.abs(w[0] - exact_gaussian_response(t, q[0])).max() < 1e-12
    # Im q < 0 integrates from +inf: w = -i int_t^inf exp(iq(t - s)) g(s) ds
    ex = -1j * np.exp(1j * q[1] * t - q[1] ** 2 / 4) * np.sqrt(np.pi) / 2 * (1 - erf(t + 1j * q[1] / 2))
    assert np.abs(w[1] - ex).max() < 1e-12


def test_branch_rules():
    q = np.array([1.0, -1.0, 1j, -1j])
    np.testing.assert_array_equal(integration_sides(q, "forward"), [True, True, True, False])
    np.testing.assert_array_equal(integration_sides(q, "outgoing"), [True, False, True, False])


def test_first_order_problem_residual():
    rng = np.random.default_rng(0)
    g = GridField(rng.normal(size=(8, 64)) + 0j, ((-4, 4), (-8, 8)))
    gm = partial_dft(g, 1)
    prob = FirstOrderProblem(rng.normal(size=8) + 1j * rng.normal(size=8), gm)
    w = solve_first_order(prob)
    assert residual(w, None, prob, method="mixed-exact") < 1e-13


def test_scalar_direction_with_absorption():
    k = 1 + 0.3j
    k2 = k * k
    P = parse_poly(f"({k2.real}+{k2.imag}i) - x1^2 - x2^2", 2)
    f = GridField.from_function(lambda x, y: np.exp(-(x ** 2 + y ** 2)), (256, 256), (40, 40))
    res = solve_scalar_direction(P, 0, f, 1e-3)
    assert residual(res.u, f, P) < 1e-6
    assert res.ratio <= res.bound


def test_bad_set_leakage_and_cone():
    P = parse_poly("1 - x1^2 - x2^2", 2)
    f = GridField.from_function(lambda x, y: np.exp(-(x ** 2 + y ** 2)), (64, 64), (32, 32))
    # xi_2 = 0.98 on this grid gives min |p'| = 2 sqrt(1 - 0.98^2) ~ 0.4
    with pytest.raises(BadSetLeakage):
        solve_scalar_direction(P, 0, f, 0.5)
    Q = parse_poly("x1 x2 - 1", 2)
    with pytest.raises(DirectionOnCharacteristicCone):
        solve_scalar_direction(Q, 0, f, 1e-3)


def test_fourier_division():
    P = parse_poly("1 + x1^2 + x2^2", 2)
    f = GridField.from_function(lambda x, y: np.exp(-(x ** 2 + y ** 2)), (256, 256), (32, 32))
    div = solve_fourier_division(f, P, 0.5)
    assert residual(div.u, f, P) < 1e-6
    assert div.min_symbol == pytest.approx(1.0)


def test_recurrence_residual_flags_wrong_solution():
    q = np.array([0.5 + 0.1j])
    g = np.ones((1, 16), dtype=complex)
    w = solve_lines(q, g, 0.1)
    assert recurrence_residual(w, q, g, 0.1) < 1e-15
    assert recurrence_residual(w * 1.01, q, g, 0.1) > 1e-4
