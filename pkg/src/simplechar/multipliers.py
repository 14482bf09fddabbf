"""Smooth frequency cutoffs, partitions of unity and multiplier norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearParallel, UncertifiedDirections, ValidationError
from .fields import FREQUENCY, GridField
from .poly import MultiPoly, NormalForm2, line_coefficients

SQRT2PI = np.sqrt(2 * np.pi)


def transition(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``.

    ``e(x) / (e(x) + e(1 - x))`` with ``e(x) = exp(-1/x)``.
    """
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.5)
    a = np.exp(-1.0 / xi)
    b = np.exp(-1.0 / (1.0 - xi))
    return np.where(x >= 1, 1.0, np.where(inside, a / (a + b), 0.0))


def bump(t, eps):
    """``phi(|t| / eps)``: 0 for ``|t| <= eps``, 1 for ``|t| >= 2 eps``."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    return transition(np.abs(np.asarray(t, dtype=float)) / eps - 1.0)


@dataclass
class MultiplierField:
    """Multiplier values on a full frequency grid, all in ``[0, 1]``."""

    values: np.ndarray
    provenance: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size and (v.min() < 0 or v.max() > 1):
            raise ValidationError(f"{self.provenance}: multiplier leaves [0, 1]")
        self.values = v

    def as_field(self, grid: GridField) -> GridField:
        return grid.with_samples(self.values.astype(complex), FREQUENCY, None)


def apply_multiplier(fhat: GridField, m: MultiplierField) -> GridField:
    """Pointwise product ``m * fhat`` in frequency space."""
    if fhat.space != FREQUENCY:
        raise ValidationError("apply_multiplier expects a frequency field")
    if m.values.shape != fhat.dims:
        raise ValidationError("multiplier and field grids differ")
    return fhat.with_samples(fhat.samples * m.values)


def telescope(phis):
    """``[phi_1, phi_2 (1 - phi_1), ...]`` and the remainder ``prod (1 - phi_j)``."""
    out = []
    rest = np.ones_like(phis[0])
    for p in phis:
        out.append(p * rest)
        rest = rest * (1.0 - p)
    return out, rest


def Q_poly(nf: NormalForm2, k: int) -> MultiPoly:
    """``Q_k`` as a polynomial in the normal-form frequencies."""
    n = nf.n
    v = MultiPoly.variable(n, k)
    if nf.eps[k] != 0:
        term = nf.eps[k] * (1j * v - nf.beta[k]) ** 2
    else:
        term = 2j * nf.alpha[k] * v
    return nf.as_poly() - term


def second_order_cutoff(nf: NormalForm2, k: int, eta, eps):
    """``Phi_k = 1 - (1 - phi(Re Q_k)) (1 - phi(Im Q_k))`` at ``eta`` (..., n)."""
    Q = nf.Q(k, eta)
    a = bump(Q.real, eps)
    b = bump(Q.imag, eps)
    # a + b - ab, written so the value stays in [0, 1] in floating point
    return 1.0 - (1.0 - a) * (1.0 - b)


@dataclass
class CutoffFamily:
    """Cutoffs, their telescoped partition and the remainder multiplier."""

    cutoffs: list
    pieces: list
    remainder: MultiplierField

    def partition_error(self):
        total = sum(p.values for p in self.pieces) + self.remainder.values
        return float(np.abs(total - 1.0).max())


def second_order_cutoffs(nf: NormalForm2, eps: float, grid: GridField) -> CutoffFamily:
    """Cutoffs ``Phi_k`` for every axis and the telescoped family."""
    if any(e == 0 for e in nf.eps):
        raise ValidationError("second-order cutoffs need eps_j != 0 on every axis")
    eta = nf.eta_from_xi(grid.freq_points())
    phis = [second_order_cutoff(nf, k, eta, eps) for k in range(nf.n)]
    pieces, rest = telescope(phis)
    params = {"eps": eps}
    return CutoffFamily(
        [MultiplierField(p, f"Phi_{k + 1}", dict(params, axis=k)) for k, p in enumerate(phis)],
        [MultiplierField(p, f"Phi_{k + 1} telescoped", dict(params, axis=k))
         for k, p in enumerate(pieces)],
        MultiplierField(rest, "second-order remainder", params),
    )


def general_cutoffs(dirset, grid: GridField, r0: float | None = None,
                    allow_remainder: bool = False) -> CutoffFamily:
    """Partition ``Psi_k = psi_k prod_{l<k} (1 - psi_l)`` from a direction set.

    ``psi_k`` vanishes within ``r0`` of the sampled tangent set of direction
    ``k`` (measured in its perpendicular hyperplane) and equals one beyond
    ``2 r0``.

    Raises
    ------
    UncertifiedDirections
        If the set is not certified and ``allow_remainder`` is false.
    """
    r0 = dirset.r0 if r0 is None else r0
    if not allow_remainder and not dirset.certified:
        raise UncertifiedDirections(f"certification margin {dirset.margin:.3e} <= 0")
    pts = grid.freq_points()
    psis = [bump(dirset.distance(k, pts), r0) for k in range(len(dirset.directions))]
    pieces, rest = telescope(psis)
    params = {"r0": r0}
    fam = CutoffFamily(
        [MultiplierField(p, f"psi_{k + 1}", dict(params, direction=k)) for k, p in enumerate(psis)],
        [MultiplierField(p, f"Psi_{k + 1}", dict(params, direction=k)) for k, p in enumerate(pieces)],
        MultiplierField(rest, "general remainder", params),
    )
    if not allow_remainder and rest.max() > 0:
        raise UncertifiedDirections("partition leaves an uncovered grid point")
    return fam


# ---------------------------------------------------------------------------
# Theta(1, inf) norms of inverse transforms
# ---------------------------------------------------------------------------


def line_inverse_l1(values, dtau):
    """``int |F^-1 v|(t) dt`` for samples ``v`` on a uniform tau grid (last axis).

    Uses the continuum-normalized inverse transform; the sampled line is
    treated as one period, so a constant tail shows up as a point mass of
    ``sqrt(2 pi)`` at ``t = 0``.
    """
    v = np.asarray(values, dtype=complex)
    M = v.shape[-1]
    g = np.fft.ifft(v, axis=-1) * M * dtau / SQRT2PI
    dt = 2 * np.pi / (M * dtau)
    return np.sum(np.abs(g), axis=-1) * dt


def multiplier_theta_norm(m, axis: int, grid: GridField) -> float:
    """``sup_perp int |F^-1_axis m| dt / sqrt(2 pi)`` on the grid.

    This is the constant with which ``M_m`` acts on ``Theta(1, p)`` norms
    of partial transforms.
    """
    vals = m.values if isinstance(m, MultiplierField) else np.asarray(m)
    lines = np.moveaxis(vals, axis, -1)
    return float(line_inverse_l1(lines, grid.dxi[axis]).max() / SQRT2PI)


def sampled_theta_norm(func, theta, xi_perp, tau_max: float, n_tau: int = 1 << 14) -> float:
    """Same norm for a callable multiplier sampled densely along lines.

    ``func`` maps frequency points (..., n) to values; lines are
    ``tau * theta + xi_perp`` for ``|tau| < tau_max``.
    """
    theta = np.asarray(theta, dtype=float)
    xi_perp = np.atleast_2d(np.asarray(xi_perp, dtype=float))
    tau = np.linspace(-tau_max, tau_max, n_tau, endpoint=False)
    pts = xi_perp[:, None, :] + tau[None, :, None] * theta
    vals = func(pts)
    return float(line_inverse_l1(vals, tau[1] - tau[0]).max() / SQRT2PI)


@dataclass
class PlaneGeometry:
    """Frame of the plane spanned by ``theta`` and ``nu``."""

    theta: np.ndarray
    nu: np.ndarray
    alpha: float
    nu_perp: np.ndarray
    theta_perp: np.ndarray

    @classmethod
    def build(cls, theta, nu, min_sin=1e-6):
        th = np.asarray(theta, dtype=float)
        nu = np.asarray(nu, dtype=float)
        th = th / np.linalg.norm(th)
        nu = nu / np.linalg.norm(nu)
        c = float(np.clip(th @ nu, -1, 1))
        s = np.sqrt(max(0.0, 1 - c * c))
        if s <= min_sin:
            raise NearParallel(f"sin(alpha) = {s:.3e}")
        nu_perp = (th - c * nu) / s
        theta_perp = s * nu - c * nu_perp
        return cls(th, nu, float(np.arccos(c)), nu_perp, theta_perp)

    def ell(self, xi):
        return np.asarray(xi) @ self.theta_perp

    def xi_perpperp(self, xi):
        xi = np.asarray(xi, dtype=float)
        return (xi - np.multiply.outer(xi @ self.theta, self.theta)
                - np.multiply.outer(xi @ self.theta_perp, self.theta_perp))


def two_direction_transform(psi_check, geometry: PlaneGeometry, t, xi_perp):
    """Inverse transform along ``theta`` of a multiplier constant along ``nu``.

    ``psi_check(s, xi_pp)`` is the inverse transform of ``psi`` along
    ``nu_perp`` evaluated at ``s nu_perp + xi_pp``; ``xi_perp`` lies in
    ``theta``'s perpendicular hyperplane.
    """
    g = geometry
    sa = np.sin(g.alpha)
    t = np.asarray(t, dtype=float)
    ell = g.ell(xi_perp)
    phase = np.exp(1j * ell * t * np.cos(g.alpha) / sa)
    return phase / sa * psi_check(t / sa, g.xi_perpperp(xi_perp))


# ---------------------------------------------------------------------------
# quantities in the cutoff norm estimates
# ---------------------------------------------------------------------------


@dataclass
class MultiplierBoundEstimate:
    """Measured ``mu_1``, ``M_1``, ``M_2`` for ``q`` on its sublevel set."""

    mu1: float
    M1: float
    M2: float
    eps: float

    @property
    def core(self):
        """``mu_1 [M_1 / eps + sqrt(M_2 / eps)]``."""
        return self.mu1 * (self.M1 / self.eps + np.sqrt(self.M2 / self.eps))

    @property
    def bound(self):
        return 2 * self.core


def _real_line_poly(coeffs):
    return np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))


def sublevel_estimate(coeffs, eps, t_range, n_t: int = 200001,
                      level: float = 1.0) -> MultiplierBoundEstimate:
    """Measure ``|{|q| < level * eps}|`` and ``sup |q'|``, ``sup |q''|`` on that set.

    ``q`` is a real polynomial (ascending ``coeffs``) in ``t``; the set is
    sampled on ``n_t`` points of ``[-t_range, t_range]``. ``level = 2``
    gives the support of ``1 - phi_eps(q)``, the set on which the
    ``L1`` bound for that function actually rests.
    """
    q = _real_line_poly(coeffs)
    t = np.linspace(-t_range, t_range, n_t)
    inside = np.abs(q(t)) < level * eps
    if not inside.any():
        return MultiplierBoundEstimate(0.0, 0.0, 0.0, eps)
    dt = t[1] - t[0]
    return MultiplierBoundEstimate(
        float(inside.sum() * dt),
        float(np.abs(q.deriv(1)(t[inside])).max()),
        float(np.abs(q.deriv(2)(t[inside])).max()) if q.degree() >= 2 else 0.0,
        eps,
    )


def cutoff_check_l1(coeffs, eps, t_range, n_t: int = 1 << 16) -> float:
    """``||F^-1 (1 - phi_eps(q))||_L1`` for a real polynomial ``q`` in ``t``.

    The compactly supported part of ``phi_eps(q)``; the constant tail is
    a point mass and is not part of the bound being checked.
    """
    q = _real_line_poly(coeffs)
    t = np.linspace(-t_range, t_range, n_t, endpoint=False)
    v = 1.0 - bump(q(t), eps)
    return float(line_inverse_l1(v, t[1] - t[0]))


def is_constant_part(coeffs, tol=1e-14):
    """True when the line polynomial is constant, so its cutoff is constant too."""
    c = np.asarray(coeffs, dtype=float)
    return bool(np.all(np.abs(c[1:]) <= tol * max(1.0, np.abs(c).max())))


def cutoff_line_coeffs(nf: NormalForm2, k: int, j: int, xi):
    """Coefficients in ``t`` of ``Re Q_k`` and ``Im Q_k`` along ``t e_j + xi``."""
    theta = np.zeros(nf.n)
    theta[j] = 1.0
    c = line_coefficients(Q_poly(nf, k), theta, np.asarray(xi, dtype=float), degree=2)
    return c.real, c.imag


def remainder_diameter(rem: MultiplierField, grid: GridField, axis: int = 0) -> float:
    """Largest 1-D measure of the remainder support along ``axis`` lines."""
    sup = rem.values > 0
    if not sup.any():
        return 0.0
    return float(np.sum(sup, axis=axis).max() * grid.dxi[axis])
