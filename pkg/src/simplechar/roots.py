"""Univariate roots, partial fractions and the bad-set test.

All routines accept ascending coefficient arrays and are vectorized over
leading axes so that one call can handle every perpendicular frequency of
a grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLine, NearDoubleRoot
from .poly import LineRestriction, MultiPoly, line_coefficients

TIE_WINDOW = 1e-12
MIN_SPACING = 1e-8
MIN_DERIV = 1e-12


@dataclass(frozen=True)
class RootSet:
    """Roots of one polynomial in lexicographic order with ``p'`` values."""

    roots: np.ndarray
    derivs: np.ndarray
    coeffs: np.ndarray

    def __len__(self):
        return len(self.roots)


@dataclass(frozen=True)
class PartialFractions:
    """``1/p(tau) = sum_j weights[j] / (tau - poles[j])``."""

    poles: np.ndarray
    weights: np.ndarray
    min_deriv: float

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=complex)
        return np.sum(self.weights / (tau[..., None] - self.poles), axis=-1)


def polyval_batch(coeffs, x):
    """Horner evaluation of ascending ``coeffs`` (..., N+1) at ``x`` (..., m)."""
    c = np.asarray(coeffs)
    acc = np.zeros(np.broadcast_shapes(c.shape[:-1] + (1,), np.shape(x)), dtype=complex)
    for k in range(c.shape[-1] - 1, -1, -1):
        acc = acc * x + c[..., k:k + 1]
    return acc


def deriv_coeffs(coeffs):
    c = np.asarray(coeffs)
    return c[..., 1:] * np.arange(1, c.shape[-1])


def _lex_before(a, b, window):
    tie = np.abs(a.real - b.real) <= window * np.maximum(1.0, np.maximum(abs(a), abs(b)))
    return np.where(tie, a.imag < b.imag, a.real < b.real)


def lex_sort(r, window=TIE_WINDOW):
    """Sort along the last axis by real part, then imaginary part within a tie window."""
    r = np.array(r, dtype=complex, copy=True)
    idx = np.argsort(r.real, axis=-1, kind="stable")
    r = np.take_along_axis(r, idx, axis=-1)
    N = r.shape[-1]
    for sweep in range(N):
        for start in (sweep % 2, 1 - sweep % 2):
            for i in range(start, N - 1, 2):
                a, b = r[..., i].copy(), r[..., i + 1].copy()
                swap = _lex_before(b, a, window)
                r[..., i] = np.where(swap, b, a)
                r[..., i + 1] = np.where(swap, a, b)
    return r


def roots_batch(coeffs, polish_steps: int = 5):
    """Roots and ``p'`` at the roots for a stack of polynomials.

    Companion-matrix eigenvalues, then up to ``polish_steps`` Newton steps
    that are accepted only when they reduce ``|p|``.

    Parameters
    ----------
    coeffs : ndarray, shape (..., N+1)
        Ascending coefficients with nonvanishing top entry.

    Returns
    -------
    roots, derivs : ndarray, shape (..., N)
    """
    c = np.asarray(coeffs, dtype=complex)
    N = c.shape[-1] - 1
    lead = c[..., -1]
    scale = np.abs(c).max(axis=-1)
    if np.any(np.abs(lead) <= 1e-14 * scale) or N < 1:
        raise DegenerateLine("vanishing leading coefficient")
    batch = c.shape[:-1]
    comp = np.zeros(batch + (N, N), dtype=complex)
    comp[..., 0, :] = -c[..., N - 1::-1] / lead[..., None]
    if N > 1:
        comp[..., np.arange(1, N), np.arange(N - 1)] = 1.0
    r = np.linalg.eigvals(comp)
    dc = deriv_coeffs(c)
    pv = polyval_batch(c, r)
    for _ in range(polish_steps):
        dv = polyval_batch(dc, r)
        ok = np.abs(dv) > 0
        step = np.where(ok, pv / np.where(ok, dv, 1.0), 0.0)
        cand = r - step
        pc = polyval_batch(c, cand)
        better = np.abs(pc) < np.abs(pv)
        if not better.any():
            break
        r = np.where(better, cand, r)
        pv = np.where(better, pc, pv)
    r = lex_sort(r)
    return r, polyval_batch(dc, r)


def roots(p) -> RootSet:
    """Roots of a line restriction (or an ascending coefficient vector)."""
    coeffs = p.coeffs if isinstance(p, LineRestriction) else np.asarray(p, dtype=complex)
    if isinstance(p, LineRestriction) and p.degenerate:
        raise DegenerateLine("restriction lost its leading coefficient")
    r, d = roots_batch(coeffs)
    return RootSet(r, d, np.asarray(coeffs, dtype=complex))


def partial_fractions(r: RootSet, check: bool = True, rng=None) -> PartialFractions:
    """Partial-fraction weights ``1/p'(tau_j)`` for simple roots."""
    tau = r.roots
    N = len(tau)
    if N > 1:
        gaps = np.abs(tau[:, None] - tau[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= MIN_SPACING:
            raise NearDoubleRoot(f"root spacing {gaps.min():.3e}")
    mind = float(np.abs(r.derivs).min())
    if mind <= MIN_DERIV:
        raise NearDoubleRoot(f"min |p'| {mind:.3e}")
    pf = PartialFractions(tau, 1.0 / r.derivs, mind)
    if check:
        rng = np.random.default_rng(0) if rng is None else rng
        rad = 2.0 + 2.0 * np.abs(tau).max()
        t = rad * np.exp(2j * np.pi * rng.random(5))
        direct = 1.0 / np.polynomial.polynomial.polyval(t, r.coeffs)
        err = np.abs(pf(t) - direct) / np.abs(direct)
        if err.max() > 1e-8:
            raise NearDoubleRoot(f"partial-fraction identity residual {err.max():.3e}")
    return pf


def min_deriv_batch(coeffs):
    """``min_j |p'(tau_j)|`` per polynomial, 0 where the top coefficient vanishes."""
    c = np.asarray(coeffs, dtype=complex)
    lead = np.abs(c[..., -1])
    scale = np.abs(c).max(axis=-1)
    good = lead > 1e-14 * np.maximum(scale, 1e-300)
    out = np.zeros(c.shape[:-1])
    if good.any():
        _, d = roots_batch(c[good])
        out[good] = np.abs(d).min(axis=-1)
    return out


def min_deriv_at_roots(P: MultiPoly, theta, xi_perp):
    """``min_j |p'(tau_j)|`` for ``p(tau) = P(tau*theta + xi_perp)``.

    Vectorized over leading axes of ``xi_perp``; returns 0 for restrictions
    whose top coefficient vanishes.
    """
    coeffs = line_coefficients(P, theta, xi_perp)
    out = min_deriv_batch(coeffs)
    return float(out) if out.ndim == 0 else out
