"""Directional ODE solves in mixed space.

Along an axis ``t`` with perpendicular frequency ``xi_perp`` fixed, the
equation ``P(D) u = f`` becomes ``p(D_t) w = g`` with ``D_t = -i d/dt``.
Partial fractions reduce it to first-order problems

    (-i d/dt - q) w = g,   w(t) = i * integral_{t0}^{t} exp(iq(t - t')) g(t') dt'

with ``t0 = -inf`` when ``Im q >= 0`` and ``t0 = +inf`` otherwise, so the
exponential never exceeds one on the integration range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BadSetLeakage, DirectionOnCharacteristicCone, DivisionOnZeroSet, ValidationError
from .fields import (
    MIXED,
    PHYSICAL,
    GridField,
    dft_full,
    frequency_to_mixed,
    idft_full,
    mixed_norm,
    partial_dft,
    partial_idft,
)
from .poly import MultiPoly, NormalForm2, line_coefficients
from .roots import roots_batch

log = logging.getLogger(__name__)

QUADRATURES = ("constant", "linear", "spectral")
BRANCHES = ("forward", "outgoing")
REAL_TOL = 1e-10
SUPPORT_TOL = 1e-13


# ---------------------------------------------------------------------------
# first-order integrator
# ---------------------------------------------------------------------------


def phi1(z):
    """``(exp(z) - 1) / z`` with the removable singularity filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-3
    zs = np.where(small, z, 0)
    series = 1 + zs / 2 * (1 + zs / 3 * (1 + zs / 4 * (1 + zs / 5 * (1 + zs / 6))))
    zb = np.where(small, 1.0, z)
    return np.where(small, series, np.expm1(zb) / zb)


def phi2(z):
    """``(exp(z) - 1 - z) / z^2``, i.e. ``int_0^1 exp(z r) (1 - r) dr``."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-2
    zs = np.where(small, z, 0)
    series = 0.5 + zs / 6 * (1 + zs / 4 * (1 + zs / 5 * (1 + zs / 6 * (1 + zs / 7))))
    zb = np.where(small, 1.0, z)
    return np.where(small, series, (np.expm1(zb) - zb) / zb ** 2)


def integration_sides(q, branch="forward"):
    """True where the integral starts at ``-inf`` (forward in t).

    Roots with ``|Im q| <= REAL_TOL * max(1, |q|)`` count as real; the
    branch rule decides them: "forward" always integrates from ``-inf``,
    "outgoing" from ``-inf`` when ``Re q >= 0`` and from ``+inf`` otherwise
    (the limit of a vanishing positive absorption for ``k^2 - |xi|^2``).
    """
    if branch not in BRANCHES:
        raise ValidationError(f"unknown branch rule {branch!r}")
    q = np.asarray(q, dtype=complex)
    real = np.abs(q.imag) <= REAL_TOL * np.maximum(1.0, np.abs(q))
    fwd = q.imag >= 0
    if branch == "forward":
        return np.where(real, True, fwd)
    return np.where(real, q.real >= 0, fwd)


def increments(q, g, h, quadrature="constant", forward=None):
    """Per-cell propagation factors and increments for the scan.

    Parameters
    ----------
    q : ndarray, shape (L,)
    g : ndarray, shape (L, T)
    h : float
    quadrature : {"constant", "spectral"}
        "constant" treats ``g`` as constant ``g[m]`` on ``[t_m, t_m + h)``;
        "linear" interpolates linearly between ``g[m]`` and ``g[m+1]`` and
        suits data that is not periodic along t;
        "spectral" uses its periodic trigonometric interpolant.
    forward : bool ndarray, shape (L,)

    Returns
    -------
    a : ndarray (L,)
    inc : ndarray (L, T)
    """
    q = np.asarray(q, dtype=complex)
    g = np.asarray(g, dtype=complex)
    sgn = np.where(forward, 1.0, -1.0)
    a = np.exp(1j * sgn * q * h)
    if quadrature == "constant":
        # forward: g (e^{iqh}-1)/q ; backward: g (e^{-iqh}-1)/q
        fac = sgn * 1j * h * phi1(1j * sgn * q * h)
        return a, g * fac[:, None]
    if quadrature == "linear":
        z = (1j * sgn * q * h)[:, None]
        p1, p2 = phi1(z), phi2(z)
        g1 = np.concatenate([g[:, 1:], np.zeros_like(g[:, :1])], axis=-1)
        fw = 1j * h * (g * (p1 - p2) + g1 * p2)
        bw = -1j * h * (g * p2 + g1 * (p1 - p2))
        return a, np.where(np.asarray(forward)[:, None], fw, bw)
    if quadrature == "spectral":
        T = g.shape[-1]
        kappa = 2 * np.pi * np.fft.fftfreq(T, d=h)
        z = 1j * (kappa[None, :] - q[:, None]) * h
        ker = phi1(z)
        if T % 2 == 0:
            # the Nyquist mode is split evenly between +kappa and -kappa
            zm = 1j * (-kappa[T // 2] - q) * h
            ker[:, T // 2] = 0.5 * (ker[:, T // 2] + phi1(zm))
        lines = np.fft.ifft(np.fft.fft(g, axis=-1) * ker, axis=-1)
        pref = np.where(forward, 1j * h * a, -1j * h)
        return a, lines * pref[:, None]
    raise ValidationError(f"unknown quadrature {quadrature!r}")


def solve_lines(q, g, h, quadrature="constant", branch="forward"):
    """Solve ``(-i d/dt - q) w = g`` on each row of ``g`` with zero inflow."""
    q = np.asarray(q, dtype=complex).ravel()
    g = np.asarray(g, dtype=complex)
    fwd = integration_sides(q, branch)
    a, inc = increments(q, g, h, quadrature, fwd)
    return _kernels.scan(a, inc, fwd)


def recurrence_residual(w, q, g, h, quadrature="constant", branch="forward"):
    """Max relative defect of ``w`` in the discrete recurrence that defines it."""
    q = np.asarray(q, dtype=complex).ravel()
    w = np.asarray(w)
    fwd = integration_sides(q, branch)
    a, inc = increments(q, g, h, quadrature, fwd)
    r = np.zeros_like(w)
    f, b = fwd, ~fwd
    r[f, 1:] = w[f, 1:] - a[f, None] * w[f, :-1] - inc[f, :-1]
    r[f, 0] = w[f, 0]
    r[b, :-1] = w[b, :-1] - a[b, None] * w[b, 1:] - inc[b, :-1]
    r[b, -1] = w[b, -1]
    scale = max(np.abs(w).max(), np.abs(inc).max(), 1e-300)
    return float(np.abs(r).max() / scale)


def _to_lines(a, axis):
    """Move ``axis`` last and flatten the rest: (L, T)."""
    b = np.moveaxis(a, axis, -1)
    return b.reshape(-1, b.shape[-1]), b.shape


def _from_lines(lines, shape, axis):
    return np.moveaxis(lines.reshape(shape), -1, axis)


@dataclass
class FirstOrderProblem:
    """``(-i d/dt - q) w = g`` for every perpendicular frequency.

    Attributes
    ----------
    q : ndarray
        One value per perpendicular frequency: the shape of ``g`` with the
        retained axis removed.
    g : GridField
        Mixed-space right-hand side.
    branch : str
        Rule for real ``q``, see :func:`integration_sides`.
    quadrature : str
    """

    q: np.ndarray
    g: GridField
    branch: str = "forward"
    quadrature: str = "constant"

    def __post_init__(self):
        if self.g.space != MIXED:
            raise ValidationError("first-order problems need a mixed-space right-hand side")
        perp = tuple(d for j, d in enumerate(self.g.dims) if j != self.g.axis)
        q = np.asarray(self.q, dtype=complex)
        if q.ndim == 0:
            q = np.full(perp, complex(q))
        if q.shape != perp:
            raise ValidationError(f"q has shape {q.shape}, expected {perp}")
        self.q = q

    @property
    def h(self):
        return self.g.spacing[self.g.axis]

    def lines(self):
        gl, shape = _to_lines(self.g.samples, self.g.axis)
        return self.q.ravel(), gl, shape


def solve_first_order(prob: FirstOrderProblem) -> GridField:
    """Exact-per-cell exponential integrator for one first-order problem."""
    q, gl, shape = prob.lines()
    w = solve_lines(q, gl, prob.h, prob.quadrature, prob.branch)
    return prob.g.with_samples(_from_lines(w, shape, prob.g.axis))


def first_order_residual(w: GridField, prob: FirstOrderProblem) -> float:
    q, gl, _ = prob.lines()
    wl, _ = _to_lines(w.samples, prob.g.axis)
    return recurrence_residual(wl, q, gl, prob.h, prob.quadrature, prob.branch)


# ---------------------------------------------------------------------------
# direction solves
# ---------------------------------------------------------------------------


@dataclass
class DirectionResult:
    """Solution of one directional piece with its measured estimate."""

    u: GridField
    u_mixed: GridField
    f_mixed: GridField
    axis: int
    bound: float
    min_deriv: float
    pieces: list = field(default_factory=list, repr=False)

    @property
    def norm_u(self):
        return mixed_norm(self.u_mixed, "inf", 2)

    @property
    def norm_f(self):
        return mixed_norm(self.f_mixed, 1, 2)

    @property
    def ratio(self):
        nf = self.norm_f
        return self.norm_u / nf if nf > 0 else 0.0

    def mixed_exact_residual(self):
        """Largest recurrence defect over the first-order pieces."""
        if not self.pieces:
            return 0.0
        return max(first_order_residual(w, prob) for prob, w in self.pieces)


def perp_frequencies(f: GridField, axis: int):
    """Perpendicular frequency points for a mixed field, ``xi_axis = 0``."""
    grids = [f.freqs(j) if j != axis else np.zeros(1) for j in range(f.n)]
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([np.squeeze(m, axis=axis) for m in mesh], axis=-1)
    return pts


def _support_lines(gl, tol=SUPPORT_TOL):
    amp = np.abs(gl).max(axis=-1)
    top = amp.max() if amp.size else 0.0
    return amp > tol * top if top > 0 else np.zeros(amp.shape, dtype=bool)


def _as_mixed(f: GridField, axis: int) -> GridField:
    if f.space == PHYSICAL:
        return partial_dft(f, axis)
    if f.space == MIXED and f.axis == axis:
        return f
    if f.space == MIXED:
        return partial_dft(partial_idft(f), axis)
    return frequency_to_mixed(f, axis)


def solve_scalar_direction(P: MultiPoly, axis: int, f_k: GridField, eps: float,
                           quadrature: str = "spectral", branch: str = "forward",
                           keep_pieces: bool = False) -> DirectionResult:
    """Partial-fraction solve of ``P(D) u = f_k`` along grid axis ``axis``.

    For each perpendicular frequency the restriction ``p`` is factored and
    ``u = sum_j w_j`` with ``(D_t - tau_j) w_j = f / p'(tau_j)``.

    Raises
    ------
    BadSetLeakage
        If a perpendicular frequency carrying data has ``min |p'| <= eps``.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    fm = _as_mixed(f_k, axis)
    theta = np.zeros(fm.n)
    theta[axis] = 1.0
    lead = P.principal_part()(theta)
    if abs(lead) <= 1e-14 * max(1.0, max(abs(c) for c in P.terms.values())):
        raise DirectionOnCharacteristicCone(f"principal part vanishes on axis {axis}")
    xp = perp_frequencies(fm, axis)
    coeffs = line_coefficients(P, theta, xp.reshape(-1, fm.n))
    gl, shape = _to_lines(fm.samples, axis)
    sup = _support_lines(gl)
    N = coeffs.shape[-1] - 1
    h = fm.spacing[axis]
    out = np.zeros_like(gl)
    pieces = []
    min_d = np.inf
    if sup.any():
        r, d = roots_batch(coeffs[sup])
        min_d = float(np.abs(d).min())
        if min_d <= eps:
            raise BadSetLeakage(f"min |p'| = {min_d:.3e} <= eps = {eps:.3e} on the data support")
        gs = gl[sup]
        for j in range(N):
            g = gs / d[:, j:j + 1]
            w = solve_lines(r[:, j], g, h, quadrature, branch)
            out[sup] += w
            if keep_pieces:
                q_full = np.zeros(gl.shape[0], dtype=complex)
                q_full[sup] = r[:, j]
                g_full = np.zeros_like(gl)
                g_full[sup] = g
                w_full = np.zeros_like(gl)
                w_full[sup] = w
                prob = FirstOrderProblem(q_full.reshape(shape[:-1]),
                                         fm.with_samples(_from_lines(g_full, shape, axis)),
                                         branch, quadrature)
                pieces.append((prob, fm.with_samples(_from_lines(w_full, shape, axis))))
    um = fm.with_samples(_from_lines(out, shape, axis))
    res = DirectionResult(partial_idft(um), um, fm, axis, N / eps, min_d, pieces)
    log.debug("axis %d: ratio %.4g vs bound %.4g", axis, res.ratio, res.bound)
    return res


def _axis_sign(nf: NormalForm2, k: int) -> float:
    col = np.asarray(nf.basis)[:, k]
    if abs(abs(col[k]) - 1.0) > 1e-12:
        raise ValidationError("normal-form axis is not a grid axis; rotate the data first")
    return float(np.sign(col[k]))


def solve_second_order_direction(nf: NormalForm2, k: int, f_k: GridField, eps: float,
                                 quadrature: str = "spectral", branch: str = "forward"
                                 ) -> DirectionResult:
    """Two-term factorized solve along normal-form axis ``k``.

    With ``S = sqrt(-eps_k Q_k)`` (branch ``Im S >= 0``) the restriction
    factors as ``-eps_k c^2 (tau - tau_+)(tau - tau_-)`` where
    ``tau_pm = -i (beta_k +- S) / c`` and ``c = s_k`` up to orientation,
    giving ``u = (w_+ - w_-) / (2 i eps_k c S)``.

    Raises
    ------
    BadSetLeakage
        If data reaches ``|Q_k| <= eps``.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if nf.eps[k] == 0:
        raise ValidationError("axis has no second-order term; use the degenerate solver")
    sig = _axis_sign(nf, k)
    c = sig * nf.scale[k]
    ek = float(nf.eps[k])
    fm = _as_mixed(f_k, k)
    xp = perp_frequencies(fm, k).reshape(-1, fm.n)
    Qk = nf.Q(k, nf.eta_from_xi(xp))
    gl, shape = _to_lines(fm.samples, k)
    sup = _support_lines(gl)
    h = fm.spacing[k]
    out = np.zeros_like(gl)
    min_q = np.inf
    if sup.any():
        Qs = Qk[sup]
        min_q = float(np.abs(Qs).min())
        if min_q <= eps:
            raise BadSetLeakage(f"min |Q_k| = {min_q:.3e} <= eps = {eps:.3e} on the data support")
        S = np.sqrt(-ek * Qs.astype(complex))
        S = np.where(S.imag < 0, -S, S)
        tp = -1j * (nf.beta[k] + S) / c
        tm = -1j * (nf.beta[k] - S) / c
        gs = gl[sup]
        wp = solve_lines(tp, gs, h, quadrature, branch)
        wm = solve_lines(tm, gs, h, quadrature, branch)
        out[sup] = (wp - wm) / (2j * ek * c * S)[:, None]
    um = fm.with_samples(_from_lines(out, shape, k))
    return DirectionResult(partial_idft(um), um, fm, k, 1.0 / (nf.scale[k] * np.sqrt(eps)),
                           2 * nf.scale[k] * np.sqrt(min_q))


def solve_factorized_direction(P: MultiPoly, axis: int, f: GridField,
                               quadratures=("spectral", "linear"), branch: str = "forward"
                               ) -> DirectionResult:
    """Sequential solve of a line restriction of degree two.

    With ``p(tau) = c (tau - tau_+)(tau - tau_-)`` and ``Im tau_+ >= Im tau_-``
    the solution is ``u = (D_t - tau_+)^{-1} (D_t - tau_-)^{-1} f / c``. The
    inner solve costs at most the ``L1`` norm of the data, the outer one a
    factor ``1 / Im tau_+``, so no division by ``p'`` occurs and double
    roots are harmless. The first step sees compactly supported data; the
    second does not, hence separate quadratures.
    """
    fm = _as_mixed(f, axis)
    theta = np.zeros(fm.n)
    theta[axis] = 1.0
    xp = perp_frequencies(fm, axis).reshape(-1, fm.n)
    coeffs = line_coefficients(P, theta, xp)
    if coeffs.shape[-1] != 3 or np.abs(coeffs[..., 2]).min() == 0:
        raise ValidationError("factorized solve needs degree two along the axis")
    gl, shape = _to_lines(fm.samples, axis)
    c = coeffs[:, 2]
    r, _ = roots_batch(coeffs)
    swap = r[:, 0].imag > r[:, 1].imag
    tp = np.where(swap, r[:, 0], r[:, 1])
    tm = np.where(swap, r[:, 1], r[:, 0])
    h = fm.spacing[axis]
    w = solve_lines(tm, gl / c[:, None], h, quadratures[0], branch)
    u = solve_lines(tp, w, h, quadratures[1], branch)
    sup = _support_lines(gl)
    gam = float(np.min(np.abs(c[sup]) * tp[sup].imag)) if sup.any() else np.inf
    bound = 1.0 / gam if gam > 0 else np.inf
    um = fm.with_samples(_from_lines(u, shape, axis))
    return DirectionResult(partial_idft(um), um, fm, axis, bound, np.inf)


@dataclass
class DivisionResult:
    u: GridField
    u_mixed: GridField
    f_mixed: GridField
    support_diameter: float
    bound: float
    min_symbol: float

    @property
    def ratio(self):
        nf = mixed_norm(self.f_mixed, 1, 2)
        return mixed_norm(self.u_mixed, "inf", 2) / nf if nf > 0 else 0.0


def solve_fourier_division(f_rem: GridField, P, eps: float, axis: int = 0,
                           tol: float = SUPPORT_TOL) -> DivisionResult:
    """``u = F^-1 (f^ / P)`` for data whose spectrum avoids ``|P| <= eps``.

    ``P`` is a :class:`MultiPoly` or a callable on frequency points (..., n).
    The reported bound is ``d / eps`` with ``d`` the largest one-dimensional
    measure of the frequency support along ``axis``.
    """
    if not eps > 0:
        raise ValidationError("eps must be positive")
    F = f_rem if f_rem.space == "frequency" else dft_full(f_rem)
    vals = np.asarray(P(F.freq_points()), dtype=complex)
    amp = np.abs(F.samples)
    top = amp.max()
    sup = amp > tol * top if top > 0 else np.zeros(amp.shape, dtype=bool)
    min_p = float(np.abs(vals[sup]).min()) if sup.any() else np.inf
    if sup.any() and min_p <= eps:
        raise DivisionOnZeroSet(f"min |P| = {min_p:.3e} <= eps = {eps:.3e} on the support")
    U = np.where(sup, F.samples / np.where(sup, vals, 1.0), 0)
    d = float(np.sum(sup, axis=axis).max() * F.dxi[axis]) if sup.any() else 0.0
    Uf = F.with_samples(U)
    return DivisionResult(idft_full(Uf), frequency_to_mixed(Uf, axis),
                          frequency_to_mixed(F, axis), d, d / eps, min_p)


def solve_degenerate_first_order(nf: NormalForm2, f: GridField, k: int = 0,
                                 quadrature: str = "spectral") -> DirectionResult:
    """Solve when axis ``k`` carries only the first-order term ``2 alpha_k d_k``.

    Along ``t = y_k`` the equation is ``2 alpha_k w' + Q w = g``; as a
    first-order problem ``q = i Q / (2 alpha_k c)`` and right-hand side
    ``g / (2 i alpha_k c)``, integrated from the side where the kernel decays.
    The sup over t is bounded by ``||g||_L1 / (2 |alpha_k|)``.
    """
    if nf.eps[k] != 0 or nf.alpha[k] == 0:
        raise ValidationError("degenerate solve needs eps_k = 0 and alpha_k != 0")
    c = _axis_sign(nf, k) * nf.scale[k]
    ak = float(nf.alpha[k])
    fm = _as_mixed(f, k)
    xp = perp_frequencies(fm, k).reshape(-1, fm.n)
    Q = nf.Q(k, nf.eta_from_xi(xp))
    gl, shape = _to_lines(fm.samples, k)
    q = 1j * Q / (2 * ak * c)
    w = solve_lines(q, gl / (2j * ak * c), fm.spacing[k], quadrature, "forward")
    um = fm.with_samples(_from_lines(w, shape, k))
    return DirectionResult(partial_idft(um), um, fm, k, 1.0 / (2 * abs(ak) * abs(c)), np.inf)


@dataclass(frozen=True)
class DimensionPlan:
    """Axes that carry the symbol and spectator axes it ignores."""

    active: tuple
    spectator: tuple

    def restrict(self, nf: NormalForm2) -> NormalForm2:
        """Normal form of the lower-dimensional core."""
        a = list(self.active)
        basis = np.asarray(nf.basis)[np.ix_(a, a)]
        return NormalForm2(nf.eps[a], nf.alpha[a], nf.Bconst, nf.beta[a], nf.b, basis, nf.scale[a])

    def solve(self, f: GridField, core_solver, b: float | None = None):
        """Apply ``core_solver`` to every spectator slice and reassemble.

        With no active axes the symbol is the constant ``b`` and ``u = f / b``.
        """
        if not self.active:
            if not b:
                raise DivisionOnZeroSet("constant symbol vanishes")
            return f.with_samples(f.samples / b)
        a = list(self.active)
        s = list(self.spectator)
        perm = s + a
        arr = np.transpose(f.samples, perm)
        sub_box = tuple(f.box[j] for j in a)
        flat = arr.reshape((-1,) + arr.shape[len(s):])
        out = np.empty_like(flat)
        for i in range(flat.shape[0]):
            sl = GridField(flat[i], sub_box)
            out[i] = core_solver(sl).samples
        out = out.reshape(arr.shape)
        return f.with_samples(np.transpose(out, np.argsort(perm)))


def reduce_dimension(nf: NormalForm2, tol: float = 0.0) -> DimensionPlan:
    """Split off axes with ``eps_j = alpha_j = 0``; they must be grid axes."""
    spect = tuple(j for j in range(nf.n) if nf.eps[j] == 0 and abs(nf.alpha[j]) <= tol)
    for j in spect:
        _axis_sign(nf, j)
    active = tuple(j for j in range(nf.n) if j not in spect)
    return DimensionPlan(active, spect)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

FD_MARGIN = 8


def fd_weights(order: int, offsets) -> np.ndarray:
    """Finite-difference weights at 0 for the given offsets (Fornberg's recursion)."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def central_stencil(order: int, accuracy: int = 8):
    r = (order + 1) // 2 + accuracy // 2 - 1
    offs = np.arange(-r, r + 1)
    return offs, fd_weights(order, offs)


def apply_fd(P: MultiPoly, u: GridField, accuracy: int = 8) -> np.ndarray:
    """``P(D) u`` by central differences (periodic wrap, valid in the interior)."""
    cache = {}

    def deriv(arr, axis, order):
        offs, w = central_stencil(order, accuracy)
        out = np.zeros_like(arr)
        for o, c in zip(offs, w):
            if c != 0:
                out += c * np.roll(arr, -int(o), axis=axis)
        return out / u.spacing[axis] ** order

    def partial(alpha):
        if alpha in cache:
            return cache[alpha]
        j = max(i for i, a in enumerate(alpha) if a > 0)
        prev = list(alpha)
        prev[j] = 0
        prev = tuple(prev)
        base = u.samples if not any(prev) else partial(prev)
        val = deriv(base, j, alpha[j])
        cache[alpha] = val
        return val

    out = np.zeros_like(u.samples, dtype=complex)
    for alpha, coef in P.terms.items():
        term = u.samples if not any(alpha) else partial(alpha)
        out += coef * (-1j) ** sum(alpha) * term
    return out


def residual(u, f, P, method: str = "interior-FD", margin: int = FD_MARGIN) -> float:
    """Relative defect of a computed solution.

    Parameters
    ----------
    u : GridField
        Physical solution, or the mixed solution of a first-order problem.
    f : GridField or None
        Physical right-hand side; unused by "mixed-exact".
    P : MultiPoly or FirstOrderProblem
    method : {"interior-FD", "mixed-exact"}
        "interior-FD" applies ``P(D)`` with 8th-order central differences and
        returns the relative L2 error over cells at least ``margin`` away from
        the boundary. "mixed-exact" checks the discrete recurrence of a
        first-order solve, exact up to roundoff.
    """
    if method == "mixed-exact":
        if not isinstance(P, FirstOrderProblem):
            raise ValidationError("mixed-exact residual needs the first-order problem")
        return first_order_residual(u, P)
    if method != "interior-FD":
        raise ValidationError(f"unknown residual method {method!r}")
    if u.space != PHYSICAL or f.space != PHYSICAL or not u.same_grid(f):
        raise ValidationError("interior-FD residual needs physical fields on one grid")
    Pu = apply_fd(P, u)
    sl = tuple(slice(margin, d - margin) for d in u.dims)
    num = np.linalg.norm((Pu - f.samples)[sl])
    den = np.linalg.norm(f.samples[sl])
    if den == 0:
        return float(num > 0)
    return float(num / den)
