"""The 4x4 Dirac system ``sum_j A_j d_j u - i omega u = f`` in three dimensions.

After a partial Fourier transform in the coordinates other than ``x_k``
the system becomes the ODE

    d_k u~ + M(xi) u~ = A_k^{-1} f~,   M(xi) = A_k^{-1} (sum_{j != k} i xi_j A_j + B)

``M`` is normal, so a unitary eigenbasis splits it into four scalar
first-order equations. Modes with ``Re lambda >= 0`` are integrated from
``-inf`` and the others from ``+inf``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, schur

from .errors import NotNormal, ValidationError
from .fields import MIXED, PHYSICAL, GridField, mixed_norm_array, partial_dft, partial_idft
from .ode import _as_mixed, _from_lines, _to_lines, central_stencil, perp_frequencies, solve_lines

log = logging.getLogger(__name__)

NORMAL_TOL = 1e-10

_P = np.array([[0, -1], [1, 0]])
_I2 = np.eye(2, dtype=int)
_Z2 = np.zeros((2, 2), dtype=int)


@dataclass(frozen=True)
class DiracMatrices:
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    B: np.ndarray
    omega: float

    @property
    def A(self):
        return (self.A1, self.A2, self.A3)

    def sign_table(self):
        """``{(i, j): (s, k)}`` with ``A_i A_j = s A_k`` for distinct indices."""
        table = {}
        for i, j in itertools.permutations(range(3), 2):
            k = 3 - i - j
            prod = self.A[i] @ self.A[j]
            for s in (1, -1):
                if np.array_equal(prod, s * self.A[k]):
                    table[(i, j)] = (s, k)
            if (i, j) not in table:
                raise ValidationError(f"A_{i + 1} A_{j + 1} is not +-A_{k + 1}")
        return table


def build_matrices(omega: float) -> DiracMatrices:
    """Integer coefficient matrices of ``D - i omega I`` and ``B = -i omega I``."""
    A1 = np.block([[_Z2, _P], [_P, _Z2]])
    A2 = np.block([[_Z2, -_I2], [_I2, _Z2]])
    A3 = np.block([[_P, _Z2], [_Z2, -_P]])
    eye = np.eye(4, dtype=int)
    for A in (A1, A2, A3):
        assert np.array_equal(A.T, -A)
        assert np.array_equal(A @ A, -eye)
    dm = DiracMatrices(A1, A2, A3, -1j * float(omega) * np.eye(4), float(omega))
    dm.sign_table()
    return dm


def normality_defect(M):
    M = np.asarray(M)
    Mh = np.conj(np.swapaxes(M, -1, -2))
    return np.linalg.norm(M @ Mh - Mh @ M, axis=(-2, -1))


def m_of_xi(dm: DiracMatrices, xi_perp, k: int = 2, check: bool = True):
    """``M(xi)`` for full frequency vectors ``xi`` (entry ``k`` is ignored).

    ``xi_perp`` has shape ``(..., 3)``; the result ``(..., 4, 4)``.
    ``A_k^{-1} = -A_k``.
    """
    if k not in (0, 1, 2):
        raise ValidationError("k must be 0, 1 or 2")
    xi = np.asarray(xi_perp, dtype=float)
    Ainv = -dm.A[k]
    S = np.broadcast_to(dm.B, xi.shape[:-1] + (4, 4)).astype(complex)
    for j in range(3):
        if j != k:
            S = S + 1j * xi[..., j, None, None] * dm.A[j]
    M = Ainv @ S
    if check:
        d = normality_defect(M)
        if np.max(d, initial=0.0) >= NORMAL_TOL:
            raise NotNormal(f"||MM* - M*M|| = {np.max(d):.3e}")
    return M


def _eig_unitary(M):
    """Unitary ``Z`` and eigenvalues of a normal matrix, ordered by (Re, Im)."""
    T, Z = schur(M, output="complex")
    off = np.linalg.norm(T - np.diag(np.diag(T)))
    if off >= NORMAL_TOL * max(1.0, np.linalg.norm(T)):
        raise NotNormal(f"Schur form is not diagonal (off-diagonal {off:.3e})")
    lam = np.diag(T)
    order = np.lexsort((np.round(lam.imag, 12), np.round(lam.real, 12)))
    return lam[order], Z[:, order]


def spectral_projections(M):
    """Orthogonal projections onto the ``Re lambda >= 0`` and ``< 0`` eigenspaces."""
    M = np.asarray(M, dtype=complex)
    if normality_defect(M) >= NORMAL_TOL * max(1.0, np.linalg.norm(M)):
        raise NotNormal("matrix is not normal")
    lam, Z = _eig_unitary(M)
    pos = lam.real >= 0
    Pp = Z[:, pos] @ Z[:, pos].conj().T
    Pm = Z[:, ~pos] @ Z[:, ~pos].conj().T
    return Pp, Pm


@dataclass
class VectorField4:
    """Four components sharing one grid."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 4:
            raise ValidationError("a Dirac field has four components")
        g0 = comps[0]
        for c in comps[1:]:
            if not (c.same_grid(g0) and c.space == g0.space and c.axis == g0.axis):
                raise ValidationError("components must share one grid")
        self.components = comps

    @classmethod
    def from_array(cls, arr, like: GridField, space=None, axis=None):
        return cls(tuple(like.with_samples(arr[c], space, axis) for c in range(4)))

    def array(self):
        return np.stack([c.samples for c in self.components])

    @property
    def grid(self):
        return self.components[0]

    def l2(self):
        return float(np.sqrt(sum(c.l2() ** 2 for c in self.components)))

    def map(self, func):
        return VectorField4(tuple(func(c) for c in self.components))


@dataclass
class DiracResult:
    u: VectorField4
    u_mixed: np.ndarray
    f_mixed: np.ndarray
    axis: int
    eigenvalues: np.ndarray
    frames: np.ndarray
    h: float
    dxi_perp: float
    quadrature: str = "spectral"

    @property
    def norm_u(self):
        return mixed_norm_array(self.u_mixed, self.axis + 1, self.h, self.dxi_perp, "inf", 2,
                                component_axis=0)

    @property
    def norm_f(self):
        return mixed_norm_array(self.f_mixed, self.axis + 1, self.h, self.dxi_perp, 1, 2,
                                component_axis=0)

    @property
    def ratio(self):
        nf = self.norm_f
        return self.norm_u / nf if nf > 0 else 0.0


def solve_dirac(f: VectorField4, omega: float, k: int = 2, dm: DiracMatrices | None = None,
                quadrature: str = "spectral") -> DiracResult:
    """Directional solve along axis ``k`` with per-mode exponential integration.

    ``quadrature="constant"`` makes the discrete solution exact for
    cellwise-constant data, which :func:`mixed_exact_residual` checks.
    """
    dm = dm or build_matrices(omega)
    g0 = f.grid
    if g0.n != 3:
        raise ValidationError("the Dirac system is three-dimensional")
    fm = np.stack([_as_mixed(c, k).samples for c in f.components])
    like = _as_mixed(g0, k)
    xp = perp_frequencies(like, k)
    M = m_of_xi(dm, xp, k)
    Ainv = -dm.A[k]
    lines = [_to_lines(fm[c], k) for c in range(4)]
    shape = lines[0][1]
    gl = np.stack([ln[0] for ln in lines])  # (4, L, T)
    Ms = M.reshape(-1, 4, 4)
    nL = Ms.shape[0]
    lam = np.empty((nL, 4), dtype=complex)
    Z = np.empty((nL, 4, 4), dtype=complex)
    for l in range(nL):
        lam[l], Z[l] = _eig_unitary(Ms[l])
    # modal data c = Z* A_k^{-1} f~ ; mode equation v' = -lam v + c
    rhs = np.einsum("ij,jlt->lit", Ainv, gl)
    c = np.einsum("lji,ljt->lit", Z.conj(), rhs)
    h = g0.spacing[k]
    v = np.empty_like(c)
    for i in range(4):
        # (-i d/dt - q) w = g with q = i lam, g = -i c
        v[:, i] = solve_lines(1j * lam[:, i], -1j * c[:, i], h, quadrature, "forward")
    ul = np.einsum("lij,ljt->ilt", Z, v)
    um = np.stack([_from_lines(ul[i], shape, k) for i in range(4)])
    u = VectorField4.from_array(um, like)
    u = u.map(partial_idft)
    dxi = float(np.prod([g0.dxi[j] for j in range(3) if j != k]))
    return DiracResult(u, um, fm, k, lam.reshape(shape[:-1] + (4,)), Z, h, dxi, quadrature)


def mixed_exact_residual(res: DiracResult, dm: DiracMatrices) -> float:
    """Defect of the per-cell propagation, checked with dense matrix exponentials.

    On each cell with constant data ``g`` the ``P+`` part obeys
    ``u_{m+1} = e^{-Mh} u_m + (int_0^h e^{-Ms} ds) g`` and the ``P-`` part
    ``u_m = e^{Mh} u_{m+1} - (int_0^h e^{Ms} ds) g``.
    """
    if res.quadrature != "constant":
        raise ValidationError("the exact cell propagation holds for constant quadrature only")
    k = res.axis
    h = res.h
    Ainv = -dm.A[k]
    um = np.moveaxis(res.u_mixed, k + 1, -1)
    fm = np.moveaxis(res.f_mixed, k + 1, -1)
    U = um.reshape(4, -1, um.shape[-1])
    F = np.einsum("ij,jlt->ilt", Ainv, fm.reshape(4, -1, fm.shape[-1]))
    lam = res.eigenvalues.reshape(-1, 4)
    Z = res.frames
    worst = 0.0
    scale = max(np.abs(U).max(), 1e-300)
    eye = np.eye(4)
    for l in range(U.shape[1]):
        M = Z[l] @ np.diag(lam[l]) @ Z[l].conj().T
        pos = lam[l].real >= 0
        Pp = Z[l][:, pos] @ Z[l][:, pos].conj().T
        Pm = eye - Pp
        big = np.zeros((8, 8), dtype=complex)
        big[:4, :4] = -M * h
        big[:4, 4:] = eye * h
        E = expm(big)
        Em, Im_ = E[:4, :4], E[:4, 4:]
        big[:4, :4] = M * h
        E = expm(big)
        Ep, Ip = E[:4, :4], E[:4, 4:]
        up = Pp @ U[:, l]
        un = Pm @ U[:, l]
        gp = Pp @ F[:, l]
        gn = Pm @ F[:, l]
        r1 = up[:, 1:] - Em @ up[:, :-1] - Im_ @ gp[:, :-1]
        r2 = un[:, :-1] - Ep @ un[:, 1:] + Ip @ gn[:, :-1]
        worst = max(worst, np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
    return float(worst / scale)


def apply_dirac_fd(u: VectorField4, dm: DiracMatrices, accuracy: int = 8):
    """``sum_j A_j d_j u + B u`` with central differences (periodic indexing)."""
    arr = u.array()
    out = np.einsum("ij,j...->i...", dm.B, arr)
    for j in range(3):
        offs, w = central_stencil(1, accuracy)
        h = u.grid.spacing[j]
        d = sum(wi * np.roll(arr, -o, axis=j + 1) for o, wi in zip(offs, w)) / h
        out = out + np.einsum("ij,j...->i...", dm.A[j], d)
    return out


def dirac_residual(u: VectorField4, f: VectorField4, dm: DiracMatrices, margin: int = 8):
    """Relative interior residual of the finite-difference operator."""
    r = apply_dirac_fd(u, dm) - f.array()
    sl = (slice(None),) + tuple(slice(margin, -margin) for _ in range(3))
    fn = np.linalg.norm(f.array()[sl])
    return float(np.linalg.norm(r[sl]) / fn) if fn > 0 else float(np.linalg.norm(r[sl]) > 0)
