"""Direction sets whose fattened tangent sets have empty common intersection.

For a direction ``theta`` the tangent set ``D_theta`` is the set of
perpendicular frequencies whose line restriction has a double root, i.e.
the real zero set of the discriminant ``Delta(theta, .)`` on the
hyperplane ``theta^perp``. It is sampled on a grid there and distances are
answered against the sampled zero band.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .errors import BudgetExhausted, DirectionOnCharacteristicCone, DoubleCharacteristic
from .poly import MultiPoly, NormalForm2, discriminant, line_coefficients
from .roots import min_deriv_batch

log = logging.getLogger(__name__)

LEAD_TOL = 1e-8


def perp_basis(theta):
    """Orthonormal basis (n, n-1) of ``theta^perp``, deterministic."""
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    # Householder reflection mapping e_0 to theta; its other columns span theta^perp
    e = np.zeros(n)
    e[0] = 1.0
    v = theta - e
    if np.linalg.norm(v) < 1e-14:
        return np.eye(n)[:, 1:]
    v = v / np.linalg.norm(v)
    H = np.eye(n) - 2 * np.outer(v, v)
    return H[:, 1:]


def _check_direction(P: MultiPoly, theta, tol=LEAD_TOL):
    lead = P.principal_part()(np.asarray(theta, dtype=float))
    if abs(lead) <= tol:
        raise DirectionOnCharacteristicCone(f"|P_N(theta)| = {abs(lead):.3e}")
    return lead


@dataclass
class TangentSetSample:
    """Discriminant samples on a grid of ``theta^perp``.

    Attributes
    ----------
    theta : ndarray (n,)
    basis : ndarray (n, n-1)
        Orthonormal basis of ``theta^perp``; grid coordinates refer to it.
    coords : ndarray (M, ..., M, n-1)
    values : ndarray
        ``|Delta(theta, xi_perp)|`` at every grid point.
    min_deriv : ndarray
        ``min_j |p'(tau_j)|`` at every grid point.
    zero_band : ndarray (K, n-1)
        Grid points with a sign of a zero of ``Delta`` within half a cell.
    spacing : float
    """

    theta: np.ndarray
    basis: np.ndarray
    coords: np.ndarray
    values: np.ndarray
    min_deriv: np.ndarray
    zero_band: np.ndarray
    spacing: float
    _tree: object = field(default=None, repr=False)

    @property
    def pad(self):
        """Half-cell padding: a true zero lies within this of a band sample."""
        return 0.5 * self.spacing * np.sqrt(self.basis.shape[1])

    @property
    def empty(self):
        return len(self.zero_band) == 0

    def tree(self):
        if self._tree is None and not self.empty:
            self._tree = cKDTree(self.zero_band)
        return self._tree

    def project(self, xi):
        return np.asarray(xi, dtype=float) @ self.basis

    def distance(self, xi):
        """Distance from ``xi_perp`` (projection of ``xi``) to the sampled tangent set."""
        pts = self.project(xi)
        shape = pts.shape[:-1]
        if self.empty:
            return np.full(shape, np.inf)
        d, _ = self.tree().query(pts.reshape(-1, pts.shape[-1]))
        return np.maximum(d - self.pad, 0.0).reshape(shape)

    def band_radius(self):
        """Largest ``|xi_perp|`` over the zero band (0 when empty)."""
        if self.empty:
            return 0.0
        return float(np.linalg.norm(self.zero_band, axis=-1).max())


def _grid_coords(m, L, M):
    ax = np.linspace(-L, L, M)
    mesh = np.meshgrid(*([ax] * m), indexing="ij")
    return np.stack(mesh, axis=-1), ax[1] - ax[0]


def _zero_band_mask(D, h):
    """Grid points where a linear model of ``D`` vanishes within half a cell."""
    if D.ndim == 1:
        grads = [np.gradient(D, h)]
    else:
        grads = np.gradient(D, h)
    slope = sum(np.abs(g) for g in grads)
    near = np.abs(D) <= 0.5 * h * slope
    # sign changes between neighbours, for real-valued discriminants
    if np.all(np.abs(D.imag) <= 1e-12 * max(np.abs(D).max(), 1e-300)):
        Dr = D.real
        for ax in range(D.ndim):
            sl0 = [slice(None)] * D.ndim
            sl1 = [slice(None)] * D.ndim
            sl0[ax] = slice(0, -1)
            sl1[ax] = slice(1, None)
            flip = Dr[tuple(sl0)] * Dr[tuple(sl1)] <= 0
            a = np.abs(Dr[tuple(sl0)]) <= np.abs(Dr[tuple(sl1)])
            m0 = np.zeros(D.shape, dtype=bool)
            m1 = np.zeros(D.shape, dtype=bool)
            m0[tuple(sl0)] = flip & a
            m1[tuple(sl1)] = flip & ~a
            near |= m0 | m1
    return near


def tangent_set_sample(P: MultiPoly, theta, L: float = 4.0, M: int | None = None
                       ) -> TangentSetSample:
    """Sample ``Delta(theta, .)`` and ``min |p'|`` on ``[-L, L]^(n-1)`` in ``theta^perp``.

    Raises
    ------
    DirectionOnCharacteristicCone
        If ``P_N(theta) = 0``.
    """
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    _check_direction(P, theta)
    n = P.n
    if M is None:
        M = 4001 if n == 2 else 257
    basis = perp_basis(theta)
    coords, h = _grid_coords(n - 1, L, M)
    xi = coords @ basis.T
    D = discriminant(P, theta, xi)
    md = min_deriv_batch(line_coefficients(P, theta, xi))
    band = coords[_zero_band_mask(D, h)]
    return TangentSetSample(theta, basis, coords, np.abs(D), md, band, h)


@dataclass
class CertGrid:
    """Compact frequency box ``[-L, L]^n`` with ``M`` points per axis."""

    L: float = 2.0
    M: int = 81

    def points(self, n):
        pts, _ = _grid_coords(n, self.L, self.M)
        return pts.reshape(-1, n)

    def to_dict(self):
        return {"L": self.L, "M": self.M}


@dataclass
class DirectionSet:
    """Certified directions with their tangent-set samples."""

    directions: list
    samples: list
    r0: float
    eps: float
    cert_grid: CertGrid
    margin: float
    uncovered: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)), repr=False)

    @property
    def certified(self):
        return self.margin > 0

    def distance(self, k, xi):
        return self.samples[k].distance(xi)

    def uncovered_clusters(self):
        return count_clusters(self.uncovered, 2.5 * self.cert_grid_spacing())

    def cert_grid_spacing(self):
        return 2 * self.cert_grid.L / (self.cert_grid.M - 1)

    def to_dict(self):
        return {
            "directions": [np.asarray(t).tolist() for t in self.directions],
            "r0": self.r0,
            "eps": self.eps,
            "margin": float(self.margin) if np.isfinite(self.margin) else "inf",
            "cert_grid": self.cert_grid.to_dict(),
            "uncovered_points": int(len(self.uncovered)),
        }


def count_clusters(points, radius):
    """Connected components of the ``radius`` neighbourhood graph."""
    points = np.asarray(points)
    if len(points) == 0:
        return 0
    tree = cKDTree(points)
    graph = tree.sparse_distance_matrix(tree, radius, output_type="coo_matrix")
    ncomp, _ = connected_components(graph, directed=False)
    return int(ncomp)


def sphere_candidates(n, count, seed=0, P: MultiPoly | None = None, lead_tol=1e-3):
    """Coordinate axes followed by scrambled Sobol points mapped to the sphere."""
    out = [np.eye(n)[j] for j in range(n)]
    sob = qmc.Sobol(d=n, scramble=True, seed=seed).random(max(8, 1 << int(np.ceil(np.log2(count + 1)))))
    g = _normal.ppf(np.clip(sob, 1e-12, 1 - 1e-12))
    for v in g:
        if np.linalg.norm(v) > 0:
            out.append(v / np.linalg.norm(v))
    if P is not None:
        PN = P.principal_part()
        out = [t for t in out if abs(PN(t)) > lead_tol]
    return out[:count]


def certify(samples, r0, grid: CertGrid, n):
    """Margin ``min_xi max_k dist_k(xi) - 2 r0`` and the uncovered grid points."""
    pts = grid.points(n)
    best = np.full(len(pts), -np.inf)
    for s in samples:
        best = np.maximum(best, s.distance(pts))
    margin = float(best.min() - 2 * r0)
    return margin, pts[best <= 2 * r0]


def find_directions(P: MultiPoly, candidates=None, r0: float = 0.05, eps: float = 0.0,
                    cert_grid: CertGrid | None = None, budget: int = 16, seed: int = 0,
                    sample_L: float | None = None, sample_M: int | None = None) -> DirectionSet:
    """Greedily add candidates until each cert-grid point is covered by one of them.

    A point is covered by ``theta`` when its distance to the sampled
    tangent set of ``theta`` exceeds ``2 r0``.

    Raises
    ------
    BudgetExhausted
        If ``budget`` candidates leave uncovered points; the exception
        carries ``uncovered`` and ``clusters``.
    """
    n = P.n
    cert_grid = cert_grid or CertGrid()
    if candidates is None:
        candidates = sphere_candidates(n, budget, seed, P)
    sample_L = sample_L if sample_L is not None else cert_grid.L * np.sqrt(n) + 4 * r0
    pts = cert_grid.points(n)
    best = np.full(len(pts), -np.inf)
    chosen, samples = [], []
    PN = P.principal_part()
    for i, cand in enumerate(candidates):
        if i >= budget:
            break
        cand = np.asarray(cand, dtype=float)
        cand = cand / np.linalg.norm(cand)
        if abs(PN(cand)) <= 1e-3:
            continue
        s = tangent_set_sample(P, cand, sample_L, sample_M)
        new = np.maximum(best, s.distance(pts))
        if np.count_nonzero(new > 2 * r0) > np.count_nonzero(best > 2 * r0):
            chosen.append(cand)
            samples.append(s)
            best = new
            log.info("direction %s added; %d points uncovered", np.round(cand, 4),
                     np.count_nonzero(best <= 2 * r0))
        if np.all(best > 2 * r0):
            margin = float(best.min() - 2 * r0)
            return DirectionSet(chosen, samples, r0, eps, cert_grid, margin,
                                np.zeros((0, n)))
    unc = pts[best <= 2 * r0]
    h = 2 * cert_grid.L / (cert_grid.M - 1)
    err = BudgetExhausted(f"{len(unc)} cert-grid points uncovered after {len(chosen)} directions")
    err.uncovered = unc
    err.clusters = count_clusters(unc, 2.5 * h)
    err.directions = chosen
    raise err


def direction_set_from(P: MultiPoly, thetas, r0: float, eps: float = 0.0,
                       cert_grid: CertGrid | None = None, sample_L=None, sample_M=None
                       ) -> DirectionSet:
    """Build and certify a fixed direction list (the margin may be negative)."""
    n = P.n
    cert_grid = cert_grid or CertGrid()
    sample_L = sample_L if sample_L is not None else cert_grid.L * np.sqrt(n) + 4 * r0
    thetas = [np.asarray(t, dtype=float) / np.linalg.norm(t) for t in thetas]
    samples = [tangent_set_sample(P, t, sample_L, sample_M) for t in thetas]
    margin, unc = certify(samples, r0, cert_grid, n)
    return DirectionSet(thetas, samples, r0, eps, cert_grid, margin, unc)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------


@dataclass
class Cond1Report:
    eps: float
    r0: float
    n_samples: int
    n_bad: int
    max_dist_bad: float

    def to_dict(self):
        return dict(self.__dict__)


def check_admissibility_cond1(P: MultiPoly, theta, r0: float, eps_max: float | None = None,
                              L: float = 4.0, M: int | None = None, iters: int = 50,
                              sample: TangentSetSample | None = None):
    """Largest sampled ``eps`` with ``B_{theta,eps}`` inside the ``r0``-fattened tangent set.

    Every grid point of ``theta^perp`` with ``min |p'| <= eps`` must lie within
    ``r0`` of the sampled zero band. The test is monotone in ``eps``, so the
    threshold is found by bisection. Returns ``(eps, Cond1Report)``; ``eps``
    is 0 when even the smallest level fails.
    """
    s = sample or tangent_set_sample(P, theta, L, M)
    coords = s.coords.reshape(-1, s.coords.shape[-1])
    md = s.min_deriv.ravel()
    if s.empty:
        dist = np.full(len(coords), np.inf)
    else:
        d, _ = s.tree().query(coords)
        dist = np.maximum(d - s.pad, 0.0)
    # admissible eps are those below the smallest min|p'| among points farther than r0
    far = dist > r0
    thresh = float(md[far].min()) if far.any() else np.inf
    hi = eps_max if eps_max is not None else (thresh if np.isfinite(thresh) else float(md.max()))

    def ok(e):
        bad = md <= e
        return not np.any(bad & far)

    lo = 0.0
    if ok(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    bad = md <= lo
    rep = Cond1Report(lo, r0, int(len(md)), int(bad.sum()),
                      float(dist[bad].max()) if bad.any() else 0.0)
    return lo, rep


def check_admissibility_cond2(P: MultiPoly, theta1, theta2, R: float, L: float | None = None,
                              M: int | None = None) -> bool:
    """True when both sampled tangent sets stay inside radius ``R``."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    c = abs(t1 @ t2) / (np.linalg.norm(t1) * np.linalg.norm(t2))
    if c > 1 - 1e-12:
        raise ValueError("directions must not be parallel")
    L = 2 * R if L is None else L
    for t in (t1, t2):
        s = tangent_set_sample(P, t, L, M)
        if s.band_radius() > R:
            return False
    return True


# ---------------------------------------------------------------------------
# second-order plans
# ---------------------------------------------------------------------------


@dataclass
class SecondOrderPlan:
    """Coordinate directions of a normal form plus a Fourier-division remainder."""

    directions: list
    eps: float
    remainder: str = "division"

    def to_dict(self):
        return {"directions": [np.asarray(d).tolist() for d in self.directions],
                "eps": self.eps, "remainder": self.remainder}


def second_order_eps(nf: NormalForm2, safety: float = 0.9) -> float:
    """Cutoff level keeping ``|P| > eps`` on the remainder support.

    On the remainder support every ``|Re Q_k|, |Im Q_k| < 2 eps``, so
    ``|Q_k| < 2 sqrt(2) eps``. Summing the ``Q_k`` gives
    ``|P| >= (|b| - 2 sqrt(2) n eps) / (n - 1)``, and from one square
    ``|P| >= beta_k^2 - 2 sqrt(2) eps``. Either bound exceeds ``eps`` below
    the returned level.
    """
    n = nf.n
    c = 2 * np.sqrt(2)
    cands = []
    if abs(nf.b) > 0:
        cands.append(abs(nf.b) / (c * n + max(n - 1, 1)))
    bmax = float(np.max(np.asarray(nf.beta) ** 2)) if len(nf.beta) else 0.0
    if bmax > 0:
        cands.append(bmax / (1 + c))
    if not cands:
        raise DoubleCharacteristic("b = 0 and beta = 0: real double characteristic")
    return safety * max(cands)


def second_order_directions(nf: NormalForm2, eps: float | None = None) -> SecondOrderPlan:
    """The normal-form axes (in original coordinates) and the cutoff level.

    Raises
    ------
    DoubleCharacteristic
        If ``b = 0`` and ``beta = 0``.
    """
    if abs(nf.b) == 0 and not np.any(np.asarray(nf.beta) != 0):
        raise DoubleCharacteristic("b = 0 and beta = 0: real double characteristic")
    e = second_order_eps(nf) if eps is None else eps
    dirs = [np.asarray(nf.basis)[:, k].copy() for k in range(nf.n)]
    return SecondOrderPlan(dirs, e)
