"""Grid fields, continuum-normalized transforms, mixed norms and domains.

A :class:`GridField` holds complex samples on a uniform box grid. Physical
samples sit at ``x_j = lo + j*h``. Frequency samples are stored in
centered order, ``xi_m = (m - N/2) * 2*pi/L``, and approximate the
continuum transform

    f^(xi) = (2 pi)^(-n/2) * integral exp(-i x.xi) f(x) dx

by a Riemann sum, which makes the transform unitary for the cell-weighted
L2 inner products on both sides.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

PHYSICAL = "physical"
FREQUENCY = "frequency"
MIXED = "mixed"


@dataclass(frozen=True)
class GridField:
    """Complex samples on a uniform box grid.

    Attributes
    ----------
    samples : ndarray
        Row-major complex array of shape ``dims``.
    box : tuple of (lo, hi)
        Physical extent per axis.
    space : str
        ``"physical"``, ``"frequency"`` or ``"mixed"``.
    axis : int or None
        Retained physical axis for mixed fields.
    """

    samples: np.ndarray
    box: tuple
    space: str = PHYSICAL
    axis: int | None = None

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != len(self.box):
            raise ValidationError("samples rank does not match box")
        for d in s.shape:
            if d < 2 or d & (d - 1):
                raise ValidationError(f"grid dims must be powers of two, got {s.shape}")
        if self.space not in (PHYSICAL, FREQUENCY, MIXED):
            raise ValidationError(f"unknown space {self.space!r}")
        if (self.space == MIXED) != (self.axis is not None):
            raise ValidationError("mixed fields need exactly one retained axis")

    @classmethod
    def zeros(cls, dims, lengths, space=PHYSICAL):
        dims = tuple(int(d) for d in dims)
        box = tuple((-L / 2.0, L / 2.0) for L in lengths)
        return cls(np.zeros(dims, dtype=complex), box, space)

    @classmethod
    def from_function(cls, func, dims, lengths):
        g = cls.zeros(dims, lengths)
        return g.with_samples(func(*g.mesh()))

    @property
    def n(self):
        return len(self.box)

    @property
    def dims(self):
        return tuple(np.shape(self.samples))

    @property
    def lengths(self):
        return tuple(hi - lo for lo, hi in self.box)

    @property
    def spacing(self):
        return tuple(L / d for L, d in zip(self.lengths, self.dims))

    @property
    def dxi(self):
        return tuple(2 * np.pi / L for L in self.lengths)

    def coords(self, j):
        lo, _ = self.box[j]
        return lo + self.spacing[j] * np.arange(self.dims[j])

    def freqs(self, j):
        N = self.dims[j]
        return (np.arange(N) - N // 2) * self.dxi[j]

    def mesh(self):
        return np.meshgrid(*[self.coords(j) for j in range(self.n)], indexing="ij")

    def freq_mesh(self):
        return np.meshgrid(*[self.freqs(j) for j in range(self.n)], indexing="ij")

    def points(self):
        return np.stack(self.mesh(), axis=-1)

    def freq_points(self):
        return np.stack(self.freq_mesh(), axis=-1)

    def with_samples(self, samples, space=None, axis=None):
        if space is None:
            space, axis = self.space, self.axis
        return replace(self, samples=np.asarray(samples, dtype=complex), space=space, axis=axis)

    def same_grid(self, other):
        return self.dims == other.dims and np.allclose(self.box, other.box, rtol=0, atol=1e-12)

    def cell_volume(self):
        return float(np.prod(self.spacing))

    def l2(self):
        w = self.spacing if self.space == PHYSICAL else self.dxi
        if self.space == MIXED:
            w = tuple(self.spacing[j] if j == self.axis else self.dxi[j] for j in range(self.n))
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * np.prod(w)))

    def __add__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        _check_compatible(self, other)
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, c):
        return self.with_samples(self.samples * c)

    __rmul__ = __mul__


def _check_compatible(a, b):
    if not a.same_grid(b) or a.space != b.space or a.axis != b.axis:
        raise ValidationError("fields live on different grids or spaces")


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _forward(a, f: GridField, axes):
    for j in axes:
        N = f.dims[j]
        h = f.spacing[j]
        xi = f.freqs(j)
        lo = f.box[j][0]
        a = np.fft.fftshift(np.fft.fft(a, axis=j), axes=j)
        shape = [1] * f.n
        shape[j] = N
        a = a * (np.exp(-1j * lo * xi) * h / np.sqrt(2 * np.pi)).reshape(shape)
    return a


def _inverse(a, f: GridField, axes):
    for j in axes:
        N = f.dims[j]
        h = f.spacing[j]
        xi = f.freqs(j)
        lo = f.box[j][0]
        shape = [1] * f.n
        shape[j] = N
        a = a * (np.exp(1j * lo * xi) * np.sqrt(2 * np.pi) / h).reshape(shape)
        a = np.fft.ifft(np.fft.ifftshift(a, axes=j), axis=j)
    return a


def dft_full(f: GridField) -> GridField:
    """Continuum-normalized n-D transform of a physical field."""
    if f.space != PHYSICAL:
        raise ValidationError("dft_full expects a physical field")
    return f.with_samples(_forward(f.samples, f, range(f.n)), FREQUENCY, None)


def idft_full(f: GridField) -> GridField:
    """Inverse of :func:`dft_full`."""
    if f.space != FREQUENCY:
        raise ValidationError("idft_full expects a frequency field")
    return f.with_samples(_inverse(f.samples, f, range(f.n)), PHYSICAL, None)


def partial_dft(f: GridField, axis: int) -> GridField:
    """Transform every axis except ``axis``; the result is mixed along it."""
    if not 0 <= axis < f.n:
        raise ValidationError(f"invalid axis {axis}")
    if f.space != PHYSICAL:
        raise ValidationError("partial_dft expects a physical field")
    axes = [j for j in range(f.n) if j != axis]
    return f.with_samples(_forward(f.samples, f, axes), MIXED, axis)


def partial_idft(f: GridField) -> GridField:
    """Inverse of :func:`partial_dft`."""
    if f.space != MIXED:
        raise ValidationError("partial_idft expects a mixed field")
    axes = [j for j in range(f.n) if j != f.axis]
    return f.with_samples(_inverse(f.samples, f, axes), PHYSICAL, None)


def mixed_to_frequency(f: GridField) -> GridField:
    if f.space != MIXED:
        raise ValidationError("expects a mixed field")
    return f.with_samples(_forward(f.samples, f, [f.axis]), FREQUENCY, None)


def frequency_to_mixed(f: GridField, axis: int) -> GridField:
    if f.space != FREQUENCY:
        raise ValidationError("expects a frequency field")
    return f.with_samples(_inverse(f.samples, f, [axis]), MIXED, axis)


# ---------------------------------------------------------------------------
# mixed norms
# ---------------------------------------------------------------------------


def _lp(a, p, w, axis):
    if p == 1:
        return np.sum(np.abs(a), axis=axis) * w
    if p == 2:
        return np.sqrt(np.sum(np.abs(a) ** 2, axis=axis) * w)
    if p == np.inf:
        return np.max(np.abs(a), axis=axis)
    raise ValidationError(f"unsupported exponent {p}")


def mixed_norm_array(a, axis, h_t, dxi_perp, p, q, component_axis=None):
    """``Theta(p, q)`` norm of an array in mixed representation.

    ``axis`` is the retained physical axis with spacing ``h_t`` and
    ``dxi_perp`` the product of perpendicular frequency spacings. With
    ``component_axis`` the pointwise Euclidean norm over components is
    taken first.
    """
    p = _parse_exp(p)
    q = _parse_exp(q)
    a = np.asarray(a)
    if component_axis is not None:
        a = np.sqrt(np.sum(np.abs(a) ** 2, axis=component_axis))
        if component_axis < axis:
            axis -= 1
    inner = _lp(a, p, h_t, axis)
    return float(_lp(inner.ravel(), q, dxi_perp, 0))


def _parse_exp(p):
    if p in ("inf", "infty", float("inf")):
        return np.inf
    if p in (1, 2, 1.0, 2.0):
        return int(p)
    raise ValidationError(f"unsupported exponent {p}")


def mixed_norm(f: GridField, p, q) -> float:
    """``Theta(p, q)``: ``L^p`` in the retained axis, ``L^q`` over the rest."""
    if f.space != MIXED:
        raise ValidationError("mixed_norm expects a mixed field")
    dxi = np.prod([f.dxi[j] for j in range(f.n) if j != f.axis])
    return mixed_norm_array(f.samples, f.axis, f.spacing[f.axis], dxi, p, q)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Ball, box or union of balls in physical coordinates."""

    kind: str
    center: tuple = ()
    R: float = 0.0
    lo: tuple = ()
    hi: tuple = ()
    balls: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("ball", "box", "union"):
            raise ValidationError(f"unknown domain kind {self.kind!r}")
        if self.kind == "ball" and not self.R > 0:
            raise ValidationError("ball radius must be positive")
        if self.kind == "union":
            if not self.balls:
                raise ValidationError("union needs at least one ball")
            for _, r in self.balls:
                if not r > 0:
                    raise ValidationError("ball radius must be positive")

    @classmethod
    def ball(cls, center, R):
        return cls("ball", center=tuple(float(c) for c in center), R=float(R))

    @classmethod
    def box_(cls, lo, hi):
        return cls("box", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)))

    @classmethod
    def union(cls, balls):
        return cls("union", balls=tuple((tuple(map(float, c)), float(r)) for c, r in balls))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return np.sum((x - np.asarray(self.center)) ** 2, axis=-1) < self.R ** 2
        if self.kind == "box":
            return np.all((x >= np.asarray(self.lo)) & (x < np.asarray(self.hi)), axis=-1)
        out = np.zeros(x.shape[:-1], dtype=bool)
        for c, r in self.balls:
            out |= np.sum((x - np.asarray(c)) ** 2, axis=-1) < r ** 2
        return out

    def translate(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "ball":
            return DomainSpec.ball(np.asarray(self.center) + v, self.R)
        if self.kind == "box":
            return DomainSpec.box_(np.asarray(self.lo) + v, np.asarray(self.hi) + v)
        return DomainSpec.union([(np.asarray(c) + v, r) for c, r in self.balls])

    def scale(self, s):
        if self.kind == "ball":
            return DomainSpec.ball(np.asarray(self.center) * s, self.R * s)
        if self.kind == "box":
            return DomainSpec.box_(np.asarray(self.lo) * s, np.asarray(self.hi) * s)
        return DomainSpec.union([(np.asarray(c) * s, r * s) for c, r in self.balls])

    def rotate(self, Rm):
        """Rotate about the origin; boxes are not closed under rotation."""
        Rm = np.asarray(Rm, dtype=float)
        if self.kind == "ball":
            return DomainSpec.ball(Rm @ np.asarray(self.center), self.R)
        if self.kind == "union":
            return DomainSpec.union([(Rm @ np.asarray(c), r) for c, r in self.balls])
        raise ValidationError("boxes cannot be rotated; use balls")

    def to_dict(self):
        if self.kind == "ball":
            return {"kind": "ball", "center": list(self.center), "R": self.R}
        if self.kind == "box":
            return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}
        return {"kind": "union", "balls": [{"center": list(c), "R": r} for c, r in self.balls]}

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "ball":
            return cls.ball(d["center"], d["R"])
        if kind == "box":
            return cls.box_(d["lo"], d["hi"])
        if kind == "union":
            return cls.union([(b["center"], b["R"]) for b in d["balls"]])
        raise ValidationError(f"unknown domain kind {kind!r}")


def domain_weights(f: GridField, D: DomainSpec, sub: int = 8) -> np.ndarray:
    """Fraction of each cell (centered on its sample) covered by ``D``.

    Cells cut by the boundary are supersampled on a ``sub^n`` lattice;
    all other cells are fully in or out.
    """
    pts = f.points()
    h = np.asarray(f.spacing)
    inside = D.contains(pts)
    # a cell is cut only if a corner disagrees with its center
    cut = np.zeros(f.dims, dtype=bool)
    for corner in itertools.product((-0.5, 0.5), repeat=f.n):
        cut |= D.contains(pts + np.asarray(corner) * h) != inside
    w = inside.astype(float)
    if cut.any():
        offs = (np.arange(sub) + 0.5) / sub - 0.5
        lattice = np.stack(np.meshgrid(*([offs] * f.n), indexing="ij"), axis=-1).reshape(-1, f.n)
        cp = pts[cut]
        frac = D.contains(cp[:, None, :] + lattice[None] * h).mean(axis=1)
        w[cut] = frac
    return w


def l2_on_domain(f: GridField, D: DomainSpec, method: str = "coverage") -> float:
    """L2 norm of a physical field over ``D`` with samples as cell values.

    ``method="coverage"`` weights each cell by its covered fraction, which
    keeps the norm stable when ``D`` moves by less than a cell;
    ``"centers"`` counts the cells whose centers lie in ``D``.
    """
    if f.space != PHYSICAL:
        raise ValidationError("l2_on_domain expects a physical field")
    if method == "centers":
        w = D.contains(f.points()).astype(float)
    elif method == "coverage":
        w = domain_weights(f, D)
    else:
        raise ValidationError(f"unknown quadrature {method!r}")
    return float(np.sqrt(np.sum(w * np.abs(f.samples) ** 2) * f.cell_volume()))


def _chord_union(centers, radii, p, u):
    """Total length of the union of chords cut from balls by the line ``p + s u``."""
    ivals = []
    for c, r in zip(centers, radii):
        d = c - p
        s0 = d @ u
        dist2 = d @ d - s0 ** 2
        if dist2 < r ** 2:
            half = np.sqrt(r ** 2 - dist2)
            ivals.append((s0 - half, s0 + half))
    ivals.sort()
    total, cur = 0.0, None
    for a, b in ivals:
        if cur is None or a > cur[1]:
            if cur is not None:
                total += cur[1] - cur[0]
            cur = [a, b]
        else:
            cur[1] = max(cur[1], b)
    if cur is not None:
        total += cur[1] - cur[0]
    return total


def diameter(D: DomainSpec, return_bound: bool = False):
    """Largest measure of a line's intersection with ``D``.

    Exact for balls and boxes. For unions of balls the value is the best
    over lines through pairs of centers and coordinate lines through each
    center, a lower bound; ``return_bound`` also returns ``sum 2 R_i``.
    """
    if D.kind == "ball":
        val = 2 * D.R
        bound = val
    elif D.kind == "box":
        val = float(np.linalg.norm(np.asarray(D.hi) - np.asarray(D.lo)))
        bound = val
    else:
        centers = [np.asarray(c, dtype=float) for c, _ in D.balls]
        radii = [r for _, r in D.balls]
        n = len(centers[0])
        lines = []
        for i, c in enumerate(centers):
            for k in range(n):
                e = np.zeros(n)
                e[k] = 1.0
                lines.append((c, e))
            for j in range(i + 1, len(centers)):
                d = centers[j] - c
                if np.linalg.norm(d) > 0:
                    lines.append((c, d / np.linalg.norm(d)))
        val = max(_chord_union(centers, radii, p, u) for p, u in lines)
        bound = float(sum(2 * r for r in radii))
    return (val, bound) if return_bound else val


# ---------------------------------------------------------------------------
# rotation by trigonometric interpolation
# ---------------------------------------------------------------------------


def _shift_along(a, f, axis, shifts):
    """Translate each line along ``axis`` by ``shifts`` (broadcast over the other axes).

    Exact for band-limited periodic data: multiplies the 1-D spectrum by a phase.
    """
    N = f.dims[axis]
    k = 2 * np.pi * np.fft.fftfreq(N, d=f.spacing[axis])
    A = np.fft.fft(a, axis=axis)
    shape = [1] * f.n
    shape[axis] = N
    kk = k.reshape(shape)
    phase = np.exp(-1j * kk * shifts)
    if N % 2 == 0:
        # split the Nyquist mode evenly between +k and -k so real data stays real
        nyq = [slice(None)] * f.n
        nyq[axis] = slice(N // 2, N // 2 + 1)
        nyq = tuple(nyq)
        phase[nyq] = np.cos(kk[nyq] * shifts[nyq])
    return np.fft.ifft(A * phase, axis=axis)


def _shear(a, f, axis, other, c):
    """``out(x) = in(x - c * x_other * e_axis)``."""
    x = f.coords(other)
    shape = [1] * f.n
    shape[other] = len(x)
    shifts = np.broadcast_to((c * x).reshape(shape), a.shape)
    return _shift_along(a, f, axis, shifts)


def _plane_rotation(a, f, i, j, theta):
    """Rotate by ``theta`` in the (i, j) coordinate plane with three shears."""
    if abs(theta) < 1e-15:
        return a
    if f.spacing[i] != f.spacing[j] or f.dims[i] != f.dims[j]:
        raise ValidationError("plane rotation needs matching axes")
    # quarter turns first so the shear angle stays below 45 degrees
    q = int(np.round(theta / (np.pi / 2)))
    rest = theta - q * np.pi / 2
    for _ in range(q % 4):
        a = _quarter_turn(a, i, j)
    t = np.tan(rest / 2)
    s = np.sin(rest)
    a = _shear(a, f, i, j, -t)
    a = _shear(a, f, j, i, s)
    a = _shear(a, f, i, j, -t)
    return a


def _flip(a, axis):
    # x -> -x on the grid lo + j h with lo = -L/2 maps index j to (N - j) mod N
    return np.roll(np.flip(a, axis=axis), 1, axis=axis)


def _quarter_turn(a, i, j):
    """``out(x) = in(R^-1 x)`` for the +90 degree rotation in the (i, j) plane."""
    # R^-1 maps (x_i, x_j) -> (x_j, -x_i)
    b = np.swapaxes(a, i, j)
    return _flip(b, i)


def _signed_permutation(Rm):
    Rm = np.asarray(Rm)
    r = np.round(Rm)
    if np.max(np.abs(Rm - r)) > 1e-14:
        return None
    if not np.all(np.sum(np.abs(r), axis=0) == 1) or not np.all(np.sum(np.abs(r), axis=1) == 1):
        return None
    return r.astype(int)


def _zyz_planes(Rm):
    """Factor a 3-D rotation into plane rotations (i, j, angle), applied in order."""
    beta = np.arccos(np.clip(Rm[2, 2], -1.0, 1.0))
    if abs(np.sin(beta)) > 1e-12:
        alpha = np.arctan2(Rm[1, 2], Rm[0, 2])
        gamma = np.arctan2(Rm[2, 1], -Rm[2, 0])
    else:
        alpha = np.arctan2(Rm[1, 0], Rm[0, 0]) if Rm[2, 2] > 0 else np.arctan2(-Rm[1, 0], -Rm[0, 0])
        gamma = 0.0
    # R = Rz(alpha) Ry(beta) Rz(gamma); the rightmost factor acts first
    return [(0, 1, gamma), (2, 0, beta), (0, 1, alpha)]


def check_guard_band(f: GridField, tol=1e-10, frac=0.25):
    """Raise unless ``|f|`` is negligible outside the central part of the box."""
    a = np.abs(f.samples)
    thresh = tol * a.max() if a.max() > 0 else 0.0
    for j in range(f.n):
        x = f.coords(j)
        lo, hi = f.box[j]
        L = hi - lo
        outer = (x < lo + frac * L) | (x >= hi - frac * L)
        sl = [slice(None)] * f.n
        sl[j] = outer
        if a[tuple(sl)].size and a[tuple(sl)].max() > thresh:
            raise ValidationError("field violates the guard band required for rotation")


def rotate_resample(f: GridField, Rm, report: bool = False, check_support: bool = True):
    """Rotate a physical field about the origin: ``out(x) = f(R^-1 x)``.

    The identity returns an identical copy and signed permutations are exact
    index permutations. Other rotations use shear factorizations whose 1-D
    steps are exact Fourier translations (trigonometric interpolation).

    Returns
    -------
    GridField, or (GridField, float) with the round-trip residual
    ``||f - rotate(rotate(f, R), R^T)|| / ||f||`` when ``report`` is set.
    """
    if f.space != PHYSICAL:
        raise ValidationError("rotate_resample expects a physical field")
    Rm = np.asarray(Rm, dtype=float)
    if Rm.shape != (f.n, f.n) or not np.allclose(Rm @ Rm.T, np.eye(f.n), atol=1e-12):
        raise ValidationError("rotation must be an orthogonal n x n matrix")
    if np.allclose(Rm, np.eye(f.n), rtol=0, atol=0):
        out = f.with_samples(np.array(f.samples, copy=True))
        return (out, 0.0) if report else out
    sp = _signed_permutation(Rm)
    if sp is not None:
        out = f.with_samples(_apply_signed_permutation(f.samples, sp))
        return (out, 0.0) if report else out
    if check_support:
        check_guard_band(f)
    a = _rotate_array(f.samples, f, Rm)
    out = f.with_samples(a)
    if not report:
        return out
    back = _rotate_array(a, f, Rm.T)
    res = np.linalg.norm(back - f.samples) / max(np.linalg.norm(f.samples), 1e-300)
    return out, float(res)


def _rotate_array(a, f, Rm):
    if f.n == 2:
        theta = np.arctan2(Rm[1, 0], Rm[0, 0])
        if np.linalg.det(Rm) < 0:
            raise ValidationError("reflections are not supported")
        return _plane_rotation(a, f, 0, 1, theta)
    if f.n == 3:
        if np.linalg.det(Rm) < 0:
            raise ValidationError("reflections are not supported")
        for i, j, ang in _zyz_planes(Rm):
            a = _plane_rotation(a, f, i, j, ang)
        return a
    raise ValidationError("general rotations are implemented for n = 2, 3")


def _apply_signed_permutation(a, sp):
    """``out(x) = in(S^T x)`` for a signed permutation matrix ``S``."""
    n = sp.shape[0]
    # out[x] = in[y] with y = S^T x, i.e. y_k = sum_i S[i, k] x_i
    perm = [int(np.nonzero(sp[:, k])[0][0]) for k in range(n)]
    signs = [int(sp[perm[k], k]) for k in range(n)]
    # in-array axis k corresponds to out-array axis perm[k]
    b = np.transpose(a, axes=np.argsort(perm))
    for k in range(n):
        if signs[k] < 0:
            b = _flip(b, perm[k])
    return b


# ---------------------------------------------------------------------------
# binary field files
# ---------------------------------------------------------------------------

MAGIC = b"SCFD"
VERSION = 1


def _space_flag(f):
    if f.space == PHYSICAL:
        return 0
    if f.space == FREQUENCY:
        return 1
    return 2 + int(f.axis)


def _space_from_flag(flag):
    if flag == 0:
        return PHYSICAL, None
    if flag == 1:
        return FREQUENCY, None
    return MIXED, flag - 2


def write_fields(path, fields):
    """Write one or more fields as consecutive records."""
    if isinstance(fields, GridField):
        fields = [fields]
    with open(path, "wb") as fh:
        for f in fields:
            fh.write(MAGIC)
            fh.write(struct.pack("<HHB", VERSION, f.n, _space_flag(f)))
            fh.write(struct.pack(f"<{f.n}Q", *f.dims))
            fh.write(struct.pack(f"<{2 * f.n}d", *[v for lo_hi in f.box for v in lo_hi]))
            fh.write(np.ascontiguousarray(f.samples, dtype="<c16").tobytes())


def read_fields(path):
    """Read every record of a field file."""
    out = []
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0
    while pos < len(data):
        if data[pos:pos + 4] != MAGIC:
            raise ValidationError("bad field file magic")
        version, n, flag = struct.unpack_from("<HHB", data, pos + 4)
        if version != VERSION:
            raise ValidationError(f"unsupported field file version {version}")
        pos += 9
        dims = struct.unpack_from(f"<{n}Q", data, pos)
        pos += 8 * n
        ext = struct.unpack_from(f"<{2 * n}d", data, pos)
        pos += 16 * n
        count = int(np.prod(dims))
        samples = np.frombuffer(data, dtype="<c16", count=count, offset=pos).reshape(dims)
        pos += 16 * count
        space, axis = _space_from_flag(flag)
        box = tuple((ext[2 * j], ext[2 * j + 1]) for j in range(n))
        out.append(GridField(samples.astype(complex), box, space, axis))
    return out
