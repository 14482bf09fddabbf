"""Sparse multivariate polynomial symbols.

A symbol ``P(xi)`` is stored as a map from exponent tuples to complex
coefficients. The convention throughout the package is ``D = -i grad``, so
a differential operator ``P(D)`` acts on the Fourier side as multiplication
by ``P(xi)`` and a derivative ``d/dx_j`` corresponds to ``i xi_j``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import DegenerateLine, PolyParseError, ValidationError

__all__ = [
    "MultiPoly",
    "LineRestriction",
    "NormalForm2",
    "NonsingularReport",
    "line_coefficients",
    "restrict_to_line",
    "discriminant",
    "discriminant_line",
    "normalize_second_order",
    "is_nonsingular_sampled",
]


def _grlex_key(a):
    return (sum(a), a)


class MultiPoly:
    """Sparse polynomial in ``n`` variables with complex coefficients.

    Parameters
    ----------
    n : int
        Number of variables.
    terms : dict
        Map from exponent tuples of length ``n`` to coefficients. Zero
        coefficients are dropped.
    """

    __slots__ = ("n", "_terms", "_horner")

    def __init__(self, n: int, terms: dict | None = None):
        n = int(n)
        if n < 1:
            raise ValidationError("polynomial dimension must be positive")
        clean = {}
        for a, c in (terms or {}).items():
            a = tuple(int(e) for e in a)
            if len(a) != n or any(e < 0 for e in a):
                raise ValidationError(f"bad exponent {a} for n={n}")
            c = complex(c)
            if c != 0:
                clean[a] = clean.get(a, 0) + c
        clean = {a: c for a, c in clean.items() if c != 0}
        self.n = n
        self._terms = dict(sorted(clean.items(), key=lambda kv: _grlex_key(kv[0])))
        self._horner = None

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, n, c):
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n, j):
        a = [0] * n
        a[j] = 1
        return cls(n, {tuple(a): 1.0})

    @classmethod
    def from_string(cls, text: str, n: int | None = None) -> "MultiPoly":
        return parse_poly(text, n)

    # basic properties -------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(a) for a in self._terms)

    def is_zero(self):
        return not self._terms

    def is_real(self, tol=0.0):
        scale = max((abs(c) for c in self._terms.values()), default=0.0)
        return all(abs(c.imag) <= tol * scale for c in self._terms.values())

    def __repr__(self):
        return f"MultiPoly(n={self.n}, '{self.to_string()}')"

    def __eq__(self, other):
        return isinstance(other, MultiPoly) and self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, MultiPoly):
            if other.n != self.n:
                raise ValidationError("dimension mismatch")
            return other
        return MultiPoly.constant(self.n, other)

    def __add__(self, other):
        other = self._coerce(other)
        t = dict(self._terms)
        for a, c in other._terms.items():
            t[a] = t.get(a, 0) + c
        return MultiPoly(self.n, t)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        t = {}
        for a, c in self._terms.items():
            for b, d in other._terms.items():
                e = tuple(x + y for x, y in zip(a, b))
                t[e] = t.get(e, 0) + c * d
        return MultiPoly(self.n, t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = MultiPoly.constant(self.n, 1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    # evaluation ------------------------------------------------------------
    def _build_horner(self):
        # nested dict: exponent of variable 0 -> sub-structure for the rest
        def build(items, j):
            if j == self.n:
                return sum(c for _, c in items)
            groups = {}
            for a, c in items:
                groups.setdefault(a[j], []).append((a, c))
            return {k: build(v, j + 1) for k, v in groups.items()}

        self._horner = build(list(self._terms.items()), 0)

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        """Evaluate at points ``z`` of shape ``(..., n)``.

        Uses Horner's scheme one variable at a time.
        """
        z = np.asarray(z)
        if z.shape[-1:] != (self.n,):
            raise ValidationError(f"expected trailing dimension {self.n}, got {z.shape}")
        if self._horner is None:
            self._build_horner()
        zc = z.astype(complex)

        def ev(node, j):
            if j == self.n:
                return node
            x = zc[..., j]
            kmax = max(node)
            acc = 0
            for k in range(kmax, -1, -1):
                acc = acc * x
                if k in node:
                    acc = acc + ev(node[k], j + 1)
            return acc

        if not self._terms:
            return np.zeros(z.shape[:-1], dtype=complex)[()]
        out = ev(self._horner, 0)
        out = np.broadcast_to(np.asarray(out, dtype=complex), z.shape[:-1])
        return out[()] if out.ndim == 0 else np.array(out)

    # calculus --------------------------------------------------------------
    def derivative(self, j: int) -> "MultiPoly":
        t = {}
        for a, c in self._terms.items():
            if a[j] > 0:
                b = list(a)
                b[j] -= 1
                t[tuple(b)] = c * a[j]
        return MultiPoly(self.n, t)

    def gradient(self) -> list:
        return [self.derivative(j) for j in range(self.n)]

    def principal_part(self) -> "MultiPoly":
        N = self.degree
        return MultiPoly(self.n, {a: c for a, c in self._terms.items() if sum(a) == N})

    def homogeneous_part(self, m: int) -> "MultiPoly":
        return MultiPoly(self.n, {a: c for a, c in self._terms.items() if sum(a) == m})

    def compose_linear(self, A) -> "MultiPoly":
        """Return ``xi -> P(A @ xi)`` for a square matrix ``A``."""
        A = np.asarray(A)
        lin = [
            sum((MultiPoly.variable(self.n, k) * complex(A[j, k]) for k in range(self.n)),
                MultiPoly(self.n))
            for j in range(self.n)
        ]
        out = MultiPoly(self.n)
        for a, c in self._terms.items():
            m = MultiPoly.constant(self.n, c)
            for j, e in enumerate(a):
                if e:
                    m = m * lin[j] ** e
            out = out + m
        return out

    # text format -----------------------------------------------------------
    def to_string(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for a, c in sorted(self._terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True):
            coef = _format_complex(c)
            mono = " ".join(f"x{j + 1}^{e}" for j, e in enumerate(a) if e)
            parts.append(f"{coef} * {mono}" if mono else coef)
        return " + ".join(parts)


def _format_complex(c: complex) -> str:
    if c.imag == 0:
        return f"({c.real!r})"
    sign = "+" if math.copysign(1.0, c.imag) > 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


_REAL = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COEF = re.compile(
    rf"(?P<pim>{_REAL})?i(?![0-9])|(?P<re>{_REAL})(?:(?P<isgn>[+-])(?P<im>{_REAL})?i)?"
)
_VAR = re.compile(r"x(?P<idx>\d+)(?:\^(?P<exp>\d+))?")


def _parse_coef(s, pos):
    """Parse an optional coefficient; returns (value or None, new pos)."""
    paren = s.startswith("(", pos)
    p = pos + 1 if paren else pos
    sign = 1.0
    if paren and p < len(s) and s[p] in "+-":
        sign = -1.0 if s[p] == "-" else 1.0
        p += 1
    m = _COEF.match(s, p)
    if not m or m.end() == p:
        if paren:
            raise PolyParseError(f"bad coefficient at position {pos}")
        return None, pos
    if m.group("re") is not None:
        val = complex(sign * float(m.group("re")), 0.0)
        if m.group("isgn"):
            im = float(m.group("im")) if m.group("im") else 1.0
            val += complex(0.0, im if m.group("isgn") == "+" else -im)
    else:
        im = float(m.group("pim")) if m.group("pim") else 1.0
        val = complex(0.0, sign * im)
    p = m.end()
    if paren:
        if not s.startswith(")", p):
            raise PolyParseError(f"unclosed parenthesis at position {pos}")
        p += 1
    return val, p


def parse_poly(text: str, n: int | None = None) -> MultiPoly:
    """Parse the polynomial text format.

    Terms are ``c * x1^a1 x2^a2 ...`` joined by ``+`` or ``-``. The
    coefficient ``c`` is ``re`` or ``re+imi`` (optionally parenthesized)
    and may be omitted; exponents default to 1. Whitespace is ignored.

    Examples
    --------
    >>> parse_poly("1*x1^2 + 1*x2^2 - 1").degree
    2
    """
    s = re.sub(r"\s+", "", text)
    if not s:
        raise PolyParseError("empty polynomial")
    pos = 0
    raw = []
    while pos < len(s):
        sign = 1.0
        if s[pos] in "+-":
            sign = -1.0 if s[pos] == "-" else 1.0
            pos += 1
        elif raw:
            raise PolyParseError(f"expected '+' or '-' at position {pos}")
        coef, pos = _parse_coef(s, pos)
        if coef is not None and coef.imag != 0 and coef.real != 0 and sign < 0:
            # leading sign binds to the real part of an unparenthesized re+imi
            coef = complex(-coef.real, coef.imag)
            sign = 1.0
        if coef is not None and pos < len(s) and s[pos] == "*":
            pos += 1
        exps = {}
        while pos < len(s):
            m = _VAR.match(s, pos)
            if not m:
                break
            j = int(m.group("idx"))
            if j < 1:
                raise PolyParseError("variables are numbered from x1")
            exps[j] = exps.get(j, 0) + int(m.group("exp") or 1)
            pos = m.end()
            if pos < len(s) and s[pos] == "*":
                pos += 1
        if coef is None and not exps:
            raise PolyParseError(f"unexpected character at position {pos}: {s[pos:pos + 10]!r}")
        raw.append((sign * (coef if coef is not None else 1.0), exps))
    nmax = max((max(e) for _, e in raw if e), default=1)
    if n is None:
        n = nmax
    elif nmax > n:
        raise PolyParseError(f"variable x{nmax} exceeds dimension {n}")
    terms = {}
    for c, e in raw:
        a = tuple(e.get(j + 1, 0) for j in range(n))
        terms[a] = terms.get(a, 0) + c
    return MultiPoly(n, terms)


# ---------------------------------------------------------------------------
# line restrictions
# ---------------------------------------------------------------------------


def line_coefficients(P: MultiPoly, theta, xi, degree: int | None = None):
    """Coefficients of ``tau -> P(tau*theta + xi)`` in ascending order.

    Exact multinomial expansion, vectorized over leading axes of ``xi``.

    Parameters
    ----------
    theta : array_like, shape (n,) or (..., n)
    xi : array_like, shape (..., n)
    degree : int, optional
        Length of the output minus one; defaults to ``P.degree``.

    Returns
    -------
    ndarray, shape (..., degree + 1)
    """
    theta = np.asarray(theta, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    N = P.degree if degree is None else degree
    batch = np.broadcast_shapes(theta.shape[:-1], xi.shape[:-1])
    out = np.zeros(batch + (N + 1,), dtype=complex)
    for a, c in P.terms.items():
        poly = np.ones(batch + (1,), dtype=complex) * c
        for j, e in enumerate(a):
            if e == 0:
                continue
            fac = np.stack(
                [math.comb(e, m) * theta[..., j] ** m * xi[..., j] ** (e - m)
                 * np.ones(batch) for m in range(e + 1)],
                axis=-1,
            )
            new = np.zeros(batch + (poly.shape[-1] + e,), dtype=complex)
            for m in range(e + 1):
                new[..., m:m + poly.shape[-1]] += poly * fac[..., m:m + 1]
            poly = new
        out[..., : poly.shape[-1]] += poly
    return out


@dataclass(frozen=True)
class LineRestriction:
    """Univariate polynomial ``p(tau) = P(tau*theta + xi_perp)``.

    Attributes
    ----------
    coeffs : ndarray
        Ascending coefficients ``c_0 .. c_N``.
    theta, xi_perp : ndarray
        Unit direction and base point orthogonal to it.
    """

    coeffs: np.ndarray
    theta: np.ndarray
    xi_perp: np.ndarray
    leading_tol: float = 1e-14

    @property
    def nominal_degree(self):
        return len(self.coeffs) - 1

    @property
    def degree(self):
        """Effective degree after dropping negligible top coefficients."""
        c = np.abs(self.coeffs)
        scale = c.max() if c.size else 0.0
        if scale == 0:
            return 0
        nz = np.nonzero(c > self.leading_tol * scale)[0]
        return int(nz[-1])

    @property
    def degenerate(self):
        return self.degree < self.nominal_degree

    def __call__(self, tau):
        return np.polynomial.polynomial.polyval(tau, self.coeffs)


def restrict_to_line(P: MultiPoly, theta, xi_perp) -> LineRestriction:
    """Restrict ``P`` to the line through ``xi_perp`` along the unit ``theta``."""
    theta = np.asarray(theta, dtype=float)
    xi_perp = np.asarray(xi_perp, dtype=float)
    if theta.shape != (P.n,) or xi_perp.shape != (P.n,):
        raise ValidationError("theta and xi_perp must have shape (n,)")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-12:
        raise ValidationError("theta must be a unit vector")
    if abs(theta @ xi_perp) > 1e-12 * max(1.0, np.linalg.norm(xi_perp)):
        raise ValidationError("xi_perp must be orthogonal to theta")
    return LineRestriction(line_coefficients(P, theta, xi_perp), theta, xi_perp)


# ---------------------------------------------------------------------------
# discriminants
# ---------------------------------------------------------------------------


def _sylvester_disc(coeffs):
    """Discriminant from the Sylvester resultant of ``p`` and ``p'``.

    ``coeffs`` has shape (..., N+1), ascending, with nonzero top entry.
    """
    c = np.asarray(coeffs, dtype=complex)
    N = c.shape[-1] - 1
    if N == 1:
        return c[..., 1]
    hi = c[..., ::-1]  # descending
    d = hi[..., :-1] * np.arange(N, 0, -1)
    size = 2 * N - 1
    S = np.zeros(c.shape[:-1] + (size, size), dtype=complex)
    for r in range(N - 1):
        S[..., r, r:r + N + 1] = hi
    for r in range(N):
        S[..., N - 1 + r, r:r + N] = d
    res = np.linalg.det(S)
    sign = -1.0 if (N * (N - 1) // 2) % 2 else 1.0
    return sign * res / hi[..., 0]


def discriminant(P: MultiPoly, theta, xi):
    """``Delta(theta, xi) = disc_tau P(tau*theta + xi)`` by the resultant route.

    ``theta`` and ``xi`` may be complex and need not be orthogonal; the
    result is vectorized over leading axes. Degree-one restrictions return
    the leading coefficient.
    """
    coeffs = line_coefficients(P, theta, xi)
    return _sylvester_disc(coeffs)


def discriminant_line(p: LineRestriction, cross_check: bool = True) -> complex:
    """Discriminant of a line restriction, cross-checked against roots.

    The Sylvester-resultant value is returned. The root-product value
    ``c_N^(2N-2) prod_{i<j} (tau_i - tau_j)^2`` is compared at relative
    tolerance 1e-8; disagreement only warns when roots are clustered.
    """
    if p.degenerate or p.nominal_degree == 0:
        raise DegenerateLine("restriction lost its leading coefficient")
    N = p.nominal_degree
    val = complex(_sylvester_disc(p.coeffs))
    if cross_check and N >= 2:
        from .roots import roots as _roots

        r = _roots(p).roots
        cN = p.coeffs[-1]
        prod = cN ** (2 * N - 2)
        mind = np.inf
        for i in range(N):
            for j in range(i + 1, N):
                prod *= (r[i] - r[j]) ** 2
                mind = min(mind, abs(r[i] - r[j]))
        scale = max(abs(val), abs(prod), 1e-300)
        if abs(val - prod) > 1e-8 * scale:
            msg = f"discriminant routes disagree: resultant {val}, root product {prod}"
            if mind < 1e-4:
                warnings.warn(msg + " (clustered roots)", RuntimeWarning, stacklevel=2)
            else:
                raise ArithmeticError(msg)
    return val


# ---------------------------------------------------------------------------
# second-order normal form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalForm2:
    """Normal form ``p(eta) = sum eps_j (i eta_j - beta_j)^2 + b``.

    Coordinates ``y`` are related to the original ``x`` by
    ``x = basis @ diag(scale) @ y``, so frequencies satisfy
    ``eta = diag(scale) @ basis.T @ xi``. Axes with ``eps_j = 0`` keep a
    first-order term ``2 alpha_j (i eta_j)``.
    """

    eps: np.ndarray
    alpha: np.ndarray
    Bconst: float
    beta: np.ndarray
    b: float
    basis: np.ndarray
    scale: np.ndarray

    @property
    def n(self):
        return len(self.eps)

    def eta_from_xi(self, xi):
        return np.asarray(xi) @ self.basis * self.scale

    def symbol(self, eta):
        """Evaluate the normal-form symbol at frequencies ``eta`` (..., n)."""
        eta = np.asarray(eta)
        out = np.full(eta.shape[:-1], complex(self.b))
        for j in range(self.n):
            if self.eps[j] != 0:
                out = out + self.eps[j] * (1j * eta[..., j] - self.beta[j]) ** 2
            else:
                out = out + 2 * self.alpha[j] * 1j * eta[..., j]
        return out

    def Q(self, k, eta):
        """``Q_k``: the symbol with the ``k``-th square removed."""
        eta = np.asarray(eta)
        out = self.symbol(eta)
        if self.eps[k] != 0:
            out = out - self.eps[k] * (1j * eta[..., k] - self.beta[k]) ** 2
        else:
            out = out - 2 * self.alpha[k] * 1j * eta[..., k]
        return out

    def pullback(self, xi):
        """Normal-form symbol expressed in the original frequencies."""
        return self.symbol(self.eta_from_xi(xi))

    def as_poly(self) -> MultiPoly:
        """Normal-form symbol as a polynomial in ``eta``."""
        n = self.n
        P = MultiPoly.constant(n, self.b)
        for j in range(n):
            v = MultiPoly.variable(n, j)
            if self.eps[j] != 0:
                P = P + self.eps[j] * (1j * v - self.beta[j]) ** 2
            else:
                P = P + 2j * self.alpha[j] * v
        return P

    def to_dict(self):
        return {
            "eps": [int(e) for e in self.eps],
            "alpha": [float(a) for a in self.alpha],
            "B": float(self.Bconst),
            "beta": [float(x) for x in self.beta],
            "b": float(self.b),
            "basis": np.asarray(self.basis).tolist(),
            "scale": [float(s) for s in self.scale],
        }


def normalize_second_order(P: MultiPoly, tol: float = 1e-12) -> NormalForm2:
    """Reduce a real second-order operator to its normal form.

    The operator ``P(D)`` written in derivatives, ``sum d_a d^a`` with
    ``d_a = c_a (-i)^|a|``, must have real coefficients.
    """
    if P.degree != 2:
        raise ValidationError("normal form requires a second-order symbol")
    n = P.n
    scale_c = max(abs(c) for c in P.terms.values())
    A = np.zeros((n, n))
    lin = np.zeros(n)
    B = 0.0
    for a, c in P.terms.items():
        d = c * (-1j) ** sum(a)
        if abs(d.imag) > tol * scale_c:
            raise ValidationError("operator coefficients must be real")
        d = d.real
        nz = [j for j, e in enumerate(a) if e]
        if sum(a) == 2:
            if len(nz) == 1:
                A[nz[0], nz[0]] += d
            else:
                A[nz[0], nz[1]] += d / 2
                A[nz[1], nz[0]] += d / 2
        elif sum(a) == 1:
            lin[nz[0]] += d / 2
        else:
            B += d
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        lam = np.diag(A).copy()
        V = np.eye(n)
    else:
        lam, V = np.linalg.eigh(A)
        for j in range(n):
            if V[np.argmax(np.abs(V[:, j])), j] < 0:
                V[:, j] = -V[:, j]
    lam_scale = max(np.abs(lam).max(), 1e-300)
    lam = np.where(np.abs(lam) <= tol * lam_scale, 0.0, lam)
    eps = np.sign(lam).astype(int)
    s = np.where(eps != 0, np.sqrt(np.abs(lam)), 1.0)
    alpha = (V.T @ lin) / s
    beta = np.where(eps != 0, -eps * alpha, 0.0)
    b = B - float(np.sum(eps * beta ** 2))
    return NormalForm2(eps, alpha, float(B), beta, b, V, s)


# ---------------------------------------------------------------------------
# sampled nonsingularity
# ---------------------------------------------------------------------------


@dataclass
class NonsingularReport:
    n_samples: int
    n_near: int
    min_grad: float
    violations: list = field(default_factory=list)

    @property
    def verdict(self):
        return "violation found" if self.violations else "no violation found"

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "n_near_variety": self.n_near,
            "min_grad_near_variety": self.min_grad,
            "n_violations": len(self.violations),
            "verdict": self.verdict,
        }


def is_nonsingular_sampled(P: MultiPoly, samples, tol: float = 1e-6,
                           grad_tol: float = 1e-6) -> NonsingularReport:
    """Look for common zeros of ``P`` and its gradient near given samples.

    Each sample takes one Newton step toward the variety; samples with
    ``|P| < tol`` afterwards are "near" and their gradient norm is recorded.
    A finding of no violation is evidence only.
    """
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    if z.shape[0] == 0:
        raise ValidationError("no samples")
    grad = P.gradient()

    def gnorm(w):
        g = np.stack([np.broadcast_to(gj.eval(w), w.shape[:-1]) for gj in grad], axis=-1)
        return g, np.linalg.norm(g, axis=-1)

    val = P.eval(z)
    g, gn = gnorm(z)
    safe = gn > 1e-300
    step = np.zeros_like(z)
    step[safe] = (val[safe] / gn[safe] ** 2)[:, None] * np.conj(g[safe])
    z = z - step
    val = P.eval(z)
    g, gn = gnorm(z)
    near = np.abs(val) < tol
    bad = near & (gn < grad_tol)
    return NonsingularReport(
        n_samples=int(z.shape[0]),
        n_near=int(near.sum()),
        min_grad=float(gn[near].min()) if near.any() else float("inf"),
        violations=[tuple(p) for p in z[bad]],
    )


def monomials(n, degree):
    """All exponent tuples of total degree <= ``degree`` in grlex order."""
    out = [a for a in product(range(degree + 1), repeat=n) if sum(a) <= degree]
    return sorted(out, key=_grlex_key)
