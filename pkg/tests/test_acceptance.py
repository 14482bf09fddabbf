"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they
are produced; they are also collected in the terminal summary.
"""

import time

import numpy as np
import pytest

from simplechar.dirac import build_matrices, m_of_xi, normality_defect
from simplechar.directions import CertGrid, count_clusters, direction_set_from
from simplechar.fields import (
    DomainSpec,
    GridField,
    diameter,
    domain_weights,
    l2_on_domain,
    mixed_norm,
    partial_dft,
)
from simplechar.harness import (
    Scenario,
    SourceSpec,
    faddeev_anisotropic_check,
    invariance_study,
    laplacian_counterexample,
    scaling_study,
    solve,
    verify_estimate,
)
from simplechar.multipliers import (
    MultiplierBoundEstimate,
    cutoff_check_l1,
    cutoff_line_coeffs,
    is_constant_part,
    sampled_theta_norm,
    second_order_cutoff,
    second_order_cutoffs,
    sublevel_estimate,
)
from simplechar.ode import FirstOrderProblem, residual, solve_first_order
from simplechar.poly import MultiPoly, discriminant, monomials, normalize_second_order, parse_poly
from simplechar.roots import partial_fractions, roots


def random_poly(rng, n, N):
    terms = {a: complex(*rng.normal(size=2)) for a in monomials(n, N)}
    return MultiPoly(n, terms)


def root_product_disc(c):
    # independent route: c_N^(2N-2) prod_{i<j} (r_i - r_j)^2 with numpy roots
    r = np.roots(c[::-1])
    N = len(r)
    out = c[-1] ** (2 * N - 2)
    for i in range(N):
        for j in range(i + 1, N):
            out *= (r[i] - r[j]) ** 2
    return out


def test_criterion_01_partial_fractions(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        N = rng.integers(2, 7)
        c = rng.normal(size=N + 1) + 1j * rng.normal(size=N + 1)
        pf = partial_fractions(roots(c), check=False)
        tau = 3 * (rng.normal(size=10) + 1j * rng.normal(size=10))
        direct = 1.0 / np.polynomial.polynomial.polyval(tau, c)
        worst = max(worst, float(np.max(np.abs(pf(tau) - direct) / np.abs(direct))))
    dt = time.perf_counter() - t0
    ok = worst < 1e-8 and dt < 5
    criterion(1, ok, f"partial fractions: max rel error {worst:.2e}, {dt:.2f} s")
    assert ok


def test_criterion_02_discriminant_laws(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    e_hom = e_shift = e_oracle = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 4))
        N = int(rng.integers(2, 5))
        P = random_poly(rng, n, N)
        theta = rng.normal(size=n)
        theta /= np.linalg.norm(theta)
        xi = rng.normal(size=n)
        lam = complex(*rng.normal(size=2))
        r = rng.normal() * 2
        d0 = complex(discriminant(P, theta, xi))
        d_lam = complex(discriminant(P, lam * theta, xi))
        d_shift = complex(discriminant(P, theta, xi + r * theta))
        e_hom = max(e_hom, abs(d_lam - lam ** (N * (N - 1)) * d0) / abs(d_lam))
        e_shift = max(e_shift, abs(d_shift - d0) / abs(d0))
        # the line coefficients by direct evaluation at N+1 nodes
        nodes = np.arange(N + 1, dtype=float)
        vals = np.array([P(t * theta + xi) for t in nodes])
        c = np.linalg.solve(np.vander(nodes, increasing=True), vals)
        e_oracle = max(e_oracle, abs(root_product_disc(c) - d0) / abs(d0))
    dt = time.perf_counter() - t0
    ok = max(e_hom, e_shift, e_oracle) < 1e-8 and dt < 10
    criterion(2, ok, f"discriminant: homogeneity {e_hom:.2e}, shift {e_shift:.2e}, "
                     f"root-product oracle {e_oracle:.2e}, {dt:.2f} s")
    assert ok


def _mixed_norm_cases(n, dims, L, rng, count=50):
    """Worst excess of both mixed-norm inequalities (<= 0 means they hold)."""
    g = GridField.zeros(dims, (L,) * n)
    x = g.points()
    ex_u = ex_f = -np.inf
    for _ in range(count):
        axis = int(rng.integers(n))
        # u: random field under a compact envelope
        env = np.exp(-np.sum((x - rng.uniform(-L / 8, L / 8, n)) ** 2, -1) / (2 * (L / 10) ** 2))
        env[np.abs(env) < 1e-12] = 0.0
        u = g.with_samples(env * (rng.normal(size=dims) + 1j * rng.normal(size=dims)))
        Dr = DomainSpec.ball(rng.uniform(-L / 6, L / 6, n), rng.uniform(L / 16, L / 4))
        lhs = l2_on_domain(u, Dr)
        rhs = np.sqrt(diameter(Dr)) * mixed_norm(partial_dft(u, axis), "inf", 2)
        ex_u = max(ex_u, (lhs - rhs) / rhs)
        # f: random values on cells lying wholly inside D_s
        Ds = DomainSpec.ball(rng.uniform(-L / 6, L / 6, n), rng.uniform(L / 16, L / 4))
        inside = domain_weights(g, Ds) == 1.0
        f = g.with_samples(inside * (rng.normal(size=dims) + 1j * rng.normal(size=dims)))
        lhs = mixed_norm(partial_dft(f, axis), 1, 2)
        rhs = np.sqrt(diameter(Ds)) * l2_on_domain(f, Ds)
        ex_f = max(ex_f, (lhs - rhs) / rhs)
    return ex_u, ex_f


def test_criterion_03_mixed_norm_inequalities(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    u2, f2 = _mixed_norm_cases(2, (64, 64), 16.0, rng)
    u3, f3 = _mixed_norm_cases(3, (32, 32, 32), 16.0, rng)
    dt = time.perf_counter() - t0
    worst = max(u2, f2, u3, f3)
    ok = worst <= 1e-8 and dt < 30
    criterion(3, ok, f"mixed norms: worst relative excess n=2 ({u2:.2e}, {f2:.2e}), "
                     f"n=3 ({u3:.2e}, {f3:.2e}), {dt:.2f} s")
    assert ok


def test_criterion_04_first_order_contract(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    c45 = c46 = res = 0.0
    for _ in range(50):
        nperp, T = 16, 128
        lengths = (rng.uniform(4, 16), rng.uniform(8, 32))
        g = GridField.zeros((nperp, T), lengths)
        t = g.points()[..., 1]
        lo, hi = np.sort(rng.uniform(-lengths[1] / 3, lengths[1] / 3, 2))
        data = (rng.normal(size=(nperp, T)) + 1j * rng.normal(size=(nperp, T))) * ((t > lo) & (t < hi))
        gm = partial_dft(g.with_samples(data), 1)
        q = rng.normal(size=nperp) * 2 + 1j * rng.normal(size=nperp)
        prob = FirstOrderProblem(q, gm)
        w = solve_first_order(prob)
        c45 = max(c45, mixed_norm(w, "inf", 2) / mixed_norm(gm, 1, 2))
        gamma = np.abs(q.imag).min()
        c46 = max(c46, mixed_norm(w, "inf", 2) * gamma / mixed_norm(gm, "inf", 2))
        res = max(res, residual(w, None, prob, method="mixed-exact"))
    dt = time.perf_counter() - t0
    ok = c45 <= 1 + 1e-12 and c46 <= 1 + 1e-12 and res < 1e-12 and dt < 30
    criterion(4, ok, f"first-order solve: sup/L1 constant {c45:.6f}, sup*gamma/sup constant "
                     f"{c46:.6f}, mixed-exact residual {res:.2e}, {dt:.2f} s")
    assert ok


MULTIPLIER_FAMILY = {
    "helmholtz 2D": "1 - x1^2 - x2^2",
    "faddeev 2D": "-x1^2 - x2^2 + 2i*x1",
    "helmholtz 3D": "1 - x1^2 - x2^2 - x3^2",
    "hyperbolic 3D": "1 - x1^2 + x2^2 - x3^2 + 0.5i*x2",
}


def test_criterion_05_multiplier_bounds(criterion):
    t0 = time.perf_counter()
    theta_max = core_max = l1_ratio = part_err = 0.0
    for text in MULTIPLIER_FAMILY.values():
        nf = normalize_second_order(parse_poly(text))
        n = nf.n
        for eps in (0.05, 0.2):
            grid = GridField.zeros((64,) * n, (24.0,) * n)
            part_err = max(part_err, second_order_cutoffs(nf, eps, grid).partition_error())
            rng = np.random.default_rng(5)
            for k in range(n):
                for j in range(n):
                    if j == k:
                        continue
                    theta = np.eye(n)[j]
                    pts = rng.uniform(-3, 3, size=(12, n))
                    pts[:, j] = 0.0

                    def phi(p, k=k):
                        return second_order_cutoff(nf, k, nf.eta_from_xi(p), eps)

                    theta_max = max(theta_max, sampled_theta_norm(phi, theta, pts, 60.0, 1 << 15))
                    for x in rng.uniform(-3, 3, size=(40, n)):
                        x[j] = 0.0
                        for part in cutoff_line_coeffs(nf, k, j, x):
                            if is_constant_part(part):
                                continue
                            core_max = max(core_max, sublevel_estimate(part, eps, 8.0).core)
                            l1 = cutoff_check_l1(part, eps, 60.0)
                            e2 = sublevel_estimate(part, 2 * eps, 8.0)
                            bound = MultiplierBoundEstimate(e2.mu1, e2.M1, e2.M2, eps).bound
                            if l1 > 1e-9:
                                l1_ratio = max(l1_ratio, l1 / bound)
    dt = time.perf_counter() - t0
    ok = (theta_max <= 18 * 1.02 and core_max <= 9 * np.sqrt(2) * 1.02 and l1_ratio <= 1.02
          and part_err < 1e-12 and dt < 60)
    criterion(5, ok, f"multipliers: max cutoff norm {theta_max:.3f} (<= 18), max sublevel core "
                     f"{core_max:.3f} (<= {9 * np.sqrt(2):.3f}), L1/bound {l1_ratio:.3f}, "
                     f"partition error {part_err:.1e}, {dt:.1f} s")
    assert ok


def _gaussian_scenario(preset, params, N, **kw):
    return Scenario(preset=preset, params=params, resolution=N, box=64.0,
                    source=SourceSpec([[0.0, 0.0]], [1.0], [1.0]),
                    D_r=[DomainSpec.ball([3.0, 1.0], 5.0)], **kw)


def test_criterion_06_end_to_end_residual(criterion):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for preset, params in (("helmholtz", {"k": 1.0}), ("bilaplacian", {"lam": 1.0})):
        r = {}
        for N in (128, 256):
            _, _, rep = solve(_gaussian_scenario(preset, params, N), dual=(preset == "helmholtz"))
            r[N] = rep
        order = np.log2(r[128].residual_fd / r[256].residual_fd)
        ok &= r[256].residual_fd < 1e-3 and order >= 4
        msg = f"{preset} residual {r[256].residual_fd:.2e} order {order:.2f}"
        if preset == "helmholtz":
            dual = r[256].extra["dual_route_difference"]
            ok &= dual < 1e-8
            msg += f" two-route {dual:.1e}"
        parts.append(msg)
    dt = time.perf_counter() - t0
    ok &= dt < 120
    criterion(6, ok, "; ".join(parts) + f", {dt:.1f} s")
    assert ok


def test_criterion_07_estimate_verification(criterion):
    t0 = time.perf_counter()
    sc = _gaussian_scenario("helmholtz", {"k": 1.0}, 256)
    _, summary = verify_estimate(sc, members=20, n_sources=4)
    rows = invariance_study(sc, shifts_cells=(8,), angles=(90.0, 37.0))
    shift = max(r["change"] for r in rows if r["transform"].startswith("shift"))
    rots = [r for r in rows if r["transform"].startswith("rotation")]
    rot_ok = all(r["change"] < r["resample_residual"] for r in rots)
    dt = time.perf_counter() - t0
    ok = summary["finite"] and shift < 1e-9 and rot_ok and dt < 300
    rot_txt = ", ".join(f"{r['transform']} change {r['change']:.1e} < resample {r['resample_residual']:.1e}"
                        for r in rots)
    criterion(7, ok, f"estimate: max ratio {summary['max_ratio']:.4f} over {summary['members']} "
                     f"(cv {summary['cv']:.2f}), translation change {shift:.1e}, {rot_txt}, {dt:.1f} s")
    assert ok


def test_criterion_08_scaling_laws(criterion):
    t0 = time.perf_counter()
    base = dict(resolution=512, box=32.0, source=SourceSpec([[0.0, 0.0]], [0.9], [1.0]),
                D_r=[DomainSpec.ball([2.0, 1.0], 4.0)])
    ladders = (("helmholtz", {"k": 1.0}, (1.0, 2.0, 4.0, 8.0)),
               ("bilaplacian", {"lam": 1.0}, (1.0, 2.0, 4.0)),
               ("faddeev", {"re": 1.0}, (1.0, 2.0, 4.0)))
    ok = True
    parts = []
    for preset, params, values in ladders:
        _, s = scaling_study(Scenario(preset=preset, params=params, **base), values)
        ok &= s["pass"]
        parts.append(f"{preset} slope {s['slope']:.3f} (expected {s['expected']:g} +- {s['tolerance']:g})")
    _, an = faddeev_anisotropic_check(Scenario(preset="faddeev", params={"re": 1.0}, **base))
    ok &= an["pass"]
    dt = time.perf_counter() - t0
    ok &= dt < 600
    criterion(8, ok, "; ".join(parts) + f"; anisotropic constant {an['max_constant']:.6f}, {dt:.1f} s")
    assert ok


def test_criterion_09_dirac_system(criterion):
    t0 = time.perf_counter()
    dm = build_matrices(1.0)
    ident = all(np.array_equal(A.T, -A) and np.array_equal(A @ A, -np.eye(4, dtype=int)) for A in dm.A)
    ident &= dm.sign_table() == {(0, 1): (1, 2), (0, 2): (-1, 1), (1, 0): (-1, 2),
                                 (1, 2): (1, 0), (2, 0): (1, 1), (2, 1): (-1, 0)}
    xi = np.random.default_rng(9).normal(size=(100, 3)) * 4
    normal = max(float(normality_defect(m_of_xi(dm, xi, k, check=False)).max()) for k in range(3))

    src = SourceSpec([[0.0, 0.0, 0.0]], [0.45], [1.0])
    small = Scenario(preset="dirac", params={"omega": 1.0}, n=3, resolution=32, box=16.0, source=src,
                     D_r=[DomainSpec.ball([1.0, 0.5, 0.0], 3.0)], quadrature="constant")
    _, _, rep_c = solve(small)
    mixed = rep_c.residual_mixed_exact

    rng = np.random.default_rng(90)
    balls = [DomainSpec.ball(rng.uniform(-1, 1, 3), rng.uniform(2.5, 4.0)) for _ in range(10)]
    sc = small.replace(resolution=64, quadrature="spectral", D_r=balls)
    _, _, rep = solve(sc)
    ratios = np.array(rep.ratios)
    spread = float(np.abs(ratios / ratios.mean() - 1).max())
    dt = time.perf_counter() - t0
    ok = ident and normal < 1e-10 and mixed < 1e-10 and spread <= 0.2 and dt < 120
    criterion(9, ok, f"Dirac: identities {'exact' if ident else 'broken'}, normality {normal:.1e}, "
                     f"mixed-exact {mixed:.1e}, ratio {ratios.mean():.4f} +- {100 * spread:.1f}% over 10, "
                     f"FD residual {rep.residual_fd:.1e}, {dt:.1f} s")
    assert ok


def _far_ball_ratio(A, R, D):
    # int_{B_R(c)} |x|^-2 dx with |c| = D, by spherical shells about the origin
    shell = 2 * np.pi * (R - (D * D - R * R) / (2 * D) * np.log((D + R) / (D - R)))
    mass = 4 * np.pi / 3 * A ** 3
    return mass * np.sqrt(shell) / (np.sqrt(4 * A * R) * np.sqrt(mass))


def test_criterion_10_laplacian_counterexample(criterion):
    """The stated slope is 0.5; the closed form gives exactly 1, so this fails."""
    t0 = time.perf_counter()
    rows, summary = laplacian_counterexample((1.0, 2.0, 4.0, 8.0), R=64.0)
    dt = time.perf_counter() - t0
    slope = summary["slope"]
    ok = abs(slope - 0.5) <= 0.05 and dt < 60
    criterion(10, ok, f"Laplacian counterexample: slope {slope:.4f} vs stated 0.5 +- 0.05 "
                      f"(closed form 1: ratio grows like A), {dt:.2f} s")
    assert ok


def test_counterexample_closed_form_slope_is_one():
    rows, summary = laplacian_counterexample((1.0, 2.0, 4.0, 8.0), R=64.0)
    for r in rows:
        assert r["ratio"] == pytest.approx(_far_ball_ratio(r["A"], 64.0, 128.0), rel=1e-10)
    assert summary["slope"] == pytest.approx(1.0, abs=1e-10)
    assert summary["estimate_fails"]


def test_criterion_11_direction_finding(criterion):
    t0 = time.perf_counter()
    P = parse_poly("1 - x1^2 - x2^2 - x3^2", 3)
    grid = CertGrid(1.6, 97)
    axes = np.eye(3)
    four = direction_set_from(P, [*axes, np.ones(3) / np.sqrt(3)], 0.02, cert_grid=grid, sample_M=513)
    three = direction_set_from(P, list(axes), 0.02, cert_grid=grid, sample_M=513)
    h = 2 * grid.L / (grid.M - 1)
    clusters = count_clusters(three.uncovered, 2.5 * h)
    # each leftover cluster sits at (+-1, +-1, +-1)/sqrt(2), where all three
    # axis tangent cylinders |xi_perp| = 1 meet
    centers_ok = True
    if clusters == 8:
        for s in np.array(np.meshgrid([-1, 1], [-1, 1], [-1, 1])).reshape(3, -1).T:
            near = three.uncovered[np.all(np.sign(three.uncovered) == s, axis=1)]
            centers_ok &= len(near) > 0 and np.allclose(near.mean(0), s / np.sqrt(2), atol=3 * h)
    dt = time.perf_counter() - t0
    ok = four.certified and not three.certified and clusters == 8 and centers_ok and dt < 60
    criterion(11, ok, f"directions: four-direction margin {four.margin:+.3f}, three axes leave "
                      f"{len(three.uncovered)} points in {clusters} clusters at (+-1,+-1,+-1)/sqrt2, "
                      f"{dt:.1f} s")
    assert ok
