"""Companion linearization of the fiber's quadratic k1-pencil.

For fixed (k2, lambda) the equation H(k1, k2) u = lambda u is quadratic in
k1: (K0 + k1 K1 + k1^2 K2) u = 0.  The block companion matrix

    T = [[0, K2^-1], [-K0, -K1 K2^-1]]

has exactly the pencil roots as eigenvalues: T (u, k1 K2 u) = k1 (u,
k1 K2 u).  Band extrema show up as *degenerate* (multiplicity >= 2) real
eigenvalues of T, which is what the discriminant machinery below detects.
The module also carries the explicit free-operator spectrum geometry: the
point set where the free symbol vanishes at special complex k2, and the
separating brick-wall grid at positive distance from it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coefficients import CoefficientSet
from .errors import BoundaryEigenvalue, IllConditionedMass, SolverFailure
from .fiber import PencilBlocks, PlaneWaveBasis, assemble_fiber, free_symbol, pencil_blocks
from .lattice import TWO_PI, Lattice2D

# Relative clustering / degeneracy thresholds; see DiscriminantScan.
TOL_CLUSTER = 1e-6
TOL_PAIR = 1e-5
TOL_REAL = 1e-4
TOL_DISC = 1e-12
TOL_BOUNDARY = 1e-7
COND_LIMIT = 1e10


@dataclass
class LinearizedOperator:
    k2: complex
    lam: complex
    blocks: np.ndarray
    basis: PlaneWaveBasis
    pencil: PencilBlocks
    mass_condition: float
    _eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.blocks.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """All 2*dim eigenvalues, sorted by (Re, Im) for determinism."""
        if self._eigenvalues is None:
            try:
                vals = np.linalg.eigvals(self.blocks)
            except np.linalg.LinAlgError as exc:
                raise SolverFailure("companion eigensolver failed") from exc
            order = np.lexsort((vals.imag, vals.real))
            self._eigenvalues = vals[order]
        return self._eigenvalues

    def scale(self) -> float:
        return self.pencil.scale()


def assemble_t1(cs: CoefficientSet, k2: complex, lam: complex,
                basis: PlaneWaveBasis,
                cond_limit: float = COND_LIMIT) -> LinearizedOperator:
    """Companion matrix of the k1-pencil at (k2, lambda)."""
    pb = pencil_blocks(cs, k2, lam, basis)
    eigs = np.linalg.eigvalsh(pb.K2)
    cond = float(eigs[-1] / max(eigs[0], 1e-300))
    if eigs[0] <= 0 or cond > cond_limit:
        raise IllConditionedMass(
            f"leading block condition {cond:.3e} exceeds {cond_limit:.1e}"
        )
    k2inv = np.linalg.inv(pb.K2)
    dim = basis.dim
    blocks = np.zeros((2 * dim, 2 * dim), dtype=complex)
    blocks[:dim, dim:] = k2inv
    blocks[dim:, :dim] = -pb.K0
    blocks[dim:, dim:] = -pb.K1 @ k2inv
    return LinearizedOperator(
        k2=complex(k2), lam=complex(lam), blocks=blocks,
        basis=basis, pencil=pb, mass_condition=cond,
    )


# -- spectrum with multiplicity clustering ------------------------------------

@dataclass
class EigenCluster:
    center: complex
    multiplicity: int
    members: list[int]


@dataclass
class T1Spectrum:
    eigenvalues: np.ndarray
    clusters: list[EigenCluster]


def cluster_eigenvalues(values: np.ndarray,
                        tol_cluster: float = TOL_CLUSTER) -> list[EigenCluster]:
    """Single-linkage grouping at |z_i - z_j| <= tol_cluster * (1 + |z_i|)."""
    n = len(values)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(values[i] - values[j])
            if gap <= tol_cluster * (1.0 + min(abs(values[i]), abs(values[j]))):
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[rb] = ra
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    clusters = [
        EigenCluster(
            center=complex(np.mean(values[idx])),
            multiplicity=len(idx),
            members=sorted(idx),
        )
        for idx in groups.values()
    ]
    clusters.sort(key=lambda c: (c.center.real, c.center.imag))
    return clusters


def t1_spectrum(t1: LinearizedOperator,
                tol_cluster: float = TOL_CLUSTER) -> T1Spectrum:
    vals = t1.eigenvalues()
    return T1Spectrum(eigenvalues=vals, clusters=cluster_eigenvalues(vals, tol_cluster))


def free_t1_eigenvalues(lat: Lattice2D, basis: PlaneWaveBasis,
                        k2: complex, lam: complex) -> np.ndarray:
    """Closed-form companion spectrum for the free set.

    Per basis index the pencil is scalar: h_m(z, k2) = lam, so
    z = -xi_1(m) +/- sqrt(lam - (xi_2(m) + k2)^2).
    """
    roots = []
    for m in basis.indices:
        xi = lat.frequency(m)
        s = np.sqrt(complex(lam) - (xi[1] + k2) ** 2)
        roots.append(-xi[0] + s)
        roots.append(-xi[0] - s)
    vals = np.asarray(roots)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


# -- correspondence with the fiber --------------------------------------------

def sigma_min(a: np.ndarray, method: str = "lu", iters: int = 4) -> float:
    """Smallest singular value, exactly (svd) or by LU inverse iteration.

    The LU route runs power iteration on (A^H A)^-1 via two triangular
    solves per step; with the target value orders of magnitude below the
    rest of the spectrum it converges in one or two steps and costs a
    fraction of a full SVD.
    """
    if method == "svd":
        return float(np.linalg.svd(a, compute_uv=False)[-1])
    n = a.shape[0]
    with warnings.catch_warnings():
        # Exactly singular probes are a legitimate outcome (sigma_min 0).
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            lu, piv = sla.lu_factor(a, check_finite=False)
        except sla.LinAlgError:
            return 0.0
        rng = np.random.default_rng(1234)
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        x /= np.linalg.norm(x)
        est = np.inf
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for _ in range(iters):
                w = sla.lu_solve((lu, piv), x, trans=2, check_finite=False)
                y = sla.lu_solve((lu, piv), w, check_finite=False)
                norm = np.linalg.norm(y)
                if not np.isfinite(norm) or norm == 0.0:
                    return 0.0
                est = 1.0 / np.sqrt(norm)
                x = y / norm
    return float(est)


def correspondence_check(cs: CoefficientSet, k2: complex, lam: complex,
                         basis: PlaneWaveBasis, method: str = "lu") -> float:
    """Max over companion eigenvalues z of sigma_min(H_N(z, k2) - lam).

    The pencil-companion equivalence is exact at finite truncation, so the
    returned number is pure floating-point residue (expected at the
    1e-8 * scale level).  The probed matrix is built from the pencil
    blocks, which reproduce the assembled fiber identically (collecting
    k1-powers is exact algebra, independently tested); this makes the
    probe an O(dim^2) update instead of a fresh assembly.
    """
    t1 = assemble_t1(cs, k2, lam, basis)
    worst = 0.0
    for z in t1.eigenvalues():
        worst = max(worst, sigma_min(t1.pencil.reconstruct(z), method=method))
    return worst


def eigenvector_relation_residual(cs: CoefficientSet, k, basis: PlaneWaveBasis,
                                  band: int = 1) -> float:
    """Residual of T1(k2, lambda_j) (u, k1 K2 u) = k1 (u, k1 K2 u).

    Takes a real k, solves the Hermitian fiber for its band-th eigenpair,
    and applies the companion matrix at lambda = lambda_j; normalized by
    the pencil scale and the stacked vector norm.
    """
    k = np.asarray(k, dtype=float)
    h = assemble_fiber(cs, k.astype(complex), basis).entries
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    lam = float(vals[band - 1])
    u = vecs[:, band - 1]
    t1 = assemble_t1(cs, k[1], lam, basis)
    stacked = np.concatenate([u, k[0] * (t1.pencil.K2 @ u)])
    resid = t1.blocks @ stacked - k[0] * stacked
    return float(
        np.linalg.norm(resid) / (np.linalg.norm(stacked) * t1.scale())
    )


@dataclass
class PeriodicityReport:
    matched_fraction: float
    max_mismatch: float
    tested: int
    period: float


def periodicity_check(cs: CoefficientSet, k2: complex, lam: complex,
                      basis_inner: PlaneWaveBasis, basis_outer: PlaneWaveBasis,
                      interior_margin: int = 2, mass_threshold: float = 0.99,
                      match_tol: float = 1e-4) -> PeriodicityReport:
    """Check 2*pi*alpha-periodicity of the companion spectrum.

    Exact periodicity holds only for the full operator (shifting k1 by one
    dual period reindexes the basis); truncation breaks it at the index
    boundary.  Eigenvectors of the inner problem whose Fourier mass sits
    on interior indices are matched, after the shift, against the outer
    spectrum.
    """
    if basis_outer.N < basis_inner.N + interior_margin:
        raise ValueError("outer basis must strictly contain the inner one")
    alpha = cs.lat.alpha
    period = TWO_PI * alpha
    t_inner = assemble_t1(cs, k2, lam, basis_inner)
    vals, vecs = np.linalg.eig(t_inner.blocks)
    outer_vals = assemble_t1(cs, k2, lam, basis_outer).eigenvalues()

    interior = np.array([
        basis_inner.contains(m, margin=interior_margin)
        for m in basis_inner.indices
    ])
    dim = basis_inner.dim
    mismatches = []
    for idx in range(len(vals)):
        u = vecs[:dim, idx]
        total = float(np.linalg.norm(u) ** 2)
        if total == 0.0:
            continue
        mass = float(np.linalg.norm(u[interior]) ** 2) / total
        if mass < mass_threshold:
            continue
        shifted = vals[idx] + period
        mismatches.append(float(np.min(np.abs(outer_vals - shifted))))
    if not mismatches:
        return PeriodicityReport(0.0, np.inf, 0, period)
    mismatches = np.asarray(mismatches)
    matched = float(np.mean(mismatches <= match_tol))
    return PeriodicityReport(
        matched_fraction=matched,
        max_mismatch=float(np.max(mismatches)),
        tested=len(mismatches),
        period=period,
    )


# -- windows and discriminants -------------------------------------------------

@dataclass
class SpectrumWindow:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    tol_boundary: float = TOL_BOUNDARY

    def contains(self, z: complex) -> bool:
        return (self.re_min < z.real < self.re_max
                and self.im_min < z.imag < self.im_max)

    def boundary_distance(self, z: complex) -> float:
        dx = max(self.re_min - z.real, z.real - self.re_max)
        dy = max(self.im_min - z.imag, z.imag - self.im_max)
        if dx <= 0 and dy <= 0:
            return float(min(-dx, -dy))
        return float(np.hypot(max(dx, 0.0), max(dy, 0.0)))


def discriminant(roots) -> complex:
    """prod_{i<j} (z_i - z_j)^2; equals 1 for degree <= 1."""
    roots = np.asarray(roots, dtype=complex)
    delta = 1.0 + 0.0j
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            delta *= (roots[i] - roots[j]) ** 2
    return complex(delta)


def restricted_discriminant(t1: LinearizedOperator | np.ndarray,
                            window: SpectrumWindow,
                            tol_pair: float = TOL_PAIR) -> complex:
    """Discriminant of the window-restricted characteristic polynomial.

    Eigenvalues within tol_boundary of the window edge reject the window
    (the restriction is only meaningful when the boundary is clear).  The
    product collapses to exactly 0 when some pair sits closer than
    tol_pair * (1 + |z|): at that distance the computed discriminant is
    numerically indistinguishable from that of a repeated root.
    """
    values = t1 if isinstance(t1, np.ndarray) else t1.eigenvalues()
    offenders = [z for z in values if window.boundary_distance(z) <= window.tol_boundary]
    if offenders:
        raise BoundaryEigenvalue(
            f"{len(offenders)} eigenvalue(s) within {window.tol_boundary:.1e} "
            f"of the window boundary, e.g. {offenders[0]:.6g}"
        )
    inside = np.asarray([z for z in values if window.contains(z)])
    if len(inside) < 2:
        return 1.0 + 0.0j
    for i in range(len(inside)):
        for j in range(i + 1, len(inside)):
            gap = abs(inside[i] - inside[j])
            if gap <= tol_pair * (1.0 + min(abs(inside[i]), abs(inside[j]))):
                return 0.0 + 0.0j
    return discriminant(inside)


def min_pair_distance(values: np.ndarray) -> tuple[float, tuple[complex, complex]]:
    best = np.inf
    pair = (0j, 0j)
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            gap = abs(values[i] - values[j])
            if gap < best:
                best = gap
                pair = (complex(values[i]), complex(values[j]))
    return float(best), pair


@dataclass
class ScanEntry:
    k2: float
    delta: complex | None
    abs_delta: float
    flag: bool
    min_pair: float
    window: SpectrumWindow | None
    error: str | None = None


@dataclass
class DiscriminantScan:
    lam: complex
    entries: list[ScanEntry]
    policy: dict

    def flagged(self) -> list[float]:
        return [e.k2 for e in self.entries if e.flag]


def _default_window(t1: LinearizedOperator, im_cap: float,
                    tol_boundary: float) -> SpectrumWindow:
    """One-period window anchored at the real part farthest from spectrum.

    The anchor r0 maximizes the distance, modulo one period, to the real
    parts of all eigenvalues below the imaginary cap; by (approximate)
    periodicity the right edge r0 + 2*pi*alpha is then clear as well.
    """
    period = TWO_PI * t1.basis.lat.alpha
    vals = t1.eigenvalues()
    near = vals[np.abs(vals.imag) <= im_cap]
    if len(near) == 0:
        r0 = 0.0
    else:
        reals = np.sort(np.mod(near.real, period))
        gaps = np.diff(np.concatenate([reals, [reals[0] + period]]))
        best = int(np.argmax(gaps))
        r0 = float(reals[best] + gaps[best] / 2)
    return SpectrumWindow(
        re_min=r0, re_max=r0 + period,
        im_min=-im_cap, im_max=im_cap,
        tol_boundary=tol_boundary,
    )


def degeneracy_scan(cs: CoefficientSet, lam: complex, k2_values,
                    basis: PlaneWaveBasis, window_policy: dict | None = None
                    ) -> DiscriminantScan:
    """Sweep k2 and flag real degenerate companion eigenvalues.

    A k2 is flagged when the window-restricted discriminant is (declared)
    zero AND the closest eigenvalue pair is essentially real (both members
    within tol_real of the real axis) -- the computable restatement of "at
    least one real degenerate eigenvalue".  Window failures are recorded
    per entry; the sweep continues.
    """
    policy = {
        "im_cap": np.pi,
        "tol_disc": TOL_DISC,
        "tol_real": TOL_REAL,
        "tol_pair": TOL_PAIR,
        "tol_boundary": TOL_BOUNDARY,
    }
    if window_policy:
        policy.update(window_policy)
    entries = []
    for k2 in k2_values:
        t1 = assemble_t1(cs, float(k2), lam, basis)
        window = _default_window(t1, policy["im_cap"], policy["tol_boundary"])
        try:
            delta = restricted_discriminant(t1, window, policy["tol_pair"])
        except BoundaryEigenvalue as exc:
            entries.append(ScanEntry(
                k2=float(k2), delta=None, abs_delta=np.nan, flag=False,
                min_pair=np.nan, window=window, error=str(exc),
            ))
            continue
        inside = np.asarray([z for z in t1.eigenvalues() if window.contains(z)])
        if len(inside) >= 2:
            pair_dist, pair = min_pair_distance(inside)
            pair_real = (abs(pair[0].imag) <= policy["tol_real"]
                         and abs(pair[1].imag) <= policy["tol_real"])
        else:
            pair_dist, pair_real = np.inf, False
        flag = bool(abs(delta) <= policy["tol_disc"] and pair_real)
        entries.append(ScanEntry(
            k2=float(k2), delta=delta, abs_delta=abs(delta), flag=flag,
            min_pair=pair_dist, window=window,
        ))
    return DiscriminantScan(lam=complex(lam), entries=entries, policy=policy)


# -- free-symbol zero set and the brick wall ----------------------------------

@dataclass
class SigmaPoint:
    r1: float
    l1: float
    m1: int
    m2: int
    sign: int

    @property
    def z(self) -> complex:
        return complex(self.r1, self.l1)


def sigma_set(lat: Lattice2D, n: int, bounds: tuple[float, float, float, float]
              ) -> list[SigmaPoint]:
    """Zeros of the free symbol at the special k2 row, inside bounds.

    Points (one per (m1, m2, sign)):

        r1 = -2 pi alpha m1 - 2 pi beta m2 - s * pi alpha / 2,
        l1 = s * (pi/2 + 2 pi n + 2 pi m2),    s = +/-1.

    The auxiliary integer entering k2's imaginary part only relabels m1,
    so the set is computed at its zero value.
    """
    re_min, re_max, im_min, im_max = bounds
    alpha, beta = lat.alpha, lat.beta
    points = []
    for s in (+1, -1):
        # l1 = s*(pi/2 + 2 pi (n + m2)) must land in [im_min, im_max].
        lo = (im_min / s - np.pi / 2) / TWO_PI - n
        hi = (im_max / s - np.pi / 2) / TWO_PI - n
        lo, hi = min(lo, hi), max(lo, hi)
        for m2 in range(int(np.ceil(lo - 1e-12)), int(np.floor(hi + 1e-12)) + 1):
            l1 = s * (np.pi / 2 + TWO_PI * (n + m2))
            base = -TWO_PI * beta * m2 - s * np.pi * alpha / 2
            # r1 = base - 2 pi alpha m1 in [re_min, re_max].
            lo1 = (base - re_max) / (TWO_PI * alpha)
            hi1 = (base - re_min) / (TWO_PI * alpha)
            for m1 in range(int(np.ceil(lo1 - 1e-12)), int(np.floor(hi1 + 1e-12)) + 1):
                r1 = base - TWO_PI * alpha * m1
                points.append(SigmaPoint(r1=r1, l1=l1, m1=m1, m2=m2, sign=s))
    points.sort(key=lambda p: (p.l1, p.r1))
    return points


def _point_segment_distance(z: complex, seg_x: float, seg_y0: float,
                            seg_y1: float) -> float:
    dx = abs(z.real - seg_x)
    if seg_y0 <= z.imag <= seg_y1:
        dy = 0.0
    else:
        dy = min(abs(z.imag - seg_y0), abs(z.imag - seg_y1))
    return float(np.hypot(dx, dy))


def _distance_to_brick_wall(lat: Lattice2D, n: int, p: SigmaPoint,
                            neighbors: list[SigmaPoint]) -> float:
    # Horizontal lines Im in pi Z.
    best = abs(p.l1 / np.pi - round(p.l1 / np.pi)) * np.pi
    half = np.pi / 2
    shift = np.pi * lat.alpha
    for q in neighbors:
        best = min(best, _point_segment_distance(
            p.z, q.r1 + shift, q.l1 - half, q.l1 + half
        ))
    return best


@dataclass
class BrickWallReport:
    measured_dist: float
    expected_dist: float
    dist_pass: bool
    l_values: np.ndarray
    min_h: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    samples: int


def brick_wall_check(lat: Lattice2D, n: int, sample_count: int = 60,
                     l_multiples: tuple[int, ...] = (1, 2, 3, 4, 6, 8),
                     m_range: int = 16) -> BrickWallReport:
    """Measure dist(G_n, Sigma_n) and the |l|-linear growth of the symbol.

    G_n is the brick wall: horizontal lines Im in pi Z plus, for every
    symbol zero, a vertical pi-long segment halfway (pi alpha) to the next
    zero on its line.  The distance must equal min(pi/2, pi alpha).  For
    k2 on the special row, min_m |h_m| at sampled brick-wall points must
    grow linearly in |l| (positive slope, high R^2).
    """
    alpha = lat.alpha
    span = 3 * TWO_PI * alpha + 1.0
    bounds = (-span, span, -3 * np.pi - 1.0, 3 * np.pi + 1.0)
    pts = sigma_set(lat, n, bounds)
    wide = sigma_set(
        lat, n,
        (bounds[0] - 2 * TWO_PI * alpha, bounds[1] + 2 * TWO_PI * alpha,
         bounds[2] - TWO_PI, bounds[3] + TWO_PI),
    )
    measured = min(_distance_to_brick_wall(lat, n, p, wide) for p in pts)
    expected = min(np.pi / 2, np.pi * alpha)
    dist_pass = bool(abs(measured - expected) <= 1e-9)

    # Brick-wall samples: horizontal lines plus a few segment points.
    rng = np.linspace(-span, span, max(sample_count // 3, 4), endpoint=False)
    samples = [complex(r, level) for level in (0.0, np.pi, -np.pi) for r in rng]
    half = np.pi / 2
    shift = np.pi * alpha
    for q in pts[: max(sample_count - len(samples), 4)]:
        for frac in (-0.4, 0.0, 0.4):
            samples.append(complex(q.r1 + shift, q.l1 + 2 * half * frac))

    m_indices = [
        (m1, m2)
        for m1 in range(-m_range, m_range + 1)
        for m2 in range(-m_range, m_range + 1)
    ]
    r2_part = np.pi / 2 + TWO_PI * n
    l_vals = TWO_PI * np.asarray(l_multiples, dtype=float)
    min_h = np.empty(len(l_vals))
    for idx, l in enumerate(np.asarray(l_multiples)):
        k2 = r2_part + 1j * (np.pi / 2 + TWO_PI * l) * alpha
        best = np.inf
        for k1 in samples:
            hmin = min(
                abs(free_symbol(lat, m, (k1, k2))[0]) for m in m_indices
            )
            best = min(best, hmin)
        min_h[idx] = best

    coeffs = np.polyfit(l_vals, min_h, 1)
    fit = np.polyval(coeffs, l_vals)
    ss_res = float(np.sum((min_h - fit) ** 2))
    ss_tot = float(np.sum((min_h - np.mean(min_h)) ** 2))
    r_sq = 1.0 - ss_res / max(ss_tot, 1e-300)
    return BrickWallReport(
        measured_dist=float(measured), expected_dist=float(expected),
        dist_pass=dist_pass, l_values=l_vals, min_h=min_h,
        slope=float(coeffs[0]), intercept=float(coeffs[1]),
        r_squared=float(r_sq), samples=len(samples),
    )
