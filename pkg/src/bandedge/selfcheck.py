"""Invariant battery behind the `selfcheck` job.

Each check exercises one module-level invariant at its default tolerance
and reports a measured residual.  The battery is deterministic (fixed
seeds) and sized to run in seconds; the pytest suite is the exhaustive
version of the same contracts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bands as bd
from . import coefficients as co
from . import discrete as dc
from . import fiber as fb
from . import linearization as lz
from .lattice import TWO_PI, Lattice2D, canonicalize


@dataclass
class CheckLine:
    name: str
    passed: bool
    residual: float
    threshold: float

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: residual {self.residual:.3e} "
                f"(tol {self.threshold:.1e})")


def _check(lines, name, residual, threshold):
    lines.append(CheckLine(name, bool(residual <= threshold), float(residual),
                           float(threshold)))


def _sample_cs(lat):
    V = co.cosine(lat, (1, 0), 0.6)
    A = co.divfree_harmonic(lat, (0, 1), 0.25)
    omega = co.constant(lat, 1.0) + co.cosine(lat, (1, 1), 0.15)
    cs = co.CoefficientSet(V=V, A=A, omega=omega)
    co.validate(cs)
    return cs


def run_selfcheck() -> list[CheckLine]:
    rng = np.random.default_rng(20260810)
    lines: list[CheckLine] = []

    # --- lattice ---------------------------------------------------------
    worst_bio = 0.0
    worst_idem = 0.0
    worst_dual = 0.0
    for _ in range(25):
        b1 = rng.normal(size=2)
        b2 = rng.normal(size=2)
        if abs(b1[0] * b2[1] - b1[1] * b2[0]) < 1e-3:
            continue
        lat = canonicalize(b1, b2)
        gram = np.array([
            [lat.b1 @ lat.b1p, lat.b1 @ lat.b2p],
            [lat.b2 @ lat.b1p, lat.b2 @ lat.b2p],
        ])
        worst_bio = max(worst_bio, float(np.max(np.abs(gram - np.eye(2)))))
        again = canonicalize(lat.b1, lat.b2)
        worst_idem = max(worst_idem, float(np.max(np.abs(again.canon - np.eye(2)))))
        for _ in range(8):
            m = (int(rng.integers(-6, 7)), int(rng.integers(-6, 7)))
            xi = lat.frequency(m)
            for b in (lat.b1, lat.b2):
                worst_dual = max(worst_dual, abs(np.exp(1j * (xi @ b)) - 1.0))
    _check(lines, "lattice biorthogonality", worst_bio, 1e-12)
    _check(lines, "lattice canonical idempotence", worst_idem, 1e-12)
    _check(lines, "lattice frequencies in dual lattice", worst_dual, 1e-10)

    # --- coefficients ----------------------------------------------------
    sq = Lattice2D.square()
    A_raw = (co.divfree_harmonic(sq, (1, 0), 0.3)
             + co.gradient(co.cosine(sq, (0, 1), 0.4))
             + co.constant_vector(sq, [0.1, -0.2]))
    rep1 = co.gauge_normalize(A_raw)
    rep2 = co.gauge_normalize(rep1.A_normalized)
    _check(lines, "gauge normalization idempotent",
           (rep2.A_normalized - rep1.A_normalized).max_amplitude()
           + float(np.max(np.abs(rep2.k_shift))), 1e-12)
    phi = co.stream_function(rep1.A_normalized)
    lap_vs_curl = (phi.laplacian() - co.curl(rep1.A_normalized)).max_amplitude()
    _check(lines, "stream function laplacian = curl", lap_vs_curl, 1e-12)
    omega = co.constant(sq, 1.0) + co.cosine(sq, (1, 0), 0.2)
    winv = co.invert_square(omega, 12)
    prod = omega.convolve(omega).convolve(winv)
    vals = prod.sample(co.grid_size(prod.support_radius())).real
    _check(lines, "omega^-2 reconstruction", float(np.max(np.abs(vals - 1))), 1e-8)

    # --- fiber ------------------------------------------------------------
    cs = _sample_cs(sq)
    basis = fb.PlaneWaveBasis(sq, 5)
    h_real = fb.assemble_fiber(cs, [0.4, -0.3], basis)
    _check(lines, "fiber hermiticity at real k", h_real.hermiticity_defect(), 1e-12)
    pb = fb.pencil_blocks(cs, 0.37, 1.1, basis)
    worst = 0.0
    for _ in range(10):
        k1 = complex(rng.normal(), rng.normal())
        hk = fb.assemble_fiber(cs, [k1, 0.37], basis).entries
        worst = max(worst, float(np.linalg.norm(
            hk - 1.1 * np.eye(basis.dim) - pb.reconstruct(k1))))
    _check(lines, "pencil reconstruction", worst / pb.scale(), 1e-12)
    free = co.free_set(sq)
    h_free = fb.assemble_fiber(free, [0.3, 0.9], basis).entries
    _check(lines, "free fiber diagonal",
           float(np.max(np.abs(h_free - np.diag(np.diag(h_free))))), 0.0)
    worst = 0.0
    lat_g = canonicalize([1.2, 0.3], [-0.1, 0.8])
    for _ in range(1000):
        m = (int(rng.integers(-8, 9)), int(rng.integers(-8, 9)))
        kk = rng.normal(size=2) + 1j * rng.normal(size=2)
        h, qp, qm = fb.free_symbol(lat_g, m, kk)
        worst = max(worst, abs(h - qp * qm) / max(abs(h), 1.0))
    _check(lines, "symbol factorization h = q+ q-", worst, 1e-12)
    prev = None
    mono_violation = 0.0
    for nn in (4, 6, 8, 12):
        vals = bd.band_values(cs, [0.3, 0.2], fb.PlaneWaveBasis(sq, nn), 5)
        if prev is not None:
            # Variational monotonicity, up to eigensolver roundoff.
            mono_violation = max(mono_violation, float(np.max(
                (vals - prev) / (1.0 + np.abs(prev))
            )))
        prev = vals
    _check(lines, "eigenvalue monotone convergence in N", mono_violation, 1e-10)

    # --- linearization ----------------------------------------------------
    basis6 = fb.PlaneWaveBasis(sq, 4)
    t1 = lz.assemble_t1(cs, 0.23, 0.8, basis6)
    eigs = t1.eigenvalues()
    _check(lines, "companion eigenvalue count",
           abs(len(eigs) - 2 * basis6.dim), 0.0)
    worst = 0.0
    for z in eigs[:: max(1, len(eigs) // 40)]:
        sigma = np.linalg.svd(t1.pencil.reconstruct(z), compute_uv=False)[-1]
        worst = max(worst, float(sigma))
    _check(lines, "companion pencil root residual", worst / t1.scale(), 1e-8)
    roots = rng.normal(size=5) + 1j * rng.normal(size=5)
    d0 = lz.discriminant(roots)
    shuffled = roots.copy()
    rng.shuffle(shuffled)
    _check(lines, "discriminant permutation invariance",
           abs(lz.discriminant(shuffled) - d0) / max(abs(d0), 1e-300), 1e-12)
    s = 1.7
    cov = abs(lz.discriminant(s * roots) - s ** (5 * 4) * d0) / max(abs(d0), 1e-300)
    _check(lines, "discriminant scale covariance", cov / s**20, 1e-10)
    # Free window count: one period, eigenvalues clear of the boundary.
    t1_free = lz.assemble_t1(free, 0.31, 0.0, basis6)
    window = lz.SpectrumWindow(-np.pi, np.pi, -1.0, 1.0)
    inside = sum(1 for z in t1_free.eigenvalues() if window.contains(z))
    closed = lz.free_t1_eigenvalues(sq, basis6, 0.31, 0.0)
    inside_closed = sum(1 for z in closed if window.contains(z))
    _check(lines, "free window eigenvalue count", abs(inside - inside_closed), 0.0)
    # Degeneracy flag at a band extremum: free band-1 minimum at k = 0.
    scan = lz.degeneracy_scan(free, 0.0, [0.0], basis6)
    _check(lines, "degeneracy flag at free band minimum",
           0.0 if scan.entries[0].flag else 1.0, 0.0)

    # --- bands -------------------------------------------------------------
    basis8 = fb.PlaneWaveBasis(sq, 8)
    k0 = np.array([0.17, 0.41])
    v0 = bd.band_values(cs, k0, basis8, 3)
    v_shift = bd.band_values(cs, k0 + TWO_PI * sq.b1p, basis8, 3)
    _check(lines, "band periodicity under dual shift",
           float(np.max(np.abs(v0 - v_shift))), 1e-9)
    cs_noA = co.CoefficientSet(V=cs.V, A=co.zero_vector(sq), omega=cs.omega)
    co.validate(cs_noA)
    v_plus = bd.band_values(cs_noA, k0, basis8, 3)
    v_minus = bd.band_values(cs_noA, -k0, basis8, 3)
    _check(lines, "time-reversal symmetry for A = 0",
           float(np.max(np.abs(v_plus - v_minus))), 1e-9)
    grid = bd.scan(cs_noA, 12, fb.PlaneWaveBasis(sq, 4), 1)
    spread = float(np.max(grid.values[:, :, 0]) - np.min(grid.values[:, :, 0]))
    _check(lines, "no flat band for nonconstant V", 1.0 if spread <= 1e-8 else 0.0, 0.0)

    # --- discrete -----------------------------------------------------------
    model = dc.DiatomicModel(0.0, 2.0)
    worst = 0.0
    for _ in range(10_000):
        kk = rng.uniform(-np.pi, np.pi, size=2)
        lm, lp = dc.lambda_pm(model, kk)
        ev = np.linalg.eigvalsh(dc.fiber(model, kk).matrix)
        worst = max(worst, abs(lm - ev[0]), abs(lp - ev[1]))
    _check(lines, "diatomic closed form vs 2x2 eigensolve", worst, 1e-14)
    grid = dc.grid_adapter(model, 128)
    edges = dc.band_edges(model)
    attained = max(
        abs(float(np.max(grid.values[:, :, 0])) - edges[1]),
        abs(float(np.min(grid.values[:, :, 1])) - edges[2]),
    )
    _check(lines, "diatomic gap edges attained on grid", attained, 1e-12)
    worst = 0.0
    for L in (2, 4, 8, 16):
        a, b = dc.torus_spectrum(model, L)
        worst = max(worst, float(np.max(np.abs(a - b))))
    _check(lines, "torus fiber route = dense route", worst, 1e-10)
    gapless = dc.band_edges(dc.DiatomicModel(1.0, 1.0))
    gapped = dc.band_edges(dc.DiatomicModel(0.0, 2.0))
    ok = (gapless[2] - gapless[1] <= 0.0) and (gapped[2] - gapped[1] > 0.0)
    _check(lines, "gap empty iff equal site potentials", 0.0 if ok else 1.0, 0.0)

    return lines


def render_report(lines: list[CheckLine]) -> str:
    body = "\n".join(line.render() for line in lines)
    passed = sum(1 for line in lines if line.passed)
    return f"{body}\nchecks passed: {passed}/{len(lines)}\n"
