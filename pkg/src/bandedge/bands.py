"""Band functions on quasimomentum grids and band-edge geometry.

Bands are the sorted eigenvalues of the Hermitian fiber matrix sampled
over one cell of the dual lattice.  The module locates global band
extrema, refines them off-grid, classifies the geometry of near-extremal
level sets (isolated points vs extended components), and differentiates
bands twice for effective-mass tensors.  All cluster topology is periodic:
the grid is a torus and components may wrap the seam.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .coefficients import CoefficientSet
from .errors import SolverFailure
from .fiber import PlaneWaveBasis, assemble_fiber
from .lattice import TWO_PI

# Default thresholds; all overridable through function arguments.
ISOLATED_SPACINGS = 3.0       # cluster diameter <= this many grid spacings
EXTENDED_FRACTION = 0.25      # cluster diameter >= this fraction of the cell
GRAD_TOL = 1e-8               # refinement stops at this gradient norm
HESSIAN_TOL = 1e-8            # smallest signed-tensor eigenvalue => degenerate
_DIAMETER_SAMPLE_CAP = 512    # pairwise-distance subsample for huge clusters


def band_values(cs: CoefficientSet, k, basis: PlaneWaveBasis, count: int) -> np.ndarray:
    """Lowest `count` eigenvalues of H_N(k) for real k, ascending."""
    k = np.asarray(k, dtype=float)
    h = assemble_fiber(cs, k.astype(complex), basis).entries
    try:
        vals = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"eigensolver failed at k={k}") from exc
    return vals[:count]


@dataclass
class BandGrid:
    """Sorted band values over one periodic cell.

    k(i, j) = (i/n1) edge1 + (j/n2) edge2; values has shape (n1, n2, nb).
    ``evaluator`` re-computes band values at arbitrary k (used for
    off-grid refinement and finite differences); it may be None for
    purely grid-based post-processing.
    """

    edge1: np.ndarray
    edge2: np.ndarray
    values: np.ndarray
    basis_n: int | None = None
    evaluator: object = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    @property
    def band_count(self) -> int:
        return self.values.shape[2]

    def kvec(self, i: int, j: int) -> np.ndarray:
        n1, n2 = self.shape
        return (i / n1) * self.edge1 + (j / n2) * self.edge2

    def kgrid(self) -> np.ndarray:
        n1, n2 = self.shape
        ii, jj = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
        return (
            (ii / n1)[..., None] * self.edge1[None, None, :]
            + (jj / n2)[..., None] * self.edge2[None, None, :]
        )

    def steps(self) -> tuple[np.ndarray, np.ndarray]:
        n1, n2 = self.shape
        return self.edge1 / n1, self.edge2 / n2

    def spacing(self) -> float:
        s1, s2 = self.steps()
        return max(float(np.linalg.norm(s1)), float(np.linalg.norm(s2)))

    def cell_diameter(self) -> float:
        return max(
            float(np.linalg.norm(self.edge1 + self.edge2)),
            float(np.linalg.norm(self.edge1 - self.edge2)),
        )

    def torus_delta(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Distance in k-units between two grid nodes on the torus."""
        n1, n2 = self.shape
        s1, s2 = self.steps()
        di, dj = b[0] - a[0], b[1] - a[1]
        best = np.inf
        for p in (-1, 0, 1):
            for q in (-1, 0, 1):
                d = (di + p * n1) * s1 + (dj + q * n2) * s2
                best = min(best, float(np.hypot(d[0], d[1])))
        return best


def _row_values(cs, basis, edge1, edge2, n1, n2, count, i):
    out = np.empty((n2, count))
    for j in range(n2):
        k = (i / n1) * edge1 + (j / n2) * edge2
        out[j] = band_values(cs, k, basis, count)
    return out


def scan(cs: CoefficientSet, resolution, basis: PlaneWaveBasis, count: int,
         workers: int = 1) -> BandGrid:
    """Band values over the full dual cell, parallel over grid rows.

    Output is independent of worker scheduling: rows are merged in index
    order.
    """
    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    edge1 = TWO_PI * cs.lat.b1p
    edge2 = TWO_PI * cs.lat.b2p
    fn = partial(_row_values, cs, basis, edge1, edge2, n1, n2, count)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(fn, range(n1), chunksize=max(1, n1 // (4 * workers))))
    else:
        rows = [fn(i) for i in range(n1)]
    values = np.stack(rows, axis=0)
    grid = BandGrid(edge1=edge1, edge2=edge2, values=values, basis_n=basis.N)
    grid.evaluator = partial(band_values, cs, basis=basis, count=count)
    return grid


# -- level-set clustering ----------------------------------------------------

@dataclass
class Cluster:
    nodes: list[tuple[int, int]]
    diameter: float
    representative: np.ndarray
    wraps: bool = False


def _components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-neighbor connected components on the periodic grid (BFS)."""
    n1, n2 = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for i0 in range(n1):
        for j0 in range(n2):
            if not mask[i0, j0] or seen[i0, j0]:
                continue
            stack = [(i0, j0)]
            seen[i0, j0] = True
            comp = []
            while stack:
                i, j = stack.pop()
                comp.append((i, j))
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        if di == 0 and dj == 0:
                            continue
                        a, b = (i + di) % n1, (j + dj) % n2
                        if mask[a, b] and not seen[a, b]:
                            seen[a, b] = True
                            stack.append((a, b))
            comps.append(sorted(comp))
    return comps


def _cluster_diameter(grid: BandGrid, nodes: list[tuple[int, int]]) -> float:
    if len(nodes) < 2:
        return 0.0
    pts = nodes
    if len(pts) > _DIAMETER_SAMPLE_CAP:
        stride = -(-len(pts) // _DIAMETER_SAMPLE_CAP)
        pts = pts[::stride]
    best = 0.0
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            best = max(best, grid.torus_delta(pts[a], pts[b]))
    return best


def level_set(grid: BandGrid, j: int, lambda_star: float, eps: float) -> list[Cluster]:
    """Clusters of grid nodes with |lambda_j - lambda_star| <= eps.

    Components use 8-neighbor adjacency with periodic wraparound and are
    returned largest-first (ties by first node) for determinism.
    """
    band = grid.values[:, :, j - 1]
    mask = np.abs(band - lambda_star) <= eps
    comps = _components(mask)
    clusters = []
    for comp in comps:
        dev = [abs(band[i, jj] - lambda_star) for i, jj in comp]
        rep_node = comp[int(np.argmin(dev))]
        clusters.append(Cluster(
            nodes=comp,
            diameter=_cluster_diameter(grid, comp),
            representative=grid.kvec(*rep_node),
            wraps=len(comp) >= min(grid.shape),
        ))
    clusters.sort(key=lambda c: (-len(c.nodes), c.nodes[0]))
    return clusters


# -- refinement and extremum reports ------------------------------------------

def _band_fn(grid: BandGrid, j: int, cs=None, basis=None):
    if cs is not None and basis is not None:
        return lambda k: band_values(cs, k, basis, j)[j - 1]
    if grid.evaluator is not None:
        return lambda k: grid.evaluator(k)[j - 1]
    return None


def _refine(fn, k0: np.ndarray, sign: float, h0: float, grad_tol: float,
            max_iter: int = 50):
    """Local quadratic-model descent of sign*fn around k0.

    Evaluates a 3x3 stencil, takes the Newton step when the local Hessian
    is positive definite, otherwise a safeguarded gradient step; the
    stencil shrinks as the point converges.  Returns (k, value, grad_norm).
    """
    k = np.asarray(k0, dtype=float)
    h = h0
    val = sign * fn(k)
    for _ in range(max_iter):
        fp1 = sign * fn(k + [h, 0]); fm1 = sign * fn(k - [h, 0])
        fp2 = sign * fn(k + [0, h]); fm2 = sign * fn(k - [0, h])
        fpp = sign * fn(k + [h, h]); fpm = sign * fn(k + [h, -h])
        fmp = sign * fn(k + [-h, h]); fmm = sign * fn(k - [h, h])
        g = np.array([(fp1 - fm1), (fp2 - fm2)]) / (2 * h)
        if np.linalg.norm(g) <= grad_tol:
            break
        hess = np.array([
            [(fp1 - 2 * val + fm1) / h**2,
             (fpp - fpm - fmp + fmm) / (4 * h**2)],
            [(fpp - fpm - fmp + fmm) / (4 * h**2),
             (fp2 - 2 * val + fm2) / h**2],
        ])
        eigs = np.linalg.eigvalsh(hess)
        if eigs[0] > 1e-12:
            step = -np.linalg.solve(hess, g)
        else:
            step = -g / max(np.linalg.norm(g), 1e-300) * h
        limit = 2 * h
        norm = np.linalg.norm(step)
        if norm > limit:
            step *= limit / norm
        cand = k + step
        cand_val = sign * fn(cand)
        if cand_val < val:
            k, val = cand, cand_val
            h = max(h / 2, 1e-7)
        else:
            h /= 2
            if h < 1e-9:
                break
    g_final = np.array([
        sign * fn(k + [h0 * 1e-2, 0]) - sign * fn(k - [h0 * 1e-2, 0]),
        sign * fn(k + [0, h0 * 1e-2]) - sign * fn(k - [0, h0 * 1e-2]),
    ]) / (2 * h0 * 1e-2)
    return k, sign * val, float(np.linalg.norm(g_final))


@dataclass
class EffectiveMass:
    """Inverse-effective-mass tensor at a band extremum (hbar = 1).

    ``tensor`` is +Hessian at a minimum and -Hessian at a maximum, so it
    is positive semidefinite at a genuine nondegenerate extremum.
    ``degenerate`` flags a (numerically) singular tensor, in which case
    inverting it is meaningless.
    """

    tensor: np.ndarray
    hessian: np.ndarray
    step: float
    richardson_error: float
    degenerate: bool


def effective_mass(cs: CoefficientSet | None, j: int, k_star, basis=None,
                   step: float = 1e-3, kind: str = "min",
                   band_fn=None, hessian_tol: float = HESSIAN_TOL) -> EffectiveMass:
    """Second differences of band j at k_star, symmetrized and signed.

    The truncation error is estimated by recomputing at step/2 and taking
    4/3 of the difference (the scheme is second order).
    """
    if band_fn is None:
        if cs is None or basis is None:
            raise ValueError("need either band_fn or (cs, basis)")
        band_fn = lambda k: band_values(cs, k, basis, j)[j - 1]
    k_star = np.asarray(k_star, dtype=float)

    def hess_at(h):
        f0 = band_fn(k_star)
        fp1 = band_fn(k_star + [h, 0]); fm1 = band_fn(k_star - [h, 0])
        fp2 = band_fn(k_star + [0, h]); fm2 = band_fn(k_star - [0, h])
        fpp = band_fn(k_star + [h, h]); fpm = band_fn(k_star + [h, -h])
        fmp = band_fn(k_star + [-h, h]); fmm = band_fn(k_star - [h, h])
        hxx = (fp1 - 2 * f0 + fm1) / h**2
        hyy = (fp2 - 2 * f0 + fm2) / h**2
        hxy = (fpp - fpm - fmp + fmm) / (4 * h**2)
        return np.array([[hxx, hxy], [hxy, hyy]])

    hess = hess_at(step)
    hess = 0.5 * (hess + hess.T)
    hess_half = hess_at(step / 2)
    rich = float(np.max(np.abs(hess - hess_half))) * 4.0 / 3.0
    sign = 1.0 if kind == "min" else -1.0
    tensor = sign * hess
    # A flat direction reads as O(step^2) curvature at finite step, so the
    # singularity threshold is floored by the measured truncation error.
    degenerate = bool(
        np.linalg.eigvalsh(tensor)[0] <= max(hessian_tol, rich)
    )
    return EffectiveMass(
        tensor=tensor, hessian=hess, step=step,
        richardson_error=rich, degenerate=degenerate,
    )


@dataclass
class ExtremumReport:
    band: int
    kind: str
    value: float
    points: list[np.ndarray]
    classification: str
    cluster_diameters: list[float]
    gradient_norms: list[float]
    masses: list[EffectiveMass] = field(default_factory=list)
    eps: float = 0.0
    spacing: float = 0.0
    cell_diameter: float = 0.0
    clusters: list[Cluster] = field(default_factory=list)


def locate_extrema(grid: BandGrid, j: int, kind: str, eps: float,
                   cs: CoefficientSet | None = None,
                   basis: PlaneWaveBasis | None = None,
                   grad_tol: float = GRAD_TOL,
                   isolated_spacings: float = ISOLATED_SPACINGS,
                   extended_fraction: float = EXTENDED_FRACTION,
                   fd_step: float = 1e-3) -> ExtremumReport:
    """Locate and classify the global extremum of band j on the grid.

    Grid candidates attaining the optimum are refined off-grid (when an
    evaluator is available), the eps-near-extremal set is clustered on
    the torus, and each cluster diameter decides the verdict: isolated
    when all diameters stay within `isolated_spacings` grid spacings,
    extended when some cluster spans `extended_fraction` of the cell
    diameter, unresolved otherwise.
    """
    if kind not in ("min", "max"):
        raise ValueError("kind must be 'min' or 'max'")
    band = grid.values[:, :, j - 1]
    sign = 1.0 if kind == "min" else -1.0
    opt = float(np.min(sign * band)) * sign

    cand_mask = np.abs(band - opt) <= 1e-9 * (1.0 + abs(opt))
    cand_clusters = _components(cand_mask)

    fn = _band_fn(grid, j, cs, basis)
    points, gnorms, vals = [], [], []
    for comp in cand_clusters:
        devs = [sign * band[i, jj] for i, jj in comp]
        node = comp[int(np.argmin(devs))]
        k0 = grid.kvec(*node)
        if fn is None:
            points.append(k0)
            gnorms.append(np.nan)
            vals.append(float(band[node]))
            continue
        k_ref, v_ref, gnorm = _refine(fn, k0, sign, grid.spacing() / 2, grad_tol)
        points.append(k_ref)
        gnorms.append(gnorm)
        vals.append(v_ref)
    lam_star = float(min(vals) if kind == "min" else max(vals))

    clusters = level_set(grid, j, lam_star, eps)
    diams = [c.diameter for c in clusters]
    spacing = grid.spacing()
    cell_diam = grid.cell_diameter()
    if clusters and all(d <= isolated_spacings * spacing for d in diams):
        verdict = "isolated"
    elif any(d >= extended_fraction * cell_diam for d in diams):
        verdict = "extended"
    else:
        verdict = "unresolved"

    masses = []
    if verdict == "isolated" and fn is not None:
        for p in points:
            masses.append(effective_mass(
                cs, j, p, basis, step=fd_step, kind=kind, band_fn=fn
            ))
    return ExtremumReport(
        band=j, kind=kind, value=lam_star, points=points,
        classification=verdict, cluster_diameters=diams,
        gradient_norms=gnorms, masses=masses, eps=eps,
        spacing=spacing, cell_diameter=cell_diam, clusters=clusters,
    )
