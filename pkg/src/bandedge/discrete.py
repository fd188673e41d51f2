"""Diatomic chessboard model on Z^2: the exact two-band example.

The operator is the discrete Laplacian with 1/2 hopping weights plus an
on-site potential alternating between v0 (even sublattice) and v1 (odd
sublattice).  Its Floquet fibers are 2x2 with coupling c(k) = cos k1 +
cos k2, and everything -- band functions, band edges, level sets -- is in
closed form.  The gap-edge level sets are straight lines, the standard
counterexample to isolated extrema in the discrete setting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import BandGrid
from .errors import NotAttained, OddTorus

# Dual-lattice cell edges for the period lattice {2e1, e1+e2}: the band
# functions are periodic under both, and the gap-edge lines map to grid
# rows/diagonals in these coordinates, so periodic clustering never cuts
# them at a seam.
EDGE1 = np.array([np.pi, -np.pi])
EDGE2 = np.array([0.0, 2 * np.pi])


@dataclass(frozen=True)
class DiatomicModel:
    v0: float
    v1: float


@dataclass
class DiscreteFiber:
    k: np.ndarray
    matrix: np.ndarray


def coupling(k) -> float:
    k = np.asarray(k, dtype=float)
    return float(np.cos(k[0]) + np.cos(k[1]))


def fiber(model: DiatomicModel, k) -> DiscreteFiber:
    """2x2 Floquet fiber [[v0, c], [c, v1]] with c = cos k1 + cos k2."""
    c = coupling(k)
    return DiscreteFiber(
        k=np.asarray(k, dtype=float),
        matrix=np.array([[model.v0, c], [c, model.v1]]),
    )


def lambda_pm(model: DiatomicModel, k) -> tuple[float, float]:
    """Closed-form band functions (lambda-, lambda+)."""
    c = coupling(k)
    mean = 0.5 * (model.v0 + model.v1)
    root = np.hypot(0.5 * (model.v0 - model.v1), c)
    return mean - root, mean + root


def lambda_pm_gradient(model: DiatomicModel, k, band: str = "+") -> np.ndarray:
    k = np.asarray(k, dtype=float)
    c = coupling(k)
    root = np.hypot(0.5 * (model.v0 - model.v1), c)
    sign = 1.0 if band == "+" else -1.0
    if root == 0.0:
        return np.zeros(2)
    dc = -np.sin(k)
    return sign * c * dc / root


def lambda_pm_hessian(model: DiatomicModel, k, band: str = "+") -> np.ndarray:
    """Exact Hessian of lambda+/- wherever the square root is nonzero."""
    k = np.asarray(k, dtype=float)
    c = coupling(k)
    d = 0.5 * (model.v0 - model.v1)
    root = np.hypot(d, c)
    sign = 1.0 if band == "+" else -1.0
    dc = -np.sin(k)
    d2c = np.diag(-np.cos(k))
    outer = np.outer(dc, dc)
    return sign * ((outer + c * d2c) / root - (c * c) * outer / root**3)


def band_edges(model: DiatomicModel) -> tuple[float, float, float, float]:
    """(min lambda-, max lambda-, min lambda+, max lambda+)."""
    mean = 0.5 * (model.v0 + model.v1)
    r_max = np.sqrt(0.25 * (model.v0 - model.v1) ** 2 + 4.0)
    return (
        mean - r_max,
        min(model.v0, model.v1),
        max(model.v0, model.v1),
        mean + r_max,
    )


@dataclass
class LevelLines:
    """Descriptor of the level set {k : lambda_band(k) = lambda_star}."""

    kind: str                  # "lines" | "points" | "curve"
    isolated: bool
    c_squared: float
    lines: list[str]
    points: list[np.ndarray]


def level_lines(model: DiatomicModel, lambda_star: float) -> LevelLines:
    """Classify the level set of a band value by the closed form.

    The fiber determinant gives c^2 = (lambda - v0)(lambda - v1); the
    level is attained iff 0 <= c^2 <= 4.  c = 0 puts the level on the
    straight lines k1 +/- k2 = (2p+1) pi (the gap edges); c^2 = 4 pins it
    to the lattice point k = 0 mod the dual lattice (the outer edges);
    anything between traces closed curves.
    """
    c2 = (lambda_star - model.v0) * (lambda_star - model.v1)
    tol = 1e-12 * (1.0 + lambda_star**2 + model.v0**2 + model.v1**2)
    if c2 < -tol or c2 > 4.0 + tol:
        raise NotAttained(
            f"lambda={lambda_star} gives c^2={c2:.6g} outside [0, 4]"
        )
    if abs(c2) <= tol:
        return LevelLines(
            kind="lines", isolated=False, c_squared=0.0,
            lines=["k1 + k2 = (2p+1) pi", "k1 - k2 = (2p+1) pi"],
            points=[],
        )
    if abs(c2 - 4.0) <= tol:
        # cos k1 = cos k2 = +/-1; both sign choices are one orbit of the
        # dual lattice, represented by k = (0, 0).
        return LevelLines(
            kind="points", isolated=True, c_squared=4.0,
            lines=[], points=[np.zeros(2)],
        )
    return LevelLines(kind="curve", isolated=False, c_squared=float(c2),
                      lines=[], points=[])


def torus_momenta(length: int) -> list[np.ndarray]:
    """Admissible quasimomenta of the Z^2/(L Z^2) torus, one per fiber.

    The momentum grid (2 pi / L) Z^2 splits into orbits of size two under
    the dual-lattice shift (pi, -pi); one representative per orbit gives
    L^2/2 fibers of size 2 = L^2 states.
    """
    if length % 2 != 0:
        raise OddTorus(f"torus size {length} incompatible with 2-site cell")
    reps = []
    seen = set()
    half = length // 2
    for j1 in range(length):
        for j2 in range(length):
            partner = ((j1 + half) % length, (j2 - half) % length)
            if (j1, j2) in seen or partner in seen:
                continue
            seen.add((j1, j2))
            reps.append(2 * np.pi * np.array([j1, j2]) / length)
    return reps


def torus_spectrum(model: DiatomicModel, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum of the model on a finite torus, via two independent routes.

    Route (a): union of the 2x2 fiber eigenvalues over the admissible
    quasimomenta.  Route (b): dense diagonalization of the full L^2 x L^2
    operator (1/2-weighted 4-neighbor hopping plus the chessboard
    diagonal).  Both sorted; they must agree elementwise.
    """
    if length % 2 != 0:
        raise OddTorus(f"torus size {length} incompatible with 2-site cell")
    fiber_vals = []
    for k in torus_momenta(length):
        fiber_vals.extend(np.linalg.eigvalsh(fiber(model, k).matrix))
    route_a = np.sort(np.asarray(fiber_vals))

    dim = length * length
    h = np.zeros((dim, dim))
    for n1 in range(length):
        for n2 in range(length):
            i = n1 * length + n2
            h[i, i] = model.v0 if (n1 + n2) % 2 == 0 else model.v1
            for d1, d2 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                jidx = ((n1 + d1) % length) * length + (n2 + d2) % length
                h[i, jidx] += 0.5
    route_b = np.sort(np.linalg.eigvalsh(h))
    return route_a, route_b


def grid_adapter(model: DiatomicModel, resolution) -> BandGrid:
    """BandGrid over the sheared fibering cell with the two closed-form bands.

    The returned grid carries an evaluator, so extremum refinement and
    effective-mass differentiation work exactly as for continuum grids.
    """
    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    t1 = np.arange(n1)[:, None] / n1
    t2 = np.arange(n2)[None, :] / n2
    k1 = t1 * EDGE1[0] + t2 * EDGE2[0]
    k2 = t1 * EDGE1[1] + t2 * EDGE2[1]
    c = np.cos(k1) + np.cos(k2)
    mean = 0.5 * (model.v0 + model.v1)
    root = np.hypot(0.5 * (model.v0 - model.v1), c)
    values = np.stack([mean - root, mean + root], axis=-1)
    grid = BandGrid(edge1=EDGE1.copy(), edge2=EDGE2.copy(), values=values)
    grid.evaluator = lambda k: np.asarray(lambda_pm(model, k))
    return grid
