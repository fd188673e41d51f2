"""Direct/dual lattice geometry and its canonical normal form.

A 2D lattice is given by two independent basis vectors b1, b2.  The dual
basis (b1p, b2p) is biorthogonal, <b_i, b_j'> = delta_ij, and frequencies
live on 2*pi times the integer span of the dual basis.  All spectral
computations happen in *canonical coordinates*: a rotation+dilation is
applied so that b1p = (alpha, 0) with alpha > 0 and b2p = (beta, 1).
Rotations and dilations preserve the scalar form of the metric, so this
normalization loses no generality for the operators treated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLattice

TWO_PI = 2.0 * np.pi

# Input considered already canonical (identity transform) below this.
_CANON_TOL = 1e-12


@dataclass(frozen=True)
class DualIndex:
    """Integer label (m1, m2) of a dual-lattice frequency.

    The associated frequency carries the 2*pi factor; see
    :meth:`Lattice2D.frequency`.
    """

    m1: int
    m2: int

    def __neg__(self) -> "DualIndex":
        return DualIndex(-self.m1, -self.m2)

    def __add__(self, other: "DualIndex") -> "DualIndex":
        return DualIndex(self.m1 + other.m1, self.m2 + other.m2)

    def __sub__(self, other: "DualIndex") -> "DualIndex":
        return DualIndex(self.m1 - other.m1, self.m2 - other.m2)

    def as_tuple(self) -> tuple[int, int]:
        return (self.m1, self.m2)


@dataclass(frozen=True)
class Lattice2D:
    """A 2D lattice in canonical coordinates.

    Fields b1, b2 are the direct basis, b1p, b2p the biorthogonal dual
    basis with b1p = (alpha, 0), b2p = (beta, 1) exactly.  ``canon`` is the
    conformal map (positive multiple of a rotation) that carried the raw
    dual basis into this normal form.
    """

    b1: np.ndarray
    b2: np.ndarray
    b1p: np.ndarray
    b2p: np.ndarray
    alpha: float
    beta: float
    canon: np.ndarray

    def frequency(self, m: DualIndex | tuple[int, int]) -> np.ndarray:
        """Frequency 2*pi*(m1*b1p + m2*b2p) in canonical coordinates."""
        m1, m2 = (m.m1, m.m2) if isinstance(m, DualIndex) else m
        return np.array(
            [TWO_PI * (self.alpha * m1 + self.beta * m2), TWO_PI * m2]
        )

    def cell_area(self) -> float:
        return abs(self.b1[0] * self.b2[1] - self.b1[1] * self.b2[0])

    @staticmethod
    def square(side: float = 1.0) -> "Lattice2D":
        return canonicalize(np.array([side, 0.0]), np.array([0.0, side]))

    @staticmethod
    def from_dual_params(alpha: float, beta: float) -> "Lattice2D":
        """Lattice whose canonical dual basis is (alpha, 0), (beta, 1)."""
        return canonicalize(
            np.array([1.0 / alpha, -beta / alpha]), np.array([0.0, 1.0])
        )


def dual_basis(b1, b2) -> tuple[np.ndarray, np.ndarray]:
    """Biorthogonal dual basis: columns of inv([b1 b2])^T.

    Raises DegenerateLattice when the basis is numerically dependent.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    det = b1[0] * b2[1] - b1[1] * b2[0]
    scale = max(np.linalg.norm(b1), np.linalg.norm(b2))
    if abs(det) <= 1e-12 * scale**2:
        raise DegenerateLattice(
            f"basis determinant {det:.3e} below threshold for scale {scale:.3e}"
        )
    b1p = np.array([b2[1], -b2[0]]) / det
    b2p = np.array([-b1[1], b1[0]]) / det
    return b1p, b2p


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def canonicalize(b1, b2) -> Lattice2D:
    """Build a Lattice2D with the dual basis in normal form.

    The returned lattice stores everything in canonical coordinates.  The
    transform is a rotation composed with a positive dilation (applied to
    dual vectors; direct vectors transform inversely), so negatively
    oriented inputs first have b2 replaced by -b2, which generates the
    same lattice.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if b1[0] * b2[1] - b1[1] * b2[0] < 0:
        b2 = -b2
    b1p_raw, b2p_raw = dual_basis(b1, b2)

    scale = max(np.linalg.norm(b1p_raw), np.linalg.norm(b2p_raw))
    if (
        abs(b1p_raw[1]) <= _CANON_TOL * scale
        and b1p_raw[0] > 0
        and abs(b2p_raw[1] - 1.0) <= _CANON_TOL
    ):
        canon = np.eye(2)
        alpha = float(b1p_raw[0])
        beta = float(b2p_raw[0])
    else:
        rot = _rotation(-np.arctan2(b1p_raw[1], b1p_raw[0]))
        b2_rot = rot @ b2p_raw
        # Orientation fix above guarantees the perpendicular component > 0.
        s = 1.0 / b2_rot[1]
        canon = s * rot
        alpha = float(s * np.linalg.norm(b1p_raw))
        beta = float(s * b2_rot[0])

    b1p = np.array([alpha, 0.0])
    b2p = np.array([beta, 1.0])
    # Direct basis recomputed from the exact canonical dual, so that the
    # biorthogonality invariant holds to machine precision.
    b1_can = np.array([1.0 / alpha, -beta / alpha])
    b2_can = np.array([0.0, 1.0])
    return Lattice2D(
        b1=b1_can, b2=b2_can, b1p=b1p, b2p=b2p,
        alpha=alpha, beta=beta, canon=canon,
    )
