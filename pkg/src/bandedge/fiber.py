"""Plane-wave Galerkin matrices of the Bloch fiber and its k1-pencil.

The fiber operator with scalar metric is

    H(k) = (-i grad + conj(k) - A)^* omega^2 (-i grad + k - A) + V ,

restricted to the plane-wave span {exp(i xi_m . x) : |m1|,|m2| <= N}.  In
this basis every coefficient acts by exact finite convolution, so the
matrix entries are polynomials of degree <= 2 in (k1, k2):

    H_N(k) = sum_j D_j(k) W2 D_j(k) + C[V],
    D_j(k) = diag(xi_j(m) + k_j) - C[A_j],

with W2 the convolution matrix of omega^2 and C[.] convolution by the
hatted coefficients.  The conj(k) of the defining expression only serves
to make the family analytic; the assembled entries continue polynomially
to complex k.  Collecting powers of k1 gives the exact quadratic pencil

    H_N(k) - lambda = K0 + k1 K1 + k1^2 K2,   K2 = W2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coefficients import (
    CoefficientSet,
    FourierField,
    analyze_grid,
    constant,
    curl,
    grid_size,
    stream_function,
    validate,
)
from .errors import HypothesisViolated, SingularFactor
from .lattice import TWO_PI, Lattice2D

Index = tuple[int, int]


class PlaneWaveBasis:
    """Truncated plane-wave basis, ordered lexicographically by (m1, m2)."""

    def __init__(self, lat: Lattice2D, N: int):
        self.lat = lat
        self.N = int(N)
        self.indices: list[Index] = [
            (m1, m2)
            for m1 in range(-self.N, self.N + 1)
            for m2 in range(-self.N, self.N + 1)
        ]
        self.index_of = {m: i for i, m in enumerate(self.indices)}
        self.dim = len(self.indices)
        self.m1 = np.array([m[0] for m in self.indices])
        self.m2 = np.array([m[1] for m in self.indices])
        # Frequencies in canonical coordinates, shape (dim, 2).
        self.xi = np.column_stack([
            TWO_PI * (lat.alpha * self.m1 + lat.beta * self.m2),
            TWO_PI * self.m2,
        ])

    def contains(self, m: Index, margin: int = 0) -> bool:
        return max(abs(m[0]), abs(m[1])) <= self.N - margin


@dataclass
class FiberMatrix:
    k: np.ndarray
    basis: PlaneWaveBasis
    entries: np.ndarray

    def hermiticity_defect(self) -> float:
        h = self.entries
        return float(
            np.linalg.norm(h - h.conj().T) / max(np.linalg.norm(h), 1e-300)
        )


@dataclass
class PencilBlocks:
    K0: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    k2: complex
    lam: complex

    def reconstruct(self, k1: complex) -> np.ndarray:
        return self.K0 + k1 * self.K1 + k1 * k1 * self.K2

    def scale(self) -> float:
        return float(
            np.linalg.norm(self.K0)
            + np.linalg.norm(self.K1)
            + np.linalg.norm(self.K2)
        )


def conv_matrix(coeffs: FourierField, basis: PlaneWaveBasis) -> np.ndarray:
    """Matrix of multiplication by a scalar field: entries hat(f)(m - m')."""
    N = basis.N
    table = np.zeros((4 * N + 1, 4 * N + 1), dtype=complex)
    for (m1, m2), c in coeffs.terms.items():
        if abs(m1) <= 2 * N and abs(m2) <= 2 * N:
            table[m1 + 2 * N, m2 + 2 * N] = c
    d1 = basis.m1[:, None] - basis.m1[None, :]
    d2 = basis.m2[:, None] - basis.m2[None, :]
    return table[d1 + 2 * N, d2 + 2 * N]


def _require_validated(cs: CoefficientSet):
    if cs.m_g is None:
        report = validate(cs)
        if not report.passed:
            failed = [c.name for c in report.checks if not c.passed]
            raise ValueError(f"coefficient set fails validation: {failed}")


def _momentum_factor(cs: CoefficientSet, basis: PlaneWaveBasis, j: int,
                     kj: complex) -> np.ndarray:
    d = np.diag(basis.xi[:, j].astype(complex) + kj)
    return d - conv_matrix(cs.A.component(j), basis)


def assemble_fiber(cs: CoefficientSet, k, basis: PlaneWaveBasis) -> FiberMatrix:
    """Dense Galerkin matrix of H(k) for (possibly complex) quasimomentum."""
    _require_validated(cs)
    k = np.asarray(k, dtype=complex)
    w2 = conv_matrix(cs.omega.convolve(cs.omega), basis)
    h = conv_matrix(cs.V, basis).astype(complex)
    for j in (0, 1):
        dj = _momentum_factor(cs, basis, j, k[j])
        h += dj @ w2 @ dj
    return FiberMatrix(k=k, basis=basis, entries=h)


def pencil_blocks(cs: CoefficientSet, k2: complex, lam: complex,
                  basis: PlaneWaveBasis) -> PencilBlocks:
    """Exact k1-coefficients of H_N(k1, k2) - lambda.

    K2 is the convolution matrix of omega^2 (Hermitian, >= m_g); K1 is the
    symbolic first-order coefficient W2 D + D W2 with D the k1-independent
    part of the first momentum factor; K0 is the fiber at k1 = 0 shifted
    by lambda.  No fitting is involved.
    """
    _require_validated(cs)
    w2 = conv_matrix(cs.omega.convolve(cs.omega), basis)
    d1 = _momentum_factor(cs, basis, 0, 0.0)
    k1_block = w2 @ d1 + d1 @ w2
    h0 = assemble_fiber(cs, np.array([0.0, k2], dtype=complex), basis)
    k0 = h0.entries - lam * np.eye(basis.dim)
    return PencilBlocks(K0=k0, K1=k1_block, K2=w2, k2=complex(k2), lam=complex(lam))


def free_symbol(lat: Lattice2D, m: Index, k) -> tuple[complex, complex, complex]:
    """Free-operator symbol h_m(k) and its linear factors q+/q-.

    h_m(k) = (xi_1(m) + k1)^2 + (xi_2(m) + k2)^2 = q+ * q- with

        q+/- = xi_1(m) + r1 -/+ l2 + i (l1 +/- xi_2(m) +/- r2),

    k1 = r1 + i l1, k2 = r2 + i l2.
    """
    k1, k2 = complex(k[0]), complex(k[1])
    p = TWO_PI * (lat.alpha * m[0] + lat.beta * m[1])
    q = TWO_PI * m[1]
    h = (p + k1) ** 2 + (q + k2) ** 2
    r1, l1 = k1.real, k1.imag
    r2, l2 = k2.real, k2.imag
    q_plus = p + r1 - l2 + 1j * (l1 + q + r2)
    q_minus = p + r1 + l2 + 1j * (l1 - q - r2)
    return h, q_plus, q_minus


def grid_multiplier(lat: Lattice2D, values: np.ndarray,
                    basis: PlaneWaveBasis) -> np.ndarray:
    """Multiplication matrix of a grid-sampled function.

    The samples are analyzed to support 2N (all index differences the
    basis can see) and placed into a convolution matrix.
    """
    coeffs = analyze_grid(lat, values, 2 * basis.N)
    return conv_matrix(coeffs, basis)


def _resampled_field(lat: Lattice2D, values: np.ndarray, support: int) -> FourierField:
    return analyze_grid(lat, values, support)


def conjugated_fiber(cs: CoefficientSet, k, basis: PlaneWaveBasis,
                     side: str, identity: str = "scalar_to_flat") -> FiberMatrix:
    """Finite section of either side of the scalar-metric conjugation identities.

    identity="scalar_to_flat":  H(k; omega^2, A, V)  vs  omega H(k; 1, A,
    V/omega^2 + (Delta omega)/omega) omega.  identity="flat_to_scalar":
    omega H(k; 1, A, V) omega  vs  H(k; omega^2, A, omega^2 V - omega
    Delta omega).  The omega sandwiches and the scalar_to_flat transformed
    potential use the oversampled grid policy; the flat_to_scalar
    potential is an exact convolution.  Finite sections of products differ
    from products of finite sections, so the two sides agree only in the
    large-N limit; this function exists to measure that gap.
    """
    _require_validated(cs)
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if identity not in ("scalar_to_flat", "flat_to_scalar"):
        raise ValueError("identity must be 'scalar_to_flat' or 'flat_to_scalar'")
    lat = cs.lat
    k = np.asarray(k, dtype=complex)
    mw = conv_matrix(cs.omega, basis)

    if identity == "scalar_to_flat":
        if side == "left":
            return assemble_fiber(cs, k, basis)
        support = max(2 * basis.N, cs.combined_support())
        n = grid_size(support)
        omega_vals = cs.omega.sample(n).real
        v_vals = cs.V.sample(n).real
        lap_vals = cs.omega.laplacian().sample(n).real
        v_tilde = _resampled_field(
            lat, v_vals / omega_vals**2 + lap_vals / omega_vals, 2 * basis.N
        )
        flat = CoefficientSet(V=v_tilde, A=cs.A, omega=constant(lat, 1.0))
        inner = assemble_fiber(flat, k, basis)
        return FiberMatrix(k=k, basis=basis, entries=mw @ inner.entries @ mw)

    if side == "left":
        flat = CoefficientSet(V=cs.V, A=cs.A, omega=constant(lat, 1.0))
        inner = assemble_fiber(flat, k, basis)
        return FiberMatrix(k=k, basis=basis, entries=mw @ inner.entries @ mw)
    omega_sq = cs.omega.convolve(cs.omega)
    v_new = omega_sq.convolve(cs.V) - cs.omega.convolve(cs.omega.laplacian())
    transformed = CoefficientSet(V=v_new, A=cs.A, omega=cs.omega)
    return assemble_fiber(transformed, k, basis)


def pauli_residual(cs: CoefficientSet, k, basis: PlaneWaveBasis,
                   cond_limit: float = 1e12) -> float:
    """Factorization residual of the Pauli block H(k; 1, A, curl A).

    Builds M_N = e^phi Q-(k)^-1 e^-2phi Q+(k)^-1 e^phi with the symbol
    factors Q+/- diagonal and the exponential multipliers realized on the
    oversampled grid, and returns || (H_N(k; 1, A, curl A) M_N - I) G ||_2
    with the graph weight G = diag(1/(1 + |h_m(k)|)).  The identity is
    exact for the full operator; products of finite sections leak only at
    the truncation boundary, where the graph weight makes the leakage
    vanish as N grows.  (Unweighted, the boundary-corner entries of the
    product stall at an N-independent level, so the unweighted norm does
    not converge; it is still what the interior of the window sees.)
    """
    lat = cs.lat
    k = np.asarray(k, dtype=complex)
    phi = stream_function(cs.A)
    b_field = curl(cs.A)
    pauli = CoefficientSet(V=b_field, A=cs.A, omega=constant(lat, 1.0))
    h = assemble_fiber(pauli, k, basis).entries

    q_plus = np.empty(basis.dim, dtype=complex)
    q_minus = np.empty(basis.dim, dtype=complex)
    for i, m in enumerate(basis.indices):
        _, qp, qm = free_symbol(lat, m, k)
        q_plus[i] = qp
        q_minus[i] = qm
    for name, q in (("Q+", q_plus), ("Q-", q_minus)):
        qmin, qmax = np.min(np.abs(q)), np.max(np.abs(q))
        if qmin == 0.0 or qmax / qmin > cond_limit:
            raise SingularFactor(
                f"{name} diagonal condition {qmax / max(qmin, 1e-300):.3e} at k={k}"
            )

    n = grid_size(max(2 * basis.N, phi.support_radius()))
    phi_vals = phi.sample(n).real
    e_phi = grid_multiplier(lat, np.exp(phi_vals), basis)
    e_m2phi = grid_multiplier(lat, np.exp(-2.0 * phi_vals), basis)

    m_n = e_phi @ ((e_m2phi @ (e_phi / q_plus[:, None])) / q_minus[:, None])
    h_free = np.array([
        abs(free_symbol(lat, m, k)[0]) for m in basis.indices
    ])
    residual = (h @ m_n - np.eye(basis.dim)) / (1.0 + h_free)[None, :]
    return float(np.linalg.norm(residual, 2))


def free_resolvent_bound_check(lat: Lattice2D, k, basis: PlaneWaveBasis,
                               tol: float = 1e-9):
    """Check min_m |h_m(k)| >= |Im k1| * dist(Re k2, 2 pi Z) on the basis.

    Requires Im k1 in 2 pi Z and real k2; under these hypotheses the
    inequality is exact for every index, which bounds the free resolvent
    by 1/(|Im k1| delta).
    """
    k = np.asarray(k, dtype=complex)
    l1 = k[0].imag
    if abs(l1 / TWO_PI - round(l1 / TWO_PI)) > tol:
        raise HypothesisViolated(f"Im k1 = {l1} not in 2 pi Z")
    if abs(k[1].imag) > tol:
        raise HypothesisViolated(f"Im k2 = {k[1].imag} nonzero")
    r2 = k[1].real
    delta = abs(r2 / TWO_PI - round(r2 / TWO_PI)) * TWO_PI
    bound = abs(l1) * delta
    h_abs = np.array([
        abs(free_symbol(lat, m, k)[0]) for m in basis.indices
    ])
    min_h = float(np.min(h_abs))
    passed = bool(min_h >= bound - 1e-12 * (1.0 + bound))
    return min_h, bound, passed
