"""Periodic coefficients as finitely supported Fourier series.

The operator data -- electric potential V, magnetic potential A and the
conformal factor omega of the scalar metric -- are stored as short Fourier
series over the dual lattice.  Products of such fields are exact finite
convolutions, so Galerkin matrix entries downstream carry no quadrature
error.  The only resampling step in the package is the oversampled-grid
policy used for non-band-limited derived quantities (omega^-2, exp of the
stream function), implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotDivergenceFree, NotPositive, NotRealValued
from .lattice import DualIndex, Lattice2D

Index = tuple[int, int]

# Oversampling factor relative to combined Fourier support for every
# grid-resampling operation in the package.
OVERSAMPLE = 4


def grid_size(support: int, factor: int = OVERSAMPLE) -> int:
    """Grid side length for alias-free sampling of the given support."""
    return max(factor * (2 * support + 1), 16)


@dataclass
class FourierField:
    """Finitely supported Fourier series of a real periodic field.

    ``terms`` maps integer dual indices (m1, m2) to amplitudes: a complex
    scalar for rank 1, a complex 2-vector for rank 2.  Real-valuedness of
    the represented field means amp(-m) == conj(amp(m)).
    """

    lat: Lattice2D
    terms: dict[Index, complex | np.ndarray]
    rank: int = 1

    def __post_init__(self):
        if self.rank == 2:
            self.terms = {
                m: np.asarray(c, dtype=complex) for m, c in self.terms.items()
            }
        else:
            self.terms = {m: complex(c) for m, c in self.terms.items()}

    # -- basic queries ----------------------------------------------------

    def amplitude(self, m: Index):
        if self.rank == 2:
            return self.terms.get(m, np.zeros(2, dtype=complex))
        return self.terms.get(m, 0.0 + 0.0j)

    def support_radius(self) -> int:
        if not self.terms:
            return 0
        return max(max(abs(m1), abs(m2)) for m1, m2 in self.terms)

    def max_amplitude(self) -> float:
        if not self.terms:
            return 0.0
        return max(float(np.max(np.abs(c))) for c in self.terms.values())

    def mean(self):
        """Amplitude at m = 0 (the cell average)."""
        return self.amplitude((0, 0))

    def realness_residual(self) -> float:
        """Max |amp(-m) - conj(amp(m))| over stored indices."""
        res = 0.0
        for (m1, m2), c in self.terms.items():
            c_neg = self.amplitude((-m1, -m2))
            res = max(res, float(np.max(np.abs(np.conj(c) - c_neg))))
        return res

    def require_real(self, tol: float = 1e-12):
        scale = max(1.0, self.max_amplitude())
        res = self.realness_residual()
        if res > tol * scale:
            raise NotRealValued(f"conjugate-symmetry residual {res:.3e}")

    # -- arithmetic -------------------------------------------------------

    def pruned(self, cutoff: float = 0.0) -> "FourierField":
        kept = {
            m: c for m, c in self.terms.items()
            if float(np.max(np.abs(c))) > cutoff
        }
        return FourierField(self.lat, kept, self.rank)

    def __add__(self, other: "FourierField") -> "FourierField":
        assert self.rank == other.rank
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0 if self.rank == 1 else np.zeros(2, complex)) + c
        return FourierField(self.lat, out, self.rank).pruned()

    def __sub__(self, other: "FourierField") -> "FourierField":
        return self + other.scaled(-1.0)

    def scaled(self, s: complex) -> "FourierField":
        return FourierField(
            self.lat, {m: s * c for m, c in self.terms.items()}, self.rank
        )

    def convolve(self, other: "FourierField") -> "FourierField":
        """Fourier coefficients of the pointwise product (rank 1 only)."""
        assert self.rank == 1 and other.rank == 1
        out: dict[Index, complex] = {}
        for (a1, a2), ca in self.terms.items():
            for (b1, b2), cb in other.terms.items():
                key = (a1 + b1, a2 + b2)
                out[key] = out.get(key, 0.0 + 0.0j) + ca * cb
        return FourierField(self.lat, out, 1).pruned()

    def partial(self, j: int) -> "FourierField":
        """Derivative along coordinate j (0 or 1): multiply by i*xi_j."""
        assert self.rank == 1
        out = {}
        for m, c in self.terms.items():
            xi = self.lat.frequency(m)
            out[m] = 1j * xi[j] * c
        return FourierField(self.lat, out, 1).pruned()

    def laplacian(self) -> "FourierField":
        assert self.rank == 1
        out = {}
        for m, c in self.terms.items():
            xi = self.lat.frequency(m)
            out[m] = -(xi @ xi) * c
        return FourierField(self.lat, out, 1).pruned()

    def component(self, j: int) -> "FourierField":
        assert self.rank == 2
        return FourierField(
            self.lat, {m: c[j] for m, c in self.terms.items()}, 1
        ).pruned()

    # -- grid sampling ----------------------------------------------------

    def sample(self, n: int | None = None) -> np.ndarray:
        """Values on the uniform n x n cell grid t = (j/n, k/n).

        Uses the biorthogonality xi_m . (t1 b1 + t2 b2) = 2 pi (m1 t1 + m2 t2),
        so synthesis is an exact inverse FFT with coefficients placed at
        (m1 mod n, m2 mod n).  Rank-2 fields return shape (n, n, 2).
        """
        if n is None:
            n = grid_size(self.support_radius())
        if n < 2 * self.support_radius() + 1:
            raise ValueError("grid too coarse for the stored support")
        if self.rank == 2:
            comps = [self.component(j).sample(n) for j in (0, 1)]
            return np.stack(comps, axis=-1)
        spec = np.zeros((n, n), dtype=complex)
        for (m1, m2), c in self.terms.items():
            spec[m1 % n, m2 % n] += c
        return np.fft.ifft2(spec) * n * n


def analyze_grid(
    lat: Lattice2D, values: np.ndarray, support: int, cutoff_rel: float = 1e-15
) -> FourierField:
    """Discrete Fourier analysis of grid values, truncated to the support.

    Conjugate symmetry is enforced exactly so the result represents a real
    field even in the presence of rounding noise.
    """
    n = values.shape[0]
    if n < 2 * support + 1:
        raise ValueError("grid too coarse for the requested support")
    spec = np.fft.fft2(values.astype(complex)) / (n * n)
    cutoff = cutoff_rel * max(1.0, float(np.max(np.abs(spec))))
    terms: dict[Index, complex] = {}
    for m1 in range(-support, support + 1):
        for m2 in range(-support, support + 1):
            c = spec[m1 % n, m2 % n]
            c_sym = 0.5 * (c + np.conj(spec[(-m1) % n, (-m2) % n]))
            if abs(c_sym) > cutoff:
                terms[(m1, m2)] = c_sym
    return FourierField(lat, terms, 1)


# -- field constructors ----------------------------------------------------

def constant(lat: Lattice2D, value: float) -> FourierField:
    return FourierField(lat, {(0, 0): complex(value)} if value != 0 else {}, 1)


def zero_vector(lat: Lattice2D) -> FourierField:
    return FourierField(lat, {}, 2)


def constant_vector(lat: Lattice2D, value) -> FourierField:
    return FourierField(lat, {(0, 0): np.asarray(value, dtype=complex)}, 2)


def cosine(lat: Lattice2D, m: Index, amplitude: float) -> FourierField:
    """amplitude * cos(xi_m . x) as a two-term series."""
    half = 0.5 * amplitude
    return FourierField(lat, {m: half, (-m[0], -m[1]): half}, 1)


def sine(lat: Lattice2D, m: Index, amplitude: float) -> FourierField:
    half = amplitude / 2j
    return FourierField(lat, {m: half, (-m[0], -m[1]): -half}, 1)


def vector_cosine(lat: Lattice2D, m: Index, direction, amplitude: float) -> FourierField:
    """amplitude * cos(xi_m . x) * direction for a fixed real 2-vector."""
    d = np.asarray(direction, dtype=complex)
    half = 0.5 * amplitude
    return FourierField(
        lat, {m: half * d, (-m[0], -m[1]): half * d}, 2
    )


def divfree_harmonic(lat: Lattice2D, m: Index, amplitude: float) -> FourierField:
    """Divergence-free cosine harmonic: direction perpendicular to xi_m."""
    xi = lat.frequency(m)
    perp = np.array([-xi[1], xi[0]]) / np.linalg.norm(xi)
    return vector_cosine(lat, m, perp, amplitude)


def gradient(phi: FourierField) -> FourierField:
    """Vector field grad(phi) from a scalar series."""
    terms = {}
    for m, c in phi.terms.items():
        xi = phi.lat.frequency(m)
        terms[m] = 1j * xi * c
    return FourierField(phi.lat, terms, 2).pruned()


# -- vector-field operations ------------------------------------------------

def divergence_residual(A: FourierField) -> float:
    """Max |xi_m . A_hat(m)|, normalized by the largest term magnitude."""
    assert A.rank == 2
    worst = 0.0
    scale = 0.0
    for m, c in A.terms.items():
        xi = A.lat.frequency(m)
        worst = max(worst, abs(xi @ c))
        scale = max(scale, float(np.linalg.norm(xi) * np.linalg.norm(c)))
    return worst / max(scale, 1.0)


def curl(A: FourierField) -> FourierField:
    """Scalar curl  B = d1 A2 - d2 A1."""
    assert A.rank == 2
    terms = {}
    for m, c in A.terms.items():
        xi = A.lat.frequency(m)
        terms[m] = 1j * xi[0] * c[1] - 1j * xi[1] * c[0]
    return FourierField(A.lat, terms, 1).pruned()


@dataclass
class GaugeReport:
    """Result of splitting A into gauge, mean, and transverse parts."""

    A_normalized: FourierField
    Phi: FourierField
    k_shift: np.ndarray


def gauge_normalize(A_raw: FourierField) -> GaugeReport:
    """Remove the gradient part and the mean of a vector potential.

    The removed mean reappears as a quasimomentum shift: the spectra of
    the fiber operators satisfy  lambda(k; A_raw) = lambda(k - k_shift;
    A_normalized)  up to the (unitary) periodic gauge factor.
    """
    A_raw.require_real()
    lat = A_raw.lat
    mean = A_raw.mean()
    k_shift = np.real(mean)

    phi_terms: dict[Index, complex] = {}
    a_terms: dict[Index, np.ndarray] = {}
    for m, c in A_raw.terms.items():
        if m == (0, 0):
            continue
        xi = lat.frequency(m)
        proj = (xi @ c) / (xi @ xi)
        phi_terms[m] = proj / 1j
        a_terms[m] = c - proj * xi
    A_norm = FourierField(lat, a_terms, 2).pruned(1e-16 * max(A_raw.max_amplitude(), 1e-300))
    return GaugeReport(
        A_normalized=A_norm,
        Phi=FourierField(lat, phi_terms, 1).pruned(),
        k_shift=k_shift,
    )


def stream_function(A: FourierField, tol: float = 1e-8) -> FourierField:
    """Scalar phi with grad(phi) = (A2, -A1) for divergence-free zero-mean A.

    Solves  Delta phi = curl A  in Fourier space; phi has zero mean.
    """
    if divergence_residual(A) > tol:
        raise NotDivergenceFree(
            f"divergence residual {divergence_residual(A):.3e} exceeds {tol:.1e}"
        )
    if np.max(np.abs(A.mean())) > tol * max(1.0, A.max_amplitude()):
        raise NotDivergenceFree("vector potential has nonzero mean")
    B = curl(A)
    terms = {}
    for m, c in B.terms.items():
        if m == (0, 0):
            continue
        xi = A.lat.frequency(m)
        terms[m] = -c / (xi @ xi)
    return FourierField(A.lat, terms, 1).pruned()


def invert_square(omega: FourierField, target_support: int) -> FourierField:
    """Fourier coefficients of omega^-2 by oversampled grid resampling."""
    omega.require_real()
    support = max(omega.support_radius(), target_support)
    n = grid_size(support)
    vals = omega.sample(n)
    if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, np.max(np.abs(vals.real))):
        raise NotRealValued("omega samples have a nontrivial imaginary part")
    vals = vals.real
    if np.min(vals) <= 0:
        raise NotPositive(f"omega reaches {np.min(vals):.3e} on the sampling grid")
    return analyze_grid(omega.lat, 1.0 / vals**2, target_support)


# -- coefficient sets --------------------------------------------------------

@dataclass
class CoefficientSet:
    """The operator data (V, A, omega) plus the certified metric bound m_g."""

    V: FourierField
    A: FourierField
    omega: FourierField
    m_g: float | None = None

    @property
    def lat(self) -> Lattice2D:
        return self.omega.lat

    def combined_support(self) -> int:
        return max(
            self.V.support_radius(),
            self.A.support_radius(),
            self.omega.support_radius(),
        )


def free_set(lat: Lattice2D) -> CoefficientSet:
    """V = 0, A = 0, omega = 1: the exactly diagonalizable reference."""
    return CoefficientSet(
        V=FourierField(lat, {}, 1),
        A=zero_vector(lat),
        omega=constant(lat, 1.0),
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    threshold: float


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)
    m_g: float | None = None
    safety_margin: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, residual: float, threshold: float):
        self.checks.append(CheckResult(name, residual <= threshold, residual, threshold))


def validate(cs: CoefficientSet) -> ValidationReport:
    """Check all normalization conditions and certify m_g.

    m_g is the grid minimum of omega^2 minus a Lipschitz safety margin
    sum_m |xi_m| |what(omega^2)(m)| * h, h the grid mesh size, so the bound
    omega^2 >= m_g holds for the continuum field, not just at grid nodes.
    """
    report = ValidationReport()
    scale_v = max(1.0, cs.V.max_amplitude())
    scale_a = max(1.0, cs.A.max_amplitude())
    scale_w = max(1.0, cs.omega.max_amplitude())
    report.add("V real-valued", cs.V.realness_residual() / scale_v, 1e-12)
    report.add("A real-valued", cs.A.realness_residual() / scale_a, 1e-12)
    report.add("omega real-valued", cs.omega.realness_residual() / scale_w, 1e-12)
    report.add(
        "A zero mean",
        float(np.max(np.abs(cs.A.mean()))) / scale_a,
        1e-10,
    )
    report.add("A divergence-free", divergence_residual(cs.A), 1e-10)

    omega_sq = cs.omega.convolve(cs.omega)
    lipschitz = sum(
        np.linalg.norm(cs.lat.frequency(m)) * abs(c)
        for m, c in omega_sq.terms.items()
    )
    lat = cs.lat
    cell_span = np.linalg.norm(lat.b1) + np.linalg.norm(lat.b2)
    # Refine the sampling grid until the Lipschitz margin is a small
    # fraction of the grid minimum (the 4x-Nyquist floor is only a start).
    n = grid_size(cs.omega.support_radius())
    while True:
        omega_vals = cs.omega.sample(n).real
        min_sq = float(np.min(omega_vals**2))
        margin = lipschitz * cell_span / (2 * n)
        if margin <= max(0.02 * min_sq, 1e-12) or n >= 4096:
            break
        n *= 2
    report.add("omega positive on grid", -float(np.min(omega_vals)), 0.0)
    m_g = float(min_sq - margin)
    report.m_g = m_g
    report.safety_margin = float(margin)
    report.add("omega^2 lower bound positive", -m_g, 0.0)
    if report.passed:
        cs.m_g = m_g
    return report
