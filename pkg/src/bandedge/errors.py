"""Exception types shared across the package."""


class BandEdgeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateLattice(BandEdgeError):
    """Lattice basis vectors are (numerically) linearly dependent."""


class NotRealValued(BandEdgeError):
    """Fourier coefficients violate the conjugate-symmetry condition."""


class NotDivergenceFree(BandEdgeError):
    """Vector field fails the divergence-free condition beyond tolerance."""


class NotPositive(BandEdgeError):
    """A field required to be strictly positive dips to zero or below."""


class SolverFailure(BandEdgeError):
    """Dense eigensolver did not converge."""


class SingularFactor(BandEdgeError):
    """A diagonal symbol factor is numerically singular at the requested k."""


class HypothesisViolated(BandEdgeError):
    """Input k does not satisfy the preconditions of a bound check."""


class IllConditionedMass(BandEdgeError):
    """Leading pencil block too ill-conditioned to invert reliably."""


class BoundaryEigenvalue(BandEdgeError):
    """An eigenvalue sits on (or too close to) a spectral window boundary."""


class NotAttained(BandEdgeError):
    """Requested level value lies outside the spectrum."""


class OddTorus(BandEdgeError):
    """Finite torus size incompatible with the two-site unit cell."""


class ConfigError(BandEdgeError):
    """Malformed or incomplete job configuration."""


class IOFailure(BandEdgeError):
    """Could not write a report artifact."""
