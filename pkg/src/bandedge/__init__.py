"""Band structure and band-edge geometry of 2D periodic operators.

Library layout:

- ``lattice``: direct/dual bases and the canonical (alpha, beta) form.
- ``coefficients``: finitely supported Fourier data (V, A, omega), gauge
  normalization, stream function, oversampled-grid resampling.
- ``fiber``: plane-wave Galerkin matrices of the Bloch fiber, the exact
  quadratic k1-pencil, symbol factorization, conjugation identities.
- ``bands``: band grids, extremum location/classification, effective mass.
- ``linearization``: companion matrices, spectra, window-restricted
  discriminants, degeneracy scans, brick-wall geometry.
- ``discrete``: the diatomic chessboard model in closed form.
- ``cli``: configured jobs emitting csv/json and figures.
"""

from .lattice import DualIndex, Lattice2D, canonicalize, dual_basis
from .coefficients import (
    CoefficientSet,
    FourierField,
    GaugeReport,
    ValidationReport,
    curl,
    free_set,
    gauge_normalize,
    invert_square,
    stream_function,
    validate,
)
from .fiber import (
    FiberMatrix,
    PencilBlocks,
    PlaneWaveBasis,
    assemble_fiber,
    conjugated_fiber,
    free_resolvent_bound_check,
    free_symbol,
    pauli_residual,
    pencil_blocks,
)
from .bands import (
    BandGrid,
    EffectiveMass,
    ExtremumReport,
    band_values,
    effective_mass,
    level_set,
    locate_extrema,
    scan,
)
from .linearization import (
    DiscriminantScan,
    LinearizedOperator,
    SpectrumWindow,
    T1Spectrum,
    assemble_t1,
    brick_wall_check,
    correspondence_check,
    degeneracy_scan,
    discriminant,
    periodicity_check,
    restricted_discriminant,
    sigma_set,
    t1_spectrum,
)
from .discrete import (
    DiatomicModel,
    band_edges,
    grid_adapter,
    lambda_pm,
    level_lines,
    torus_spectrum,
)
from .discrete import fiber as diatomic_fiber

__version__ = "0.1.0"
