"""Stochastic-process tools for historical and archaeological time series.

Subpackages cover: multivariate series containers with PCA and window
curves (dataset), finite-state chain estimation and embeddability (markov),
planar drift-diffusion fields with Helmholtz splits and return cycles
(sde), the clusters-without-attractors null model (nullmodel), saw-tooth
threshold detection (hinge), and age-structured demography with a
regime-switching observation model (demography).  The `chronoflow` CLI
exposes each pipeline with manifested, reproducible runs.

Set CHRONOFLOW_NO_NUMBA=1 to force the pure-interpreter kernel paths and
CHRONOFLOW_LOG to adjust logging.
"""

from .exceptions import (
    ChronoflowError,
    DuplicateTimestampError,
    EmptyEnsembleError,
    NoUniqueStationaryError,
    NonConvergenceWarning,
    NonIdentifiableWarning,
    NotPrimitiveError,
    NumericalError,
    ParseError,
    SchemaError,
    UnsupportedNodeError,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ChronoflowError",
    "DuplicateTimestampError",
    "EmptyEnsembleError",
    "NoUniqueStationaryError",
    "NonConvergenceWarning",
    "NonIdentifiableWarning",
    "NotPrimitiveError",
    "NumericalError",
    "ParseError",
    "SchemaError",
    "UnsupportedNodeError",
]
