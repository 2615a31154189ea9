"""Gaussian-exponential states under a measurement-based quantum Brownian motion master equation.

Exact propagation of characteristic functions, decoherence observables for
Gaussian packets and two-packet (cat) states, Lindblad diagnostics, and
independent numerical oracles for every closed form.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ExtendGridError,
    InvalidSpecError,
    InvalidTimeError,
    NumericalInconsistencyError,
    QBMError,
    RefinementRequiredError,
    ResolutionError,
    SingularTermError,
    UnsupportedStateError,
)
from .propagator import EvolutionParams, evolve_state, evolve_term  # noqa: E402
from .statekit import (  # noqa: E402
    HBAR,
    KB,
    CatSpec,
    CharTerm,
    CoordTerm,
    DiffusionCoeffs,
    ExpSumState,
    GaussianSpec,
    PhysicalParams,
    Rep,
    build_cat,
    build_gaussian,
    momentum_rep,
    to_characteristic,
    to_position,
    trace_of,
)
