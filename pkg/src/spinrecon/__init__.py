"""Reconstruction of pure spin-s states from Stern-Gerlach intensities along three axes."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .spin import (  # noqa: F401
    X,
    Y,
    Z,
    Direction,
    ProbabilityVector,
    PureState,
    SpinLabel,
    apply_phase_polynomial,
    basis_states,
    char_function,
    fidelity,
    invert_char_function,
    probabilities,
    random_state,
    rotation_operator,
    spin_matrices,
    time_reversal,
)
from .majorana import (  # noqa: F401
    INF,
    RootSet,
    classify_genericity,
    ensembles_from_rootset,
    product_expectation,
    recombine,
    roots_from_state,
    state_from_roots,
)
from .tomography import (  # noqa: F401
    DataSet,
    ReconstructionConfig,
    reconstruct,
    simulate_dataset,
    validate_axes,
)
