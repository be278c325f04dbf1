"""Entropy rates of hidden Markov chains and their parameter derivatives.

Core pieces: :mod:`hmm_core` (models, belief updates, black-hole test),
:mod:`jets` (truncated Taylor arithmetic and parameter curves),
:mod:`entropy` (block entropies, conditional entropies, stabilized
derivatives), :mod:`bsc` (Blackwell's measure for a binary chain through a
binary symmetric channel), :mod:`deriv_formula` (the four-term first
derivative and special cases) and :mod:`combinatorics` (exact coefficient
identities).
"""

from .bsc import (
    BinaryChainParams,
    SupportKind,
    blackwell_entropy,
    classify_support,
    cylinder_level,
    entropy_bounds,
    fixed_points,
)
from .deriv_formula import (
    hpz_derivative,
    iid_entropy,
    low_snr_numeric_check,
    low_snr_second_derivative,
    two_zero_entropy,
)
from .entropy import (
    block_entropy,
    entropy_rate_estimate,
    entropy_sequence,
    h_n,
    stabilized_derivative,
    stabilizing_length,
)
from .errors import GuardError, ModelError, RegimeViolation
from .hmm_core import HiddenMarkovModel, is_black_hole, stationary_distribution
from .jets import Jet, ModelCurve

__all__ = [
    "BinaryChainParams",
    "GuardError",
    "HiddenMarkovModel",
    "Jet",
    "ModelCurve",
    "ModelError",
    "RegimeViolation",
    "SupportKind",
    "blackwell_entropy",
    "block_entropy",
    "classify_support",
    "cylinder_level",
    "entropy_bounds",
    "entropy_rate_estimate",
    "entropy_sequence",
    "fixed_points",
    "h_n",
    "hpz_derivative",
    "iid_entropy",
    "is_black_hole",
    "low_snr_numeric_check",
    "low_snr_second_derivative",
    "stabilized_derivative",
    "stabilizing_length",
    "stationary_distribution",
    "two_zero_entropy",
]
