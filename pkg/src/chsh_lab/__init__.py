"""Gated probability spaces for CHSH-type experiments.

Build the single Kolmogorov space that carries all four analyzer-setting
pairs together with a gate selector, compare conditional and unconditional
correlations, simulate the gated experiment, and decide when the four
outcome tables admit one joint distribution.
"""

from .errors import ChshLabError
from .prob_core import (
    ChshReport,
    Event,
    FiniteProbSpace,
    Rv,
    chsh_value,
    condition,
    conditional_expectation,
    correlation,
    expectation,
    make_space,
)
from .settings import (
    REFERENCE_ANGLES,
    AngleConfig,
    CondTable,
    CondTableFamily,
    Convention,
    check_marginal_consistency,
    marginals,
    qm_table,
    table_correlation,
)

__version__ = "0.1.0"
