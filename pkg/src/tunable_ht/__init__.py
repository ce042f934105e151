"""Simple hypothesis testing under the tunable nu-loss.

Exact finite-n computation over type classes of closed-form optimal
randomized tests, their nu-errors, and the single-letter exponent quantities
they approach.
"""

from .errors import NumericError, OracleMismatch, ResourceError, ValidationError
from .explab import (
    BoundCheck,
    ExponentTrace,
    TraceRow,
    bayes_bound_check,
    bayes_exponent_trace,
    np_exponent_trace,
    sweep_d_b_nu,
)
from .exponents import (
    ChernoffResult,
    ExponentReport,
    TypicalSetSpec,
    aep_test,
    chernoff_information,
    d_b_nu,
    exponent_report,
    kl_divergence,
    skewed_bhattacharyya,
    typical_set,
    typical_set_probability,
)
from .nu_loss import INFINITY, NuParam, as_nu, loss_curve, nu_loss
from .prob_core import (
    Distribution,
    HypothesisPair,
    TypeClass,
    bernoulli,
    enumerate_type_classes,
    make_distribution,
    sample_iid,
    seq_log_likelihood_ratio,
    type_table,
)
from .randomized import (
    BayesRiskReport,
    Calibration,
    ErrorPair,
    RandomizedTest,
    TestKind,
    bayes_risk,
    bayes_test,
    calibrate_lambda,
    constant_test,
    error_pair,
    infty_mp_test,
    mp_test,
    nu_mp_test,
    nu_type1_error,
    nu_type2_error,
    table_test,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
