"""Finite-n exponent experiments computed exactly over type classes.

A trace records, for each sample size, an exact error value and the exponent
estimate ``-(1/n) log2(error)``, alongside the single-letter reference lines
the estimates should approach.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .exponents import chernoff_information, d_b_nu, kl_divergence, log2_affinity
from .logspace import LN2
from .nu_loss import NuLike, NuParam, as_nu, format_nu
from .prob_core import HypothesisPair
from .randomized import (
    bayes_risk,
    bayes_test,
    calibrate_lambda,
    log2_bayes_risk,
    log2_expected_loss,
)


@dataclass(frozen=True)
class TraceRow:
    n: int
    log2_error: float

    @property
    def error(self) -> float:
        try:
            return 2.0 ** self.log2_error
        except OverflowError:
            return math.inf

    @property
    def exponent(self) -> float:
        return -self.log2_error / self.n


@dataclass
class ExponentTrace:
    nu: NuParam
    constraint: dict
    rows: list = field(default_factory=list)
    reference_lines: dict = field(default_factory=dict)
    reference: str = ""

    def exponents(self) -> np.ndarray:
        return np.array([r.exponent for r in self.rows])

    @property
    def final(self) -> float:
        return self.rows[-1].exponent

    def metadata(self, base: str = "bits") -> dict:
        factor = LN2 if base == "nats" else 1.0
        return {
            "nu": self.nu.to_json(),
            **self.constraint,
            "base": base,
            "reference": self.reference,
            "reference_lines": {k: v * factor for k, v in self.reference_lines.items()},
        }

    def to_csv(self, base: str = "bits") -> str:
        if base not in ("bits", "nats"):
            raise ValidationError(f"unknown base {base!r}")
        factor = LN2 if base == "nats" else 1.0
        ref = self.reference_lines.get(self.reference, math.nan) * factor
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "error", "exponent_estimate", "reference"])
        for r in self.rows:
            w.writerow([r.n, repr(r.error), repr(r.exponent * factor), repr(ref)])
        return buf.getvalue()

    def metadata_json(self, base: str = "bits") -> str:
        return json.dumps(self.metadata(base), indent=2, sort_keys=True)


def _sorted_ns(n_list: Iterable[int]) -> list[int]:
    ns = sorted({int(n) for n in n_list})
    if not ns or ns[0] < 1:
        raise ValidationError("n_list needs positive sample sizes")
    return ns


def np_exponent_trace(nu: NuLike, epsilon: float, pair: HypothesisPair, n_list: Iterable[int],
                      objective: str = "nu") -> ExponentTrace:
    """Exponent of the type II error of the size-``epsilon`` most powerful test.

    ``objective="nu"`` traces beta_bar_nu (default); ``"classical"`` traces the
    plain type II error ``E_1[delta(X^n, 0)]`` of the same test.
    """
    nu = as_nu(nu)
    if objective not in ("nu", "classical"):
        raise ValidationError("objective must be 'nu' or 'classical'")
    trace = ExponentTrace(nu, {"epsilon": float(epsilon), "objective": objective},
                          reference="kl")
    trace.reference_lines["kl"] = kl_divergence(pair.p0, pair.p1)
    loss_nu = nu if objective == "nu" else math.inf
    for n in _sorted_ns(n_list):
        cal = calibrate_lambda(nu, epsilon, pair, n)
        trace.rows.append(TraceRow(n, log2_expected_loss(cal.test, pair, loss_nu, 1)))
    return trace


def bayes_exponent_trace(nu: NuLike, pair: HypothesisPair, n_list: Iterable[int]) -> ExponentTrace:
    """Exponent of the minimum nu-Bayesian error."""
    nu = as_nu(nu)
    pi0, pi1 = pair.require_prior()
    trace = ExponentTrace(nu, {"prior": [pi0, pi1]})
    trace.reference_lines["chernoff"] = chernoff_information(pair.p0, pair.p1).value
    if nu.is_infinite:
        trace.reference = "chernoff"
    else:
        trace.reference_lines["d_b"] = d_b_nu(nu, pair.p0, pair.p1)
        trace.reference = "d_b"
    for n in _sorted_ns(n_list):
        trace.rows.append(TraceRow(n, log2_bayes_risk(nu, bayes_test(nu, pair, n), pair)))
    return trace


@dataclass(frozen=True)
class BoundCheck:
    risk: float
    bound: float
    holds: bool
    log2_risk: float
    log2_bound: float


def bayes_bound_check(nu: NuLike, pair: HypothesisPair, n: int) -> BoundCheck:
    """Check ``r(Bayes test) <= nu/(nu-1) * max{BC_{nu/2}, BC_{1-nu/2}}**n`` exactly."""
    nu = as_nu(nu)
    if nu.is_infinite or nu.is_log_loss:
        raise ValidationError("the bound needs 1 < nu < inf")
    half = nu.value / 2.0
    log2_max_bc = max(log2_affinity(half, pair.p0, pair.p1),
                      log2_affinity(1.0 - half, pair.p0, pair.p1))
    log2_bound = math.log2(nu.scale) + n * log2_max_bc
    test = bayes_test(nu, pair, n)
    log2_r = log2_bayes_risk(nu, test, pair)
    holds = log2_r <= log2_bound + 1e-12
    risk = bayes_risk(nu, test, pair).risk
    try:
        bound = 2.0 ** log2_bound
    except OverflowError:
        bound = math.inf
    return BoundCheck(risk, bound, holds, log2_r, log2_bound)


def default_nu_grid(nu_min: float = 1.0, nu_max: float = 2.0, steps: int = 101) -> list[float]:
    if steps < 2:
        raise ValidationError("steps must be >= 2")
    if not (1.0 <= nu_min < nu_max) or math.isinf(nu_max):
        raise ValidationError("need 1 <= nu_min < nu_max < inf")
    return [float(v) for v in np.linspace(nu_min, nu_max, steps)]


def sweep_d_b_nu(pair: HypothesisPair, nu_grid: Sequence[float] | None = None) -> list[tuple[float, float]]:
    """``(nu, D_B_nu)`` pairs over ``nu_grid`` (default 101 points on [1, 2])."""
    grid = default_nu_grid() if nu_grid is None else [float(v) for v in nu_grid]
    return [(nu, d_b_nu(nu, pair.p0, pair.p1)) for nu in grid]


def sweep_csv(rows: Sequence[tuple[float, float]], base: str = "bits") -> str:
    factor = LN2 if base == "nats" else 1.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["nu", "d_b_nu"])
    for nu, v in rows:
        w.writerow([format_nu(nu), repr(v * factor)])
    return buf.getvalue()
