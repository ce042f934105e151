"""Single-letter exponent quantities and relative typical sets.

All logarithms are base 2 (bits). :class:`ExponentReport` converts to nats on
request.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ValidationError
from .logspace import LN2, logsumexp2
from .nu_loss import NuLike, as_nu, format_nu
from .prob_core import DEFAULT_TYPE_CAP, Distribution, HypothesisPair, TypeClass, type_table
from .randomized import RandomizedTest, TestKind

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _check_alphabets(p0: Distribution, p1: Distribution) -> None:
    if p0.alphabet_size != p1.alphabet_size:
        raise ValidationError(
            f"alphabet mismatch: {p0.alphabet_size} vs {p1.alphabet_size}"
        )


def kl_divergence(p0: Distribution, p1: Distribution) -> float:
    """D(p0 || p1) in bits; +inf when p0 puts mass where p1 has none."""
    _check_alphabets(p0, p1)
    on = p0.support
    if np.any(p1.log_probs[on] == -np.inf):
        return math.inf
    terms = p0.probs[on] * (p0.log_probs[on] - p1.log_probs[on])
    return max(math.fsum(terms), 0.0)


def log2_affinity(s: float, p0: Distribution, p1: Distribution) -> float:
    """log2 sum_x p0(x)**s * p1(x)**(1-s).

    Symbols outside both supports are skipped; ``0**0 = 1``; a zero base with
    a negative exponent gives ``+inf``.
    """
    _check_alphabets(p0, p1)
    if s in (0.0, 1.0):
        # sum of a normalized law, exactly 1
        return 0.0
    lp0, lp1 = p0.log_probs, p1.log_probs
    keep = (lp0 > -np.inf) | (lp1 > -np.inf)
    lp0, lp1 = lp0[keep], lp1[keep]

    def power(lp, e):
        if e == 0.0:
            return np.zeros_like(lp)
        with np.errstate(invalid="ignore"):
            return e * lp

    terms = power(lp0, s) + power(lp1, 1.0 - s)
    return float(logsumexp2(terms))


def _log2_overlap(s: float, p0: Distribution, p1: Distribution) -> float:
    # restricted to the common support, so continuous on the closed interval [0, 1]
    both = p0.support & p1.support
    if not np.any(both):
        return -math.inf
    return float(logsumexp2(s * p0.log_probs[both] + (1.0 - s) * p1.log_probs[both]))


class ChernoffResult(NamedTuple):
    value: float
    lambda_star: float


def golden_section_minimize(f, lo: float, hi: float, tol: float = 1e-10,
                            max_iter: int = 500) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; endpoints are candidates too."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
    for x in (lo, hi):
        fx = f(x)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def chernoff_information(p0: Distribution, p1: Distribution, tol: float = 1e-10) -> ChernoffResult:
    """C(p0, p1) = -min over lambda in [0, 1] of log2 sum_x p0**lambda p1**(1-lambda).

    The objective is convex in lambda, so golden-section search finds the
    global minimum. Endpoint values are taken by continuity on the common
    support; for mutually absolutely continuous laws they are exactly 0.
    """
    _check_alphabets(p0, p1)
    if not np.any(p0.support & p1.support):
        return ChernoffResult(math.inf, 0.5)
    if np.array_equal(p0.log_probs, p1.log_probs):
        return ChernoffResult(0.0, 0.5)
    lam, val = golden_section_minimize(lambda s: _log2_overlap(s, p0, p1), 0.0, 1.0, tol)
    return ChernoffResult(max(-val, 0.0), lam)


def chernoff_objective(lam: float, p0: Distribution, p1: Distribution) -> float:
    """log2 sum_x p0**lam p1**(1-lam) as minimized by :func:`chernoff_information`."""
    return _log2_overlap(lam, p0, p1)


def _finite_nu(nu: NuLike):
    nu = as_nu(nu)
    if nu.is_infinite:
        raise ValidationError("this quantity is defined for finite nu only")
    return nu


def skewed_bhattacharyya(nu: NuLike, p0: Distribution, p1: Distribution) -> float:
    """BC_{nu/2} = sum_x p0(x)**(nu/2) p1(x)**(1-nu/2).

    For nu > 2 a symbol with p1 = 0 < p0 makes this +inf.
    """
    nu = _finite_nu(nu)
    return 2.0 ** log2_affinity(nu.value / 2.0, p0, p1)


def d_b_nu(nu: NuLike, p0: Distribution, p1: Distribution) -> float:
    """-log2 max{BC_{nu/2}, BC_{1-nu/2}}, the lower bound on the nu-Bayesian exponent.

    ``BC_{1-nu/2}`` is the affinity with exponent ``1 - nu/2`` on ``p0``, i.e.
    ``sum_x p0**(1-nu/2) p1**(nu/2)``.
    """
    nu = _finite_nu(nu)
    half = nu.value / 2.0
    worst = max(log2_affinity(half, p0, p1), log2_affinity(1.0 - half, p0, p1))
    return -worst + 0.0


# ---------------------------------------------------------------------------
# report


@dataclass
class ExponentReport:
    kl: float
    kl_reverse: float
    chernoff: float
    lambda_star: float
    bc: dict = field(default_factory=dict)
    d_b: dict = field(default_factory=dict)
    base: str = "bits"

    def converted(self, base: str) -> "ExponentReport":
        """Copy with exponents in ``base``; affinities are unitless and unchanged."""
        if base not in ("bits", "nats"):
            raise ValidationError(f"unknown base {base!r}")
        if base == self.base:
            return self
        factor = LN2 if base == "nats" else 1.0 / LN2
        return ExponentReport(
            self.kl * factor, self.kl_reverse * factor, self.chernoff * factor,
            self.lambda_star, dict(self.bc), {k: v * factor for k, v in self.d_b.items()}, base,
        )

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "kl": self.kl,
            "kl_reverse": self.kl_reverse,
            "chernoff": {"value": self.chernoff, "lambda_star": self.lambda_star},
            "bc": {k: v for k, v in self.bc.items()},
            "d_b": {k: v for k, v in self.d_b.items()},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "nu", "value", "base"])
        w.writerow(["kl", "", repr(self.kl), self.base])
        w.writerow(["kl_reverse", "", repr(self.kl_reverse), self.base])
        w.writerow(["chernoff", "", repr(self.chernoff), self.base])
        for k, v in self.bc.items():
            w.writerow(["bc", k, repr(v), ""])
        for k, v in self.d_b.items():
            w.writerow(["d_b", k, repr(v), self.base])
        return buf.getvalue()


def exponent_report(pair: HypothesisPair, nus: Iterable[NuLike] = (1, 1.5, 2)) -> ExponentReport:
    p0, p1 = pair.p0, pair.p1
    c = chernoff_information(p0, p1)
    report = ExponentReport(kl_divergence(p0, p1), kl_divergence(p1, p0), c.value, c.lambda_star)
    for nu in nus:
        key = format_nu(_finite_nu(nu))
        report.bc[key] = skewed_bhattacharyya(nu, p0, p1)
        report.d_b[key] = d_b_nu(nu, p0, p1)
    return report


# ---------------------------------------------------------------------------
# relative typical sets


@dataclass(frozen=True)
class TypicalSetSpec:
    """Sequences whose per-symbol log2 likelihood ratio is within ``epsilon_prime`` of ``center``.

    ``center`` defaults to D(p0 || p1) of the pair the typical set is built for.
    """

    epsilon_prime: float
    n: int
    center: float | None = None

    def __post_init__(self):
        if not self.epsilon_prime > 0:
            raise ValidationError("epsilon_prime must be positive")
        if self.n < 1:
            raise ValidationError("n must be >= 1")

    def resolved_center(self, pair: HypothesisPair) -> float:
        return kl_divergence(pair.p0, pair.p1) if self.center is None else float(self.center)


def typical_mask(spec: TypicalSetSpec, pair: HypothesisPair, cap: int = DEFAULT_TYPE_CAP) -> np.ndarray:
    tt = type_table(pair.alphabet_size, spec.n, cap)
    center = spec.resolved_center(pair)
    with np.errstate(invalid="ignore"):
        return np.abs(tt.log_ratio(pair) / spec.n - center) <= spec.epsilon_prime


def typical_set(spec: TypicalSetSpec, pair: HypothesisPair, cap: int = DEFAULT_TYPE_CAP) -> list[TypeClass]:
    """Member type classes of the relative typical set."""
    mask = typical_mask(spec, pair, cap)
    classes = type_table(pair.alphabet_size, spec.n, cap).classes(pair)
    return [tc for tc, inside in zip(classes, mask) if inside]


def typical_set_probability(spec: TypicalSetSpec, pair: HypothesisPair, hypothesis: int = 0,
                            cap: int = DEFAULT_TYPE_CAP) -> float:
    tt = type_table(pair.alphabet_size, spec.n, cap)
    dist = pair.p0 if hypothesis == 0 else pair.p1
    mask = typical_mask(spec, pair, cap)
    return float(2.0 ** logsumexp2(tt.log_weights(dist)[mask]))


def aep_test(epsilon_prime: float, n: int, pair: HypothesisPair, nu: NuLike | None = None,
             cap: int = DEFAULT_TYPE_CAP) -> RandomizedTest:
    """Deterministic test accepting H0 exactly on the relative typical set.

    With a finite ``nu > 1`` the slack is shrunk to ``epsilon_prime * (nu-1)/nu``
    so that ``alpha_nu <= epsilon_prime`` once the set carries enough mass.
    """
    slack = float(epsilon_prime)
    params = {"epsilon_prime": slack}
    if nu is not None:
        nu_p = as_nu(nu)
        params["nu"] = nu_p.to_json()
        if not (nu_p.is_infinite or nu_p.is_log_loss):
            slack *= nu_p.exponent
    spec = TypicalSetSpec(slack, n)
    center = spec.resolved_center(pair)
    params.update({"slack": slack, "center": center})
    mask = typical_mask(spec, pair, cap)
    logodds = np.where(mask, np.inf, -np.inf)
    return RandomizedTest(TestKind.AEP, n, pair.alphabet_size, logodds, params)


def typical_accept_mass(test: RandomizedTest, epsilon_prime: float, pair: HypothesisPair) -> float:
    """H0-probability of accepting while inside the relative typical set.

    That is the sum over typical x^n of ``p0(x^n) * delta(x^n, 0)``. Any test
    with ``alpha_nu <= epsilon_prime`` keeps this at ``1 - 2 epsilon_prime`` or
    more once the set itself has H0-mass ``1 - epsilon_prime``.
    """
    spec = TypicalSetSpec(epsilon_prime, test.n)
    tt = type_table(pair.alphabet_size, test.n)
    mask = typical_mask(spec, pair)
    log_w0 = tt.log_weights(pair.p0)
    with np.errstate(divide="ignore"):
        terms = log_w0 + np.log2(test.accept_probs())
    return float(2.0 ** logsumexp2(terms[mask]))
