"""Randomized tests, their exact nu-errors, threshold calibration and Bayes tests.

A randomized test of length ``n`` is stored as one number per type class: the
natural log-odds ``ln(delta(x^n, 0) / delta(x^n, 1))`` of accepting H0. That
keeps both tails of the acceptance probability accurate, which matters when
the type II error of a good test is ``2**-100``.

Every closed-form test depends on ``x^n`` only through the log-likelihood
ratio ``log2 p0(x^n) - log2 p1(x^n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .logspace import LN2, logsumexp2
from .nu_loss import NuLike, NuParam, as_nu, log_nu_loss_from_logodds
from .prob_core import DEFAULT_TYPE_CAP, HypothesisPair, TypeTable, type_table


def _exp2(x: float) -> float:
    try:
        return 2.0 ** x
    except OverflowError:
        return math.inf


class TestKind(str, Enum):
    NU_MP = "nu_mp"
    INFTY_MP = "infty_mp"
    NU_BAYES = "nu_bayes"
    INFTY_BAYES = "infty_bayes"
    AEP = "aep"
    TABLE = "table"

    __test__ = False  # keep pytest from collecting this

    @property
    def deterministic(self) -> bool:
        return self in (TestKind.INFTY_MP, TestKind.INFTY_BAYES, TestKind.AEP)


@dataclass(frozen=True, eq=False)
class RandomizedTest:
    """A member of the set of randomized tests of length ``n``.

    ``logodds[i]`` refers to row ``i`` of ``type_table(alphabet_size, n)``.
    """

    __test__ = False

    kind: TestKind
    n: int
    alphabet_size: int
    logodds: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.array(self.logodds, dtype=float)
        if a.ndim != 1 or a.size != len(self.types):
            raise ValidationError("one log-odds value per type class is required")
        if np.any(np.isnan(a)):
            raise ValidationError("log-odds must not be nan")
        a.setflags(write=False)
        object.__setattr__(self, "logodds", a)
        object.__setattr__(self, "kind", TestKind(self.kind))

    @property
    def types(self) -> TypeTable:
        return type_table(self.alphabet_size, self.n)

    def reject_probs(self) -> np.ndarray:
        """delta(x^n, 1) for every type, in type-table order."""
        return _sigmoid(-self.logodds)

    def accept_probs(self) -> np.ndarray:
        return _sigmoid(self.logodds)

    def reject_prob(self, counts: Sequence[int]) -> float:
        return float(_sigmoid(-self.logodds[self.types.index_of(counts)]))

    def accept_prob(self, counts: Sequence[int]) -> float:
        return float(_sigmoid(self.logodds[self.types.index_of(counts)]))

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "n": self.n}
        out.update(self.params)
        if self.kind is TestKind.TABLE:
            out["alphabet_size"] = self.alphabet_size
            out["reject_probs"] = {
                ",".join(str(c) for c in row): float(r)
                for row, r in zip(self.types.counts.tolist(), self.reject_probs())
            }
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                       np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return out if out.ndim else float(out)


def table_test(reject_probs, n: int, alphabet_size: int) -> RandomizedTest:
    """Arbitrary randomized test from per-type rejection probabilities."""
    if isinstance(reject_probs, dict):
        tt = type_table(alphabet_size, n)
        r = np.full(len(tt), np.nan)
        for key, value in reject_probs.items():
            counts = key if isinstance(key, tuple) else tuple(int(c) for c in str(key).split(","))
            r[tt.index_of(counts)] = float(value)
        if np.any(np.isnan(r)):
            raise ValidationError("table test is missing some type classes")
    else:
        r = np.asarray(reject_probs, dtype=float)
    if np.any(np.isnan(r)) or np.any(r < 0) or np.any(r > 1):
        raise ValidationError("rejection probabilities must lie in [0, 1]")
    # logit of acceptance, computed from the rejection side to keep small r exact
    with np.errstate(divide="ignore"):
        logodds = np.log1p(-r) - np.log(r)
    return RandomizedTest(TestKind.TABLE, n, alphabet_size, logodds)


def constant_test(reject_prob: float, n: int, alphabet_size: int) -> RandomizedTest:
    size = len(type_table(alphabet_size, n))
    return table_test(np.full(size, float(reject_prob)), n, alphabet_size)


def _pair_types(pair: HypothesisPair, n: int, cap: int) -> tuple[TypeTable, np.ndarray]:
    tt = type_table(pair.alphabet_size, n, cap)
    return tt, tt.log_ratio(pair)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or math.isnan(lam):
        raise ValidationError(f"lambda must be positive, got {lam!r}")
    return lam


def _mp_logodds(nu: NuParam, log2_lam: float, llr: np.ndarray) -> np.ndarray:
    # accept odds (lambda * p0/p1)**nu, i.e. reject = 1 / (1 + 2**(nu * t)); kept as
    # log-odds so no clamping is needed. nan marks types null under both laws.
    with np.errstate(invalid="ignore"):
        t = nu.value * (log2_lam + llr)
    return np.where(np.isnan(t), 0.0, t) * LN2


def _log2_lambda_from(lam: float | None, log2_lam: float | None) -> float:
    if log2_lam is not None:
        if math.isnan(log2_lam) or math.isinf(log2_lam):
            raise ValidationError("log2 lambda must be finite")
        return float(log2_lam)
    return math.log2(_check_lambda(lam))


def nu_mp_test(nu: NuLike, lam: float | None, pair: HypothesisPair, n: int, *,
               log2_lam: float | None = None, cap: int = DEFAULT_TYPE_CAP) -> RandomizedTest:
    """Closed-form most powerful randomized test for finite ``nu``.

    Rejects with probability ``lam**-nu p0**-nu / (p1**-nu + lam**-nu p0**-nu)``.
    ``log2_lam`` may replace ``lam`` when the threshold is outside float range.
    """
    nu = as_nu(nu)
    if nu.is_infinite:
        raise ValidationError("nu_mp_test needs finite nu; use infty_mp_test")
    l2 = _log2_lambda_from(lam, log2_lam)
    _, llr = _pair_types(pair, n, cap)
    return RandomizedTest(TestKind.NU_MP, n, pair.alphabet_size, _mp_logodds(nu, l2, llr),
                          {"nu": nu.to_json(), "lambda": _exp2(l2), "log2_lambda": l2})


def infty_mp_test(lam: float | None, pair: HypothesisPair, n: int, *,
                  log2_lam: float | None = None, cap: int = DEFAULT_TYPE_CAP) -> RandomizedTest:
    """Likelihood-ratio test: reject iff ``p0(x^n)/p1(x^n) <= lam`` (ties reject)."""
    l2 = _log2_lambda_from(lam, log2_lam)
    _, llr = _pair_types(pair, n, cap)
    with np.errstate(invalid="ignore"):
        reject = llr <= l2
    logodds = np.where(reject, -np.inf, np.inf)
    return RandomizedTest(TestKind.INFTY_MP, n, pair.alphabet_size, logodds,
                          {"nu": "inf", "lambda": _exp2(l2), "log2_lambda": l2})


def mp_test(nu: NuLike, lam: float | None, pair: HypothesisPair, n: int, **kwargs) -> RandomizedTest:
    nu = as_nu(nu)
    if nu.is_infinite:
        return infty_mp_test(lam, pair, n, **kwargs)
    return nu_mp_test(nu, lam, pair, n, **kwargs)


# ---------------------------------------------------------------------------
# exact errors


@dataclass(frozen=True)
class ErrorPair:
    alpha: float
    beta_bar: float
    nu: NuParam
    n: int

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta_bar": self.beta_bar, "nu": self.nu.to_json(), "n": self.n}


@dataclass(frozen=True)
class BayesRiskReport:
    risk: float
    alpha: float
    beta_bar: float
    prior: tuple[float, float]

    def to_dict(self) -> dict:
        return {"risk": self.risk, "alpha": self.alpha, "beta_bar": self.beta_bar,
                "prior": list(self.prior)}


def _check_compatible(test: RandomizedTest, pair: HypothesisPair) -> None:
    if test.alphabet_size != pair.alphabet_size:
        raise ValidationError("test and hypothesis pair use different alphabets")


def log2_expected_loss(test: RandomizedTest, pair: HypothesisPair, nu: NuLike,
                       hypothesis: int) -> float:
    """log2 of the exact nu-risk of ``test`` under H0 (``hypothesis=0``) or H1.

    Under H0 the correct action is "accept", so this is ``log2 alpha_nu``;
    under H1 it is ``log2 beta_bar_nu``.
    """
    _check_compatible(test, pair)
    nu = as_nu(nu)
    tt = test.types
    if hypothesis == 0:
        log_w, correct = tt.log_weights(pair.p0), test.logodds
    elif hypothesis == 1:
        log_w, correct = tt.log_weights(pair.p1), -test.logodds
    else:
        raise ValidationError("hypothesis must be 0 or 1")
    live = log_w > -np.inf
    if not np.any(live):
        return -math.inf
    log_loss = log_nu_loss_from_logodds(nu, correct[live]) / LN2
    return float(logsumexp2(log_w[live] + log_loss))


def nu_type1_error(test: RandomizedTest, pair: HypothesisPair, nu: NuLike) -> float:
    """alpha_nu = nu/(nu-1) (1 - E_0[delta(X^n, 0)^((nu-1)/nu)]), exactly via type classes."""
    return 2.0 ** log2_expected_loss(test, pair, nu, 0)


def nu_type2_error(test: RandomizedTest, pair: HypothesisPair, nu: NuLike) -> float:
    """beta_bar_nu = nu/(nu-1) (1 - E_1[delta(X^n, 1)^((nu-1)/nu)]), exactly via type classes."""
    return 2.0 ** log2_expected_loss(test, pair, nu, 1)


def classical_type2_error(test: RandomizedTest, pair: HypothesisPair) -> float:
    """1 - E_1[delta(X^n, 1)], the un-tuned type II error."""
    return nu_type2_error(test, pair, math.inf)


def error_pair(test: RandomizedTest, pair: HypothesisPair, nu: NuLike) -> ErrorPair:
    nu = as_nu(nu)
    return ErrorPair(nu_type1_error(test, pair, nu), nu_type2_error(test, pair, nu), nu, test.n)


def bayes_risk(nu: NuLike, test: RandomizedTest, pair: HypothesisPair) -> BayesRiskReport:
    """nu-Bayesian error ``pi0 * alpha_nu + pi1 * beta_bar_nu`` with its components."""
    pi0, pi1 = pair.require_prior()
    ep = error_pair(test, pair, nu)
    # 0 * inf is taken as 0: a zero-prior hypothesis contributes nothing
    risk = (pi0 * ep.alpha if pi0 else 0.0) + (pi1 * ep.beta_bar if pi1 else 0.0)
    return BayesRiskReport(risk, ep.alpha, ep.beta_bar, (pi0, pi1))


def log2_bayes_risk(nu: NuLike, test: RandomizedTest, pair: HypothesisPair) -> float:
    pi0, pi1 = pair.require_prior()
    parts = []
    if pi0 > 0:
        parts.append(math.log2(pi0) + log2_expected_loss(test, pair, nu, 0))
    if pi1 > 0:
        parts.append(math.log2(pi1) + log2_expected_loss(test, pair, nu, 1))
    return float(logsumexp2(parts))


# ---------------------------------------------------------------------------
# calibration


class Calibration(NamedTuple):
    lam: float
    achieved_alpha: float
    log2_lam: float
    test: RandomizedTest


def _alpha_at(nu: NuParam, log2_lam: float, tt: TypeTable, llr: np.ndarray,
              log_w0: np.ndarray) -> float:
    correct = _mp_logodds(nu, log2_lam, llr)
    live = log_w0 > -np.inf
    log_loss = log_nu_loss_from_logodds(nu, correct[live]) / LN2
    return float(2.0 ** logsumexp2(log_w0[live] + log_loss))


def calibrate_lambda(nu: NuLike, epsilon: float, pair: HypothesisPair, n: int, *,
                     max_iter: int = 200, tol: float = 1e-12,
                     cap: int = DEFAULT_TYPE_CAP) -> Calibration:
    """Threshold ``lambda`` of the most powerful test of size ``epsilon``.

    Finite nu: bisection on ``log2 lambda``; ``alpha_nu`` is continuous and
    strictly decreasing in ``lambda`` so the achieved size matches
    ``epsilon`` to ``1e-9`` or better.

    nu = inf: ``alpha`` is a step function of ``lambda``. The largest
    threshold with ``alpha <= epsilon`` is returned, so the achieved size may
    fall short of ``epsilon``.
    """
    nu = as_nu(nu)
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    tt, llr = _pair_types(pair, n, cap)
    log_w0 = tt.log_weights(pair.p0)
    if nu.is_infinite:
        return _calibrate_deterministic(epsilon, pair, n, llr, log_w0, cap)

    finite = llr[np.isfinite(llr)]
    span = float(np.max(np.abs(finite))) if finite.size else 0.0
    margin = 64.0 / nu.value + 8.0
    lo, hi = -span - margin, span + margin
    f_lo = _alpha_at(nu, lo, tt, llr, log_w0) - epsilon
    f_hi = _alpha_at(nu, hi, tt, llr, log_w0) - epsilon
    for _ in range(60):
        if f_lo > 0 and f_hi <= 0:
            break
        if f_lo <= 0:
            lo -= 2.0 * (hi - lo)
            f_lo = _alpha_at(nu, lo, tt, llr, log_w0) - epsilon
        if f_hi > 0:
            hi += 2.0 * (hi - lo)
            f_hi = _alpha_at(nu, hi, tt, llr, log_w0) - epsilon
    else:
        raise NumericError("could not bracket the size constraint",
                           {"log2_lambda_lo": lo, "log2_lambda_hi": hi,
                            "alpha_lo": f_lo + epsilon, "alpha_hi": f_hi + epsilon})

    mid, f_mid = hi, f_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = _alpha_at(nu, mid, tt, llr, log_w0) - epsilon
        if abs(f_mid) <= tol:
            break
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.spacing(max(abs(lo), abs(hi), 1.0)):
            break
    if abs(f_mid) > 1e-9:
        raise NumericError(f"calibration did not reach size {epsilon} within 1e-9",
                           {"log2_lambda_lo": lo, "log2_lambda_hi": hi,
                            "alpha_mid": f_mid + epsilon, "iterations": max_iter})
    test = nu_mp_test(nu, None, pair, n, log2_lam=mid, cap=cap)
    return Calibration(_exp2(mid), nu_type1_error(test, pair, nu), mid, test)


def _group_levels(values: np.ndarray, rel: float = 1e-9) -> np.ndarray:
    """Sorted distinct values, merging those equal up to float noise; returns group maxima."""
    v = np.sort(values)
    if v.size == 0:
        return v
    tops = []
    start = v[0]
    for prev, cur in zip(v[:-1], v[1:]):
        if cur - prev > rel * max(1.0, abs(start)):
            tops.append(prev)
            start = cur
    tops.append(v[-1])
    return np.asarray(tops)


def _calibrate_deterministic(epsilon, pair, n, llr, log_w0, cap) -> Calibration:
    levels = _group_levels(llr[np.isfinite(llr)])
    live = (log_w0 > -np.inf) & ~np.isnan(llr)
    probs0 = np.exp2(log_w0[live])
    llr_live = llr[live]
    chosen = None
    for level in levels:
        alpha = math.fsum(probs0[llr_live <= level])
        if alpha <= epsilon:
            chosen = float(level)
        else:
            break
    if chosen is None:
        # even the smallest finite level is too big: reject only p0-null sequences
        chosen = float(levels[0]) - 1.0 if levels.size else 0.0
    test = infty_mp_test(None, pair, n, log2_lam=chosen, cap=cap)
    return Calibration(_exp2(chosen), nu_type1_error(test, pair, math.inf), chosen, test)


# ---------------------------------------------------------------------------
# Bayes tests


def bayes_test(nu: NuLike, pair: HypothesisPair, n: int, *,
               cap: int = DEFAULT_TYPE_CAP) -> RandomizedTest:
    """Minimum nu-Bayesian-error test.

    Finite nu accepts H0 with probability ``post0**nu / (post0**nu + post1**nu)``
    (the posterior itself at nu = 1). For nu = inf it accepts iff
    ``post0 >= post1``, ties accepting.
    """
    nu = as_nu(nu)
    pi0, pi1 = pair.require_prior()
    if not (pi0 > 0 and pi1 > 0):
        raise ValidationError("bayes_test needs pi0, pi1 > 0")
    _, llr = _pair_types(pair, n, cap)
    # posterior log-odds in bits
    with np.errstate(invalid="ignore"):
        post = math.log2(pi0) - math.log2(pi1) + llr
    params = {"nu": nu.to_json(), "prior": [pi0, pi1]}
    if nu.is_infinite:
        with np.errstate(invalid="ignore"):
            accept = post >= 0
        return RandomizedTest(TestKind.INFTY_BAYES, n, pair.alphabet_size,
                              np.where(accept, np.inf, -np.inf), params)
    return RandomizedTest(TestKind.NU_BAYES, n, pair.alphabet_size,
                          _mp_logodds(nu, math.log2(pi0) - math.log2(pi1), llr), params)


# ---------------------------------------------------------------------------
# serialization


def test_from_dict(payload: dict, pair: HypothesisPair | None = None) -> RandomizedTest:
    """Rebuild a test from :meth:`RandomizedTest.to_dict` output."""
    kind = TestKind(payload["kind"])
    n = int(payload["n"])
    if kind is TestKind.TABLE:
        size = int(payload.get("alphabet_size", pair.alphabet_size if pair else 0))
        return table_test(payload["reject_probs"], n, size)
    if pair is None:
        raise ValidationError(f"rebuilding a {kind.value} test needs the hypothesis pair")
    if kind is TestKind.NU_MP:
        return nu_mp_test(payload["nu"], None, pair, n, log2_lam=payload["log2_lambda"])
    if kind is TestKind.INFTY_MP:
        return infty_mp_test(None, pair, n, log2_lam=payload["log2_lambda"])
    if kind in (TestKind.NU_BAYES, TestKind.INFTY_BAYES):
        return bayes_test(payload["nu"], pair.with_prior(*payload["prior"]), n)
    from .exponents import aep_test

    return aep_test(payload["epsilon_prime"], n, pair, nu=payload.get("nu"))


test_from_dict.__test__ = False
