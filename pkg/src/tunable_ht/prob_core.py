"""Finite distributions, i.i.d. products and type-class enumeration.

Every test in this package depends on an observation only through its symbol
counts, so exact sums over the ``k**n`` sequences of length ``n`` collapse to
sums over the ``C(n+k-1, k-1)`` type classes, each weighted by its exact
multinomial multiplicity.

Log-probabilities are base 2. A zero probability is stored as ``-inf`` with the
conventions ``0 * log 0 = 0`` and ``log(c / 0) = +inf``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import ResourceError, ValidationError
from .logspace import logsumexp2

DEFAULT_TYPE_CAP = 10**7
FULL_ENUMERATION_MAX_N = 8

_NORMALIZATION_TOL = 1e-12


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over ``{0, ..., alphabet_size - 1}`` kept in log2 space."""

    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=float)
        if lp.ndim != 1 or lp.size < 2:
            raise ValidationError("a distribution needs at least 2 symbols")
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise ValidationError("log-probabilities must be finite or -inf")
        if np.any(lp > 1e-12):
            raise ValidationError("log-probabilities must be <= 0")
        total = logsumexp2(lp)
        if not abs(total) * math.log(2) <= _NORMALIZATION_TOL:
            raise ValidationError(f"probabilities sum to 2**{total!r}, not 1")
        object.__setattr__(self, "log_probs", _frozen(np.minimum(lp, 0.0)))

    @classmethod
    def from_log_probs(cls, log_probs: Sequence[float]) -> "Distribution":
        return cls(np.asarray(log_probs, dtype=float))

    @property
    def alphabet_size(self) -> int:
        return int(self.log_probs.size)

    @property
    def probs(self) -> np.ndarray:
        return np.exp2(self.log_probs)

    @property
    def support(self) -> np.ndarray:
        return self.log_probs > -np.inf

    def same_as(self, other: "Distribution", atol: float = 0.0) -> bool:
        if self.alphabet_size != other.alphabet_size:
            return False
        return bool(np.allclose(self.probs, other.probs, rtol=0.0, atol=atol))

    def to_dict(self) -> dict:
        return {"probs": [float(p) for p in self.probs]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, payload: dict) -> "Distribution":
        if "probs" not in payload:
            raise ValidationError('distribution JSON needs a "probs" array')
        return make_distribution(payload["probs"])

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        probs = ", ".join(f"{p:.6g}" for p in self.probs)
        return f"Distribution([{probs}])"


def make_distribution(weights: Sequence[float]) -> Distribution:
    """Normalize non-negative ``weights`` into a :class:`Distribution`."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValidationError("need at least 2 weights")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    total = math.fsum(w)
    if total <= 0:
        raise ValidationError("weights must not all be zero")
    with np.errstate(divide="ignore"):
        lp = np.log2(w) - math.log2(total)
    return Distribution(lp)


@dataclass(frozen=True, eq=False)
class HypothesisPair:
    """Null ``p0`` and alternative ``p1`` single-letter laws plus optional prior."""

    p0: Distribution
    p1: Distribution
    prior: tuple[float, float] | None = None

    def __post_init__(self):
        if self.p0.alphabet_size != self.p1.alphabet_size:
            raise ValidationError(
                f"alphabet mismatch: {self.p0.alphabet_size} vs {self.p1.alphabet_size}"
            )
        if self.prior is not None:
            pi0, pi1 = (float(v) for v in self.prior)
            if not (0.0 <= pi0 <= 1.0 and 0.0 <= pi1 <= 1.0):
                raise ValidationError("prior probabilities must lie in [0, 1]")
            if abs(pi0 + pi1 - 1.0) > 1e-12:
                raise ValidationError(f"prior sums to {pi0 + pi1!r}, not 1")
            object.__setattr__(self, "prior", (pi0, pi1))

    @property
    def alphabet_size(self) -> int:
        return self.p0.alphabet_size

    @property
    def log_ratio(self) -> np.ndarray:
        """Per-symbol log2(p0/p1) with +/-inf where one side vanishes, nan where both do."""
        with np.errstate(invalid="ignore"):
            return self.p0.log_probs - self.p1.log_probs

    def with_prior(self, pi0: float, pi1: float | None = None) -> "HypothesisPair":
        if pi1 is None:
            pi1 = 1.0 - pi0
        return HypothesisPair(self.p0, self.p1, (pi0, pi1))

    def require_prior(self) -> tuple[float, float]:
        if self.prior is None:
            raise ValidationError("this operation needs a prior (pi0, pi1)")
        return self.prior


def bernoulli(theta: float) -> Distribution:
    """Bernoulli law with symbol 1 ("success") having probability ``theta``."""
    return make_distribution([1.0 - theta, theta])


# ---------------------------------------------------------------------------
# type classes


@dataclass(frozen=True)
class TypeClass:
    counts: tuple[int, ...]
    multiplicity: int
    log_prob_under: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return sum(self.counts)


def count_type_classes(alphabet_size: int, n: int) -> int:
    return math.comb(n + alphabet_size - 1, alphabet_size - 1)


def multinomial(counts: Sequence[int]) -> int:
    out, running = 1, 0
    for c in counts:
        running += c
        out *= math.comb(running, c)
    return out


def _compositions(n: int, k: int) -> Iterator[tuple[int, ...]]:
    # stars and bars; yields lexicographically decreasing first count
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(n + k - 2 - prev)
        yield tuple(parts)


@dataclass(frozen=True, eq=False)
class TypeTable:
    """Vectorized view of all type classes of length ``n``.

    Rows of ``counts`` are in a fixed canonical order; every per-type array in
    the package (test probabilities, weights, likelihood ratios) follows it.
    """

    alphabet_size: int
    n: int
    counts: np.ndarray
    multiplicities: tuple[int, ...]
    log2_multiplicity: np.ndarray
    _index: dict = field(repr=False, default_factory=dict)

    def __len__(self):
        return int(self.counts.shape[0])

    def index_of(self, counts: Sequence[int]) -> int:
        key = tuple(int(c) for c in counts)
        if len(key) != self.alphabet_size:
            raise ValidationError(
                f"counts length {len(key)} does not match alphabet size {self.alphabet_size}"
            )
        if not self._index:
            self._index.update({tuple(row): i for i, row in enumerate(self.counts.tolist())})
        try:
            return self._index[key]
        except KeyError:
            raise ValidationError(f"{key} is not a type of length {self.n}") from None

    def log_seq_prob(self, dist: Distribution) -> np.ndarray:
        """log2 probability of one representative sequence of each type."""
        if dist.alphabet_size != self.alphabet_size:
            raise ValidationError("alphabet mismatch")
        with np.errstate(invalid="ignore"):
            terms = np.where(self.counts > 0, self.counts * dist.log_probs, 0.0)
        return terms.sum(axis=1)

    def log_weights(self, dist: Distribution) -> np.ndarray:
        """log2 of the probability of each whole type class."""
        return self.log2_multiplicity + self.log_seq_prob(dist)

    def log_ratio(self, pair: HypothesisPair) -> np.ndarray:
        """Per-type sequence log2 likelihood ratio; nan where both laws vanish."""
        with np.errstate(invalid="ignore"):
            return self.log_seq_prob(pair.p0) - self.log_seq_prob(pair.p1)

    def classes(self, pair: HypothesisPair | None = None) -> list[TypeClass]:
        if pair is None:
            return [
                TypeClass(tuple(row), m) for row, m in zip(self.counts.tolist(), self.multiplicities)
            ]
        l0, l1 = self.log_seq_prob(pair.p0), self.log_seq_prob(pair.p1)
        return [
            TypeClass(tuple(row), m, (float(a), float(b)))
            for row, m, a, b in zip(self.counts.tolist(), self.multiplicities, l0, l1)
        ]


@lru_cache(maxsize=64)
def _build_type_table(alphabet_size: int, n: int) -> TypeTable:
    rows = list(_compositions(n, alphabet_size))
    fact = [1] * (n + 1)
    for i in range(2, n + 1):
        fact[i] = fact[i - 1] * i
    mults = tuple(fact[n] // math.prod(fact[c] for c in r) for r in rows)
    counts = np.array(rows, dtype=np.int64)
    counts.setflags(write=False)
    return TypeTable(
        alphabet_size=alphabet_size,
        n=n,
        counts=counts,
        multiplicities=mults,
        log2_multiplicity=_frozen([math.log2(m) for m in mults]),
    )


def type_table(alphabet_size: int, n: int, cap: int = DEFAULT_TYPE_CAP) -> TypeTable:
    if alphabet_size < 2:
        raise ValidationError("alphabet_size must be >= 2")
    if n < 1:
        raise ValidationError("n must be >= 1")
    total = count_type_classes(alphabet_size, n)
    if total > cap:
        raise ResourceError(
            f"{total} type classes for alphabet {alphabet_size}, n={n} exceeds cap {cap}",
            count=total,
        )
    return _build_type_table(alphabet_size, n)


def enumerate_type_classes(
    alphabet_size: int, n: int, pair: HypothesisPair | None = None, cap: int = DEFAULT_TYPE_CAP
) -> list[TypeClass]:
    """All compositions of ``n`` into ``alphabet_size`` parts with exact multiplicities."""
    return type_table(alphabet_size, n, cap).classes(pair)


def seq_log_likelihood_ratio(pair: HypothesisPair, counts: Sequence[int]) -> float:
    """log2(p0(x^n) / p1(x^n)) for any sequence with symbol counts ``counts``."""
    c = np.asarray(counts)
    if c.ndim != 1 or c.size != pair.alphabet_size:
        raise ValidationError(
            f"counts length {c.size} does not match alphabet size {pair.alphabet_size}"
        )
    if np.any(c < 0):
        raise ValidationError("counts must be non-negative")
    used = c > 0
    lp0, lp1 = pair.p0.log_probs[used], pair.p1.log_probs[used]
    if np.any((lp0 == -np.inf) & (lp1 == -np.inf)):
        raise ValidationError("an observed symbol has zero probability under both hypotheses")
    zero0, zero1 = np.any(lp0 == -np.inf), np.any(lp1 == -np.inf)
    if zero0 and zero1:
        raise ValidationError("sequence has zero probability under both hypotheses")
    if zero0:
        return -math.inf
    if zero1:
        return math.inf
    return float(np.dot(c[used], lp0 - lp1))


def sample_iid(dist: Distribution, n: int, seed: int) -> np.ndarray:
    """``n`` i.i.d. symbols from ``dist``; deterministic given ``seed``."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    rng = np.random.default_rng(seed)
    probs = dist.probs
    return rng.choice(dist.alphabet_size, size=n, p=probs / probs.sum())


def enumerate_sequences(alphabet_size: int, n: int) -> Iterator[tuple[int, ...]]:
    """Every sequence in ``X^n``; the brute-force cross-check path."""
    if n > FULL_ENUMERATION_MAX_N and alphabet_size ** n > 10**6:
        raise ResourceError(f"{alphabet_size}**{n} sequences is too many to enumerate",
                            count=alphabet_size ** n)
    return itertools.product(range(alphabet_size), repeat=n)


def sequence_counts(seq: Sequence[int], alphabet_size: int) -> tuple[int, ...]:
    return tuple(np.bincount(np.asarray(seq, dtype=np.int64), minlength=alphabet_size).tolist())
