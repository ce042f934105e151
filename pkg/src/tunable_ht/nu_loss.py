"""The tunable nu-loss for randomized decisions.

For the probability ``p`` that a randomized rule assigns to the correct action::

    nu = 1          -log2 p                              (log-loss, in bits)
    1 < nu < inf    nu/(nu-1) * (1 - p**((nu-1)/nu))
    nu = inf        1 - p                                (soft 0-1 loss)
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError
from .logspace import LN2, log1mexp, log_softplus, softplus

# Finite nu in (1, 1 + NEAR_ONE_GAP) would make nu/(nu-1) cancel catastrophically.
NEAR_ONE_GAP = 1e-9


@dataclass(frozen=True)
class NuParam:
    """Tunable parameter ``nu`` in ``[1, inf]``; ``math.inf`` is the infinity variant."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v) or v < 1.0:
            raise ValidationError(f"nu must be >= 1, got {self.value!r}")
        if 1.0 < v < 1.0 + NEAR_ONE_GAP:
            raise ValidationError(
                f"nu={v!r} is too close to 1; use nu=1 exactly for the log-loss"
            )
        object.__setattr__(self, "value", v)

    @property
    def is_infinite(self) -> bool:
        return self.value == math.inf

    @property
    def is_log_loss(self) -> bool:
        return self.value == 1.0

    @property
    def exponent(self) -> float:
        """(nu - 1) / nu, the power applied to the correct-action probability."""
        if self.is_infinite:
            return 1.0
        return (self.value - 1.0) / self.value

    @property
    def scale(self) -> float:
        """nu / (nu - 1); also the supremum of the loss for finite nu > 1."""
        if self.is_infinite:
            return 1.0
        if self.is_log_loss:
            return math.inf
        return self.value / (self.value - 1.0)

    @property
    def max_loss(self) -> float:
        return self.scale

    def __str__(self):
        return format_nu(self)

    def to_json(self):
        return "inf" if self.is_infinite else self.value


INFINITY = NuParam(math.inf)

NuLike = Union[NuParam, float, int, str]


def as_nu(nu: NuLike) -> NuParam:
    """Coerce a number, ``"inf"`` or a :class:`NuParam` to a :class:`NuParam`."""
    if isinstance(nu, NuParam):
        return nu
    if isinstance(nu, str):
        text = nu.strip().lower()
        if text in {"inf", "infinity", "+inf", "∞"}:
            return INFINITY
        try:
            return NuParam(float(text))
        except ValueError:
            raise ValidationError(f"cannot parse nu from {nu!r}") from None
    if isinstance(nu, bool):
        raise ValidationError("nu must be a number")
    return NuParam(float(nu))


def format_nu(nu: NuLike) -> str:
    nu = as_nu(nu)
    if nu.is_infinite:
        return "inf"
    return repr(nu.value) if not nu.value.is_integer() else str(int(nu.value))


def nu_loss(nu: NuLike, p, base: str = "bits"):
    """nu-loss of a decision that puts probability ``p`` on the correct action.

    Accepts a scalar or an array; returns the same shape. ``+inf`` for
    ``nu = 1, p = 0``. ``base`` only affects the log-loss; ``"nats"`` gives
    ``-ln p``, the value the finite-nu losses tend to as nu decreases to 1.
    """
    nu = as_nu(nu)
    if base not in ("bits", "nats"):
        raise ValidationError(f"unknown base {base!r}")
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("p must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        if nu.is_infinite:
            out = 1.0 - arr
        elif nu.is_log_loss:
            out = -np.log2(arr) if base == "bits" else -np.log(arr)
        else:
            out = nu.scale * -np.expm1(nu.exponent * np.log(arr))
    out = out + 0.0  # normalizes -0.0
    return float(out) if out.ndim == 0 else out


def log_nu_loss_from_logodds(nu: NuLike, logodds) -> np.ndarray:
    """Natural log of the nu-loss when the correct action has probability sigmoid(logodds).

    ``logodds`` is ``ln(p / (1 - p))`` and may be +/-inf. Working from the
    log-odds keeps losses of order ``1e-300`` representable, which the exact
    error sums at large ``n`` rely on.
    """
    nu = as_nu(nu)
    a = np.asarray(logodds, dtype=float)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        if nu.is_infinite:
            return -softplus(a)
        if nu.is_log_loss:
            return log_softplus(-a) - math.log(LN2)
        gamma = nu.exponent
        z = gamma * softplus(-a)
        log_z = math.log(gamma) + log_softplus(-a)
        return math.log(nu.scale) + log1mexp(z, log_z)


@dataclass(frozen=True)
class LossCurveRow:
    nu: NuParam
    p: float
    loss: float


def loss_curve(nu_list: Iterable[NuLike], grid: int = 200) -> list[LossCurveRow]:
    """Tabulate :func:`nu_loss` on ``grid`` points ``p = 1/grid, 2/grid, ..., 1``."""
    if int(grid) != grid or grid < 2:
        raise ValidationError("grid must be an integer >= 2")
    nus = [as_nu(v) for v in nu_list]
    if not nus:
        raise ValidationError("nu_list is empty")
    ps = np.arange(1, int(grid) + 1) / int(grid)
    rows = []
    for nu in nus:
        for p, loss in zip(ps, nu_loss(nu, ps)):
            rows.append(LossCurveRow(nu, float(p), float(loss)))
    return rows


def loss_curve_csv(rows: Sequence[LossCurveRow], base: str = "bits") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["nu", "p", "loss"])
    for r in rows:
        loss = r.loss * LN2 if (base == "nats" and r.nu.is_log_loss) else r.loss
        writer.writerow([format_nu(r.nu), repr(r.p), repr(loss)])
    return buf.getvalue()
