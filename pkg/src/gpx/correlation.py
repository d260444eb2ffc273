"""Stationary correlation models and numerical checks of their regularity.

Three families are supported:

* powered-exponential, ``r(t) = exp(-C |t|^alpha)``;
* generalized Cauchy, ``r(t) = (1 + C' |t|^alpha)^(-gamma)``, whose local
  scale is ``C = gamma * C'`` and whose decay exponent is ``alpha * gamma``;
* tabulated, a user table ``(t, r)`` with linear interpolation.

Every model carries the local exponent ``alpha`` and scale ``C`` of the
expansion ``r(t) = 1 - C |t|^alpha + o(|t|^alpha)`` and a declared decay
exponent ``lam`` for ``r(t) = O(t^-lam)``.  The ``validate_*`` functions check
these declarations on sampled points; they never prove anything.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "CorrelationModel",
    "DecayReport",
    "DomainError",
    "LocalReport",
    "cauchy",
    "evaluate",
    "load_table",
    "powered_exponential",
    "tabulated",
    "validate_decay",
    "validate_local",
]

FAMILIES = ("powered-exponential", "cauchy", "tabulated")


class DomainError(ValueError):
    """Argument outside the domain on which a quantity is defined."""


@dataclass(frozen=True, eq=False)
class CorrelationModel:
    """Immutable description of a stationary correlation function.

    Use the factories :func:`powered_exponential`, :func:`cauchy` and
    :func:`tabulated` rather than the constructor.
    """

    family: str
    C: float
    alpha: float
    lam: float
    params: dict = field(default_factory=dict)
    table_t: np.ndarray | None = None
    table_r: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown correlation family {self.family!r}")
        if not 0.0 < self.alpha <= 2.0:
            # alpha = 0 is degenerate for every u^(2/alpha) scale and is rejected.
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.C <= 0 or self.lam <= 0:
            raise DomainError("C and lam must be positive")

    @property
    def t_max(self) -> float:
        """Largest lag at which the model can be evaluated."""
        if self.family == "tabulated":
            return float(self.table_t[-1])
        return np.inf

    def __call__(self, t):
        return evaluate(self, t)

    def one_minus(self, t):
        """``1 - r(t)`` computed without cancellation for small ``|t|``."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.family == "powered-exponential":
            return -np.expm1(-self.C * t**self.alpha)
        if self.family == "cauchy":
            x = self.params["c_prime"] * t**self.alpha
            return -np.expm1(-self.params["gamma"] * np.log1p(x))
        return 1.0 - evaluate(self, t)

    def describe(self) -> dict:
        out = {"family": self.family, "C": self.C, "alpha": self.alpha, "lambda": self.lam}
        out.update(self.params)
        if self.family == "tabulated":
            out["table_points"] = int(self.table_t.size)
        return out


def powered_exponential(C: float = 1.0, alpha: float = 1.0, lam: float = 1.0) -> CorrelationModel:
    """``r(t) = exp(-C |t|^alpha)``; decays faster than any power, so any ``lam`` holds."""
    return CorrelationModel("powered-exponential", float(C), float(alpha), float(lam))


def cauchy(c_prime: float, alpha: float, gamma: float, C: float | None = None,
           lam: float | None = None) -> CorrelationModel:
    """Generalized Cauchy model ``(1 + c_prime |t|^alpha)^(-gamma)``.

    ``C`` and ``lam`` default to the true values ``gamma * c_prime`` and
    ``alpha * gamma``; passing other values declares them (possibly wrongly),
    which the validators are meant to catch.
    """
    if c_prime <= 0 or gamma <= 0:
        raise DomainError("c_prime and gamma must be positive")
    C = gamma * c_prime if C is None else C
    lam = alpha * gamma if lam is None else lam
    return CorrelationModel("cauchy", float(C), float(alpha), float(lam),
                            params={"c_prime": float(c_prime), "gamma": float(gamma)})


def tabulated(t, r, C: float, alpha: float, lam: float = 1.0) -> CorrelationModel:
    """Correlation given by a table and linear interpolation.

    ``t`` must be strictly increasing from 0 and ``r[0]`` must equal 1.
    """
    t = np.array(t, dtype=float)
    r = np.array(r, dtype=float)
    if t.ndim != 1 or t.shape != r.shape or t.size < 2:
        raise ValueError("table needs two equal-length columns with at least two rows")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("table t must start at 0 and be strictly increasing")
    if r[0] != 1.0:
        raise ValueError("table must have r(0) = 1")
    if np.any(np.abs(r) > 1.0):
        raise ValueError("table values must satisfy |r| <= 1")
    t.setflags(write=False)
    r.setflags(write=False)
    return CorrelationModel("tabulated", float(C), float(alpha), float(lam),
                            table_t=t, table_r=r)


def load_table(path, C: float, alpha: float, lam: float = 1.0) -> CorrelationModel:
    """Read a two-column CSV ``t,r`` (with header) into a tabulated model."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise ValueError(f"{path}: expected a header and at least two data rows")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed table row ({exc})") from None
    return tabulated(data[:, 0], data[:, 1], C=C, alpha=alpha, lam=lam)


def evaluate(model: CorrelationModel, t):
    """Evaluate ``r(|t|)``; scalar in, float out, array in, array out."""
    arr = np.abs(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise DomainError("correlation lag must be finite")
    if model.family == "powered-exponential":
        out = np.exp(-model.C * arr**model.alpha)
    elif model.family == "cauchy":
        out = (1.0 + model.params["c_prime"] * arr**model.alpha) ** (-model.params["gamma"])
    else:
        if np.any(arr > model.t_max):
            raise DomainError(f"lag {arr.max():g} outside tabulated range [0, {model.t_max:g}]")
        out = np.interp(arr, model.table_t, model.table_r)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LocalReport:
    t: np.ndarray
    ratios: np.ndarray
    tol: float
    passed: bool


def validate_local(model: CorrelationModel, t_sequence, tol: float = 1e-2) -> LocalReport:
    """Check ``(1 - r(t)) / (C t^alpha) -> 1`` along a sequence decreasing to 0.

    The verdict uses only the last (smallest) ``t``; the tolerance is a choice,
    since the expansion's remainder comes with no rate.
    """
    t = np.asarray(t_sequence, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("t_sequence must not be empty")
    if np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise ValueError("t_sequence must be positive and strictly decreasing")
    ratios = model.one_minus(t) / (model.C * t**model.alpha)
    return LocalReport(t, ratios, tol, bool(abs(ratios[-1] - 1.0) <= tol))


@dataclass(frozen=True)
class DecayReport:
    lam: float
    t: np.ndarray
    scaled: np.ndarray
    sup: float
    t_at_sup: float
    monotone_tail: bool
    r_star: float

    @property
    def bounded(self) -> bool:
        """Sampled evidence that ``|r(t)| t^lam`` stays bounded."""
        return self.monotone_tail and self.t_at_sup < self.t[-1]


def validate_decay(model: CorrelationModel, lam: float | None = None, t_max: float = 100.0,
                   n_points: int = 200) -> DecayReport:
    """Sample ``|r(t)| t^lam`` on ``n_points`` log-spaced points of ``[1, t_max]``.

    ``monotone_tail`` holds when the scaled values never increase over the last
    quarter of the sample; together with the supremum not sitting at ``t_max``
    this is the (sampled, not proven) boundedness verdict.  ``r_star`` is the
    largest ``|r|`` seen, which must stay below 1.
    """
    if t_max <= 1:
        raise ValueError("t_max must exceed 1")
    lam = model.lam if lam is None else float(lam)
    t = np.logspace(0.0, np.log10(t_max), int(n_points))
    t_eval = np.minimum(t, model.t_max) if model.family == "tabulated" else t
    r = np.abs(np.asarray(evaluate(model, t_eval)))
    scaled = r * t**lam
    k = int(np.argmax(scaled))
    tail = scaled[-max(2, len(t) // 4):]
    monotone = bool(np.all(np.diff(tail) <= 1e-12 * max(1.0, tail.max())))
    return DecayReport(lam, t, scaled, float(scaled[k]), float(t[k]), monotone, float(r.max()))
