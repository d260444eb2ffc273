"""Normal tails, supremum tail asymptotics and Pickands constants.

Pickands constants are estimated from the defining integral

    H_{alpha,k}(T) = int_{R^k} e^{sum w} P(sup_{[0,T]} min_i (sqrt2 B_i(t) - t^alpha - w_i) > 0) dw,

in which, for fixed paths, the ``w``-integral is the ``e^{sum w}`` measure of
the union over grid times of the orthants ``prod_i (-inf, Z_i(t))``.  That
measure is computed exactly by a staircase sweep for ``k <= 2`` and by
importance sampling with shifted-exponential proposals for ``k >= 3``.

Two Monte Carlo estimators are offered.  ``"direct"`` averages the measure
over plain fBm paths; its variance grows roughly like ``exp(2T)`` so it is
only usable for small ``T``.  ``"shifted"`` (default) is the same expectation
after the change of measure with density ``e^{sum_i Z_i(tau)}`` averaged over
a uniform grid time ``tau``: paths become ``sqrt2 B_i(t) + tau^alpha -
|t - tau|^alpha`` and each replicate contributes the bounded ratio of the
union measure to ``sum_t e^{sum_i Z_i(t)}``.  It is unbiased for the grid
version of ``H_{alpha,k}(T)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import comb, logsumexp, ndtr

from .correlation import DomainError
from .gaussim import GridSpec, fbm_blocks

__all__ = [
    "Extrapolation",
    "PickandsConstant",
    "PickandsEstimate",
    "TailEstimate",
    "classical_pickands",
    "normal_tail",
    "pickands_constant",
    "pickands_estimate",
    "pickands_extrapolate",
    "read_ladder_csv",
    "tail_asymptotic",
    "union_measure",
    "write_ladder_csv",
]

Z95 = 1.959963984540054


def normal_tail(u):
    """``Psi(u) = 1 - Phi(u)`` via the complementary error function."""
    out = ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def classical_pickands(alpha: float) -> float:
    """Closed-form ``H_alpha`` for the two classical cases ``alpha = 1`` and ``alpha = 2``."""
    if alpha == 1:
        return 1.0
    if alpha == 2:
        return 1.0 / math.sqrt(math.pi)
    raise ValueError(f"no closed form for H_alpha at alpha={alpha}")


def tail_asymptotic(u: float, n: int, r: int, alpha: float, C: float, H: float) -> float:
    """``C^(1/alpha) binom(n, rhat) H u^(2/alpha) Psi(u)^rhat`` with ``rhat = n - r + 1``."""
    if not u > 0:
        raise DomainError(f"tail asymptotics need u > 0, got {u}")
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    if H <= 0:
        raise ValueError("H must be positive")
    rhat = n - r + 1
    return float(C ** (1 / alpha) * comb(n, rhat, exact=True) * H * u ** (2 / alpha)
                 * normal_tail(u) ** rhat)


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo exceedance probability of ``sup_[0,1] X_{r:n}`` with its asymptotic value."""

    u: float
    p_hat: float
    se: float
    replicates: int
    theta: float
    mesh: float
    asymptotic_value: float | None
    ratio: float | None
    below_resolution: bool = False
    p_hat_refined: float | None = None
    se_refined: float | None = None
    stable: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


# ---------------------------------------------------------------------------
# union-of-orthants measure


def _sweep2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``e^{w1+w2}`` measure of the union of ``(-inf,a_j) x (-inf,b_j)``, row-wise.

    Rows are assumed shifted so that ``max_j (a_j + b_j)`` is moderate.
    """
    order = np.argsort(-a, axis=-1, kind="stable")
    A = np.take_along_axis(a, order, axis=-1)
    B = np.take_along_axis(b, order, axis=-1)
    top = np.maximum.accumulate(B, axis=-1)
    prev = np.concatenate([np.full(B.shape[:-1] + (1,), -np.inf), top[..., :-1]], axis=-1)
    gain = np.where(B > prev, -np.expm1(np.minimum(prev - B, 0.0)), 0.0)
    return np.sum(np.exp(A + B) * gain, axis=-1)


def _hit_fraction(Z: np.ndarray, draws: int, gen: np.random.Generator) -> float:
    """Fraction of ``w = max_t Z - Exp(1)`` draws inside the union; ``Z`` is ``(k, N)``."""
    m = Z.max(axis=1)
    w = m[None, :] - gen.standard_exponential((draws, Z.shape[0]))
    hit = np.zeros(draws, dtype=bool)
    # chunk over grid points to bound memory
    step = max(1, 2**20 // max(1, draws * Z.shape[0]))
    for j in range(0, Z.shape[1], step):
        blk = Z[:, j:j + step]
        hit |= np.all(w[:, :, None] < blk[None, :, :], axis=1).any(axis=1)
        if hit.all():
            break
    return float(hit.mean())


def union_measure(Z, method: str = "auto", draws: int = 256, gen=None) -> float:
    """``int e^{sum w} 1{exists t: w_i < Z_i(t) for all i} dw`` for one path set ``Z`` of shape ``(k, N)``.

    ``method`` is ``"exact"`` (k <= 2), ``"is"`` (any k) or ``"auto"``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    k = Z.shape[0]
    method = _union_method(method, k)
    if method == "exact":
        if k == 1:
            return float(np.exp(Z.max()))
        s = (Z[0] + Z[1]).max()
        return float(np.exp(s) * _sweep2(Z[0] - s, Z[1]))
    gen = np.random.default_rng() if gen is None else gen
    return float(np.exp(Z.max(axis=1).sum()) * _hit_fraction(Z, draws, gen))


def _union_method(method: str, k: int) -> str:
    if method == "auto":
        return "exact" if k <= 2 else "is"
    if method == "exact" and k > 2:
        raise NotImplementedError("exact union measure is only available for k <= 2")
    if method not in ("exact", "is"):
        raise ValueError(f"unknown union method {method!r}")
    return method


# ---------------------------------------------------------------------------
# Pickands estimation


@dataclass(frozen=True)
class PickandsEstimate:
    """Estimate of ``H_{alpha,k}(T) / T`` on a mesh of size at most ``theta``."""

    alpha: float
    k: int
    T: float
    value: float
    ci_half_width: float
    replicates: int
    theta: float
    mesh: float = float("nan")
    se: float = float("nan")
    estimator: str = "shifted"

    @property
    def h_T(self) -> float:
        """``H_{alpha,k}(T)`` itself."""
        return self.value * self.T


def _shifted_reducer(alpha, k, t, T, method, draws):
    N = t.size
    scale = N / T

    def reduce(paths, gen):
        b = paths.shape[0]
        tau = t[gen.integers(0, N, size=b)]
        drift = tau[:, None] ** alpha - np.abs(t[None, :] - tau[:, None]) ** alpha
        Z = math.sqrt(2.0) * paths + drift[:, None, :]
        S = Z.sum(axis=1)
        lse = logsumexp(S, axis=1)
        if k == 1:
            return scale * np.exp(S.max(axis=1) - lse)
        if method == "exact":
            s = S.max(axis=1, keepdims=True)
            return scale * _sweep2(Z[:, 0] - s, Z[:, 1]) / np.exp(lse - s[:, 0])
        out = np.empty(b)
        for i in range(b):
            m = Z[i].max(axis=1)
            out[i] = scale * np.exp(m.sum() - lse[i]) * _hit_fraction(Z[i], draws, gen)
        return out

    return reduce


def _direct_reducer(alpha, k, t, T, method, draws):
    drift = t**alpha

    def reduce(paths, gen):
        Z = math.sqrt(2.0) * paths - drift
        if k == 1:
            return np.exp(Z[:, 0].max(axis=1)) / T
        if method == "exact":
            s = Z.sum(axis=1).max(axis=1, keepdims=True)
            return np.exp(s[:, 0]) * _sweep2(Z[:, 0] - s, Z[:, 1]) / T
        return np.array([union_measure(z, "is", draws, gen) for z in Z]) / T

    return reduce


def pickands_estimate(alpha: float, k: int, T: float, theta: float, replicates: int, seed: int,
                      *, estimator: str = "shifted", union: str = "auto", is_draws: int = 256,
                      threads: int | None = None, stream: int = 0) -> PickandsEstimate:
    """Monte Carlo estimate of ``H_{alpha,k}(T) / T`` with paths on ``[0, T]`` at mesh ``<= theta``."""
    if k < 1 or T <= 0 or theta <= 0:
        raise ValueError("need k >= 1, T > 0 and theta > 0")
    if replicates < 2:
        raise ValueError("need at least two replicates")
    method = _union_method(union, k)
    grid = GridSpec.covering(0.0, float(T), float(theta))
    t = grid.points()
    make = {"shifted": _shifted_reducer, "direct": _direct_reducer}.get(estimator)
    if make is None:
        raise ValueError(f"unknown estimator {estimator!r}")
    vals = fbm_blocks(alpha, grid, k, replicates, seed, make(alpha, k, t, float(T), method, is_draws),
                      threads=threads, stream=stream)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(replicates))
    return PickandsEstimate(float(alpha), int(k), float(T), mean, Z95 * se, int(replicates),
                            float(theta), grid.mesh, se, estimator)


@dataclass(frozen=True)
class Extrapolation:
    """Weighted fit ``H(T)/T = intercept + slope / T``."""

    intercept: float
    intercept_se: float
    slope: float
    residuals: np.ndarray
    chi2: float

    @property
    def value(self) -> float:
        return self.intercept


def pickands_extrapolate(ladder) -> Extrapolation:
    """Extrapolate a ladder of :class:`PickandsEstimate` to ``T -> inf``.

    Uses inverse-variance weights when every rung carries a positive standard
    error, ordinary least squares otherwise.
    """
    ladder = list(ladder)
    if len(ladder) < 3:
        raise ValueError("extrapolation needs at least 3 ladder points")
    keys = {(e.alpha, e.k, e.theta) for e in ladder}
    if len(keys) != 1:
        raise ValueError("ladder points must share alpha, k and theta")
    x = np.array([1.0 / e.T for e in ladder])
    y = np.array([e.value for e in ladder])
    se = np.array([e.se for e in ladder], dtype=float)
    weighted = bool(np.all(np.isfinite(se)) and np.all(se > 0))
    w = 1.0 / se if weighted else np.ones_like(x)
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    resid = y - X @ coef
    cov = np.linalg.inv((X * w[:, None] ** 2).T @ X)
    if not weighted:
        dof = max(1, len(x) - 2)
        cov = cov * float(resid @ resid) / dof
    chi2 = float(np.sum((resid * w) ** 2))
    return Extrapolation(float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), float(coef[1]), resid, chi2)


@dataclass(frozen=True)
class PickandsConstant:
    """Extrapolated constant with the mesh-halving history that produced it."""

    alpha: float
    k: int
    value: float
    se: float
    theta: float
    stable: bool
    history: list = field(default_factory=list)

    @property
    def ci_half_width(self) -> float:
        return Z95 * self.se


def pickands_constant(alpha: float, k: int, Ts=(8.0, 16.0, 32.0), theta: float = 0.002,
                      replicates: int = 4000, seed: int = 0, *, max_halvings: int = 3,
                      estimator: str = "shifted", threads: int | None = None) -> PickandsConstant:
    """Ladder + extrapolation, halving ``theta`` until two successive limits agree within 2 SE.

    Each ladder rung uses its own random stream.  The reported value comes from
    the finest mesh examined.
    """
    history = []
    prev = None
    th = float(theta)
    for level in range(max_halvings + 1):
        ladder = [pickands_estimate(alpha, k, T, th, replicates, seed, estimator=estimator,
                                    threads=threads, stream=100 * (level + 1) + i)
                  for i, T in enumerate(Ts)]
        fit = pickands_extrapolate(ladder)
        history.append((th, fit, ladder))
        if prev is not None and abs(fit.intercept - prev.intercept) <= 2 * math.hypot(fit.intercept_se, prev.intercept_se):
            return PickandsConstant(alpha, k, fit.intercept, fit.intercept_se, th, True, history)
        prev = fit
        th /= 2
    th, fit, _ = history[-1]
    return PickandsConstant(alpha, k, fit.intercept, fit.intercept_se, th, False, history)


LADDER_COLUMNS = ("alpha", "k", "T", "theta", "value", "ci", "replicates")


def write_ladder_csv(ladder, path) -> None:
    """Pickands ladder CSV with columns ``alpha,k,T,theta,value,ci,replicates``."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LADDER_COLUMNS)
        for e in ladder:
            w.writerow([repr(e.alpha), e.k, repr(e.T), repr(e.theta), repr(e.value),
                        repr(e.ci_half_width), e.replicates])


def read_ladder_csv(path) -> list[PickandsEstimate]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        ci = float(row["ci"])
        out.append(PickandsEstimate(float(row["alpha"]), int(row["k"]), float(row["T"]),
                                    float(row["value"]), ci, int(row["replicates"]),
                                    float(row["theta"]), se=ci / Z95))
    return out
