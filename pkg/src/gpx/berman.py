"""Stress tests for the normal-comparison inequality for order statistics.

Each instance has ``n`` independent copies of a ``d``-dimensional standard
normal vector with correlation ``sigma0`` or ``sigma1``.  The left side is
``P0 - P1`` with ``Pk = P(xi_{r:n}(i) <= u_i for all i)`` under ``sigma_k``;
the right side (without its unknown constant) is

    sum_{i<j} (u_i + u_j)^-(n-r) * A_ij^+ * exp(-rhat (u_i^2 + u_j^2) / (2 (1 + rho_ij))),
    A_ij = int_{sigma0_ij}^{sigma1_ij} (1 + |h|)^e (1 - h^2)^(-rhat/2) dh,

with ``e = (n - r)/2`` by default or ``2 (n - r)`` with ``exponent="proof"``.

Orthant probabilities are exact up to quadrature: the event is decided by
which coordinates each copy exceeds, so it is a sum over per-copy exceedance
patterns of products of Gaussian rectangle probabilities.  Those use a
one-dimensional interpolation integral in the correlation (Owen's T for
``d = 2``).
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri, owens_t
from scipy.stats import qmc

from .correlation import DomainError
from .rng import block_generator, run_blocks

__all__ = [
    "CheckReport",
    "ComparisonInstance",
    "OrthantProbability",
    "QuadratureError",
    "berman_bound",
    "bvn_cdf",
    "check_batch",
    "check_instance",
    "coefficient_matrix",
    "fit_constants",
    "held_out_violations",
    "load_instances",
    "mvn_cdf",
    "orderstat_orthant",
    "orthant_probability",
    "random_instance",
    "write_batch_csv",
]

QUAD_TOL = 1e-8
ZERO_TOL = 1e-8


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved {achieved:.3g})")
        self.achieved = achieved


def _as_corr(m, d: int, name: str) -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.shape != (d, d):
        raise ValueError(f"{name} must be {d}x{d}")
    if not np.allclose(a, a.T, atol=1e-12):
        raise ValueError(f"{name} is not symmetric")
    if not np.allclose(np.diag(a), 1.0, atol=1e-12):
        raise ValueError(f"{name} must have unit diagonal")
    if np.linalg.eigvalsh(a).min() < -1e-10:
        raise ValueError(f"{name} is not positive semidefinite")
    a = (a + a.T) / 2
    np.fill_diagonal(a, 1.0)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ComparisonInstance:
    n: int
    r: int
    sigma0: np.ndarray
    sigma1: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float))
        d = u.size
        if not 1 <= self.r <= self.n:
            raise ValueError("need 1 <= r <= n")
        if not np.all(np.isfinite(u)) or np.any(u <= 0):
            raise ValueError("thresholds u must be positive")
        s0 = _as_corr(self.sigma0, d, "sigma0")
        s1 = _as_corr(self.sigma1, d, "sigma1")
        off = ~np.eye(d, dtype=bool)
        if d > 1 and np.max(np.maximum(abs(s0), abs(s1))[off]) >= 1:
            raise DomainError("off-diagonal correlations must satisfy |sigma| < 1")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "sigma0", s0)
        object.__setattr__(self, "sigma1", s1)

    @property
    def d(self) -> int:
        return self.u.size

    @property
    def rhat(self) -> int:
        return self.n - self.r + 1

    def to_dict(self) -> dict:
        return {"n": self.n, "r": self.r, "sigma0": self.sigma0.tolist(),
                "sigma1": self.sigma1.tolist(), "u": self.u.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> ComparisonInstance:
        try:
            return cls(int(obj["n"]), int(obj["r"]), obj["sigma0"], obj["sigma1"], obj["u"])
        except KeyError as exc:
            raise ValueError(f"instance missing field {exc}") from None


def load_instances(path) -> list[ComparisonInstance]:
    """Instances from a JSON list (or ``{"instances": [...]}``) of dicts."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("instances", data)
    if isinstance(data, dict):
        data = [data]
    return [ComparisonInstance.from_dict(o) for o in data]


# ---------------------------------------------------------------------------
# Gaussian rectangle probabilities


def _owen_t(h: float, a: float) -> float:
    if math.isinf(a):
        return math.copysign(0.5 * ndtr(-abs(h)), a)
    return float(owens_t(h, a))


def bvn_cdf(h: float, k: float, rho: float) -> float:
    """``P(X <= h, Y <= k)`` for a standard bivariate normal with correlation ``rho``."""
    if abs(rho) >= 1:
        if rho > 0:
            return float(ndtr(min(h, k)))
        return float(max(0.0, ndtr(h) - ndtr(-k)))
    if h == 0 and k == 0:
        return 0.25 + math.asin(rho) / (2 * math.pi)
    s = math.sqrt(1 - rho * rho)
    ah = (k - rho * h) / (h * s) if h != 0 else math.copysign(math.inf, k - rho * h)
    ak = (h - rho * k) / (k * s) if k != 0 else math.copysign(math.inf, h - rho * k)
    # sign test rather than h * k, which can underflow to zero
    sh, sk = math.copysign(1.0, h) if h else 0.0, math.copysign(1.0, k) if k else 0.0
    beta = 0.0 if (sh * sk > 0 or (sh * sk == 0 and h + k >= 0)) else 0.5
    val = 0.5 * (ndtr(h) + ndtr(k)) - _owen_t(h, ah) - _owen_t(k, ak) - beta
    return float(min(1.0, max(0.0, val)))


def _bvn_density(x: float, y: float, rho: float) -> float:
    s2 = 1 - rho * rho
    return math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * s2)) / (2 * math.pi * math.sqrt(s2))


def _conditional_cdf(upper: np.ndarray, R: np.ndarray, i: int, j: int) -> float:
    """``P(X_rest <= upper_rest | X_i = upper_i, X_j = upper_j)`` for at most two remaining coordinates."""
    rest = [m for m in range(len(upper)) if m not in (i, j)]
    S = R[np.ix_([i, j], [i, j])]
    B = R[np.ix_(rest, [i, j])]
    W = np.linalg.solve(S, B.T).T
    mu = W @ upper[[i, j]]
    cov = R[np.ix_(rest, rest)] - W @ B.T
    lim = upper[rest] - mu
    sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    if np.any(sd < 1e-12):
        # degenerate direction: the conditional coordinate is a point mass
        keep = sd >= 1e-12
        if np.any(lim[~keep] < 0):
            return 0.0
        if not keep.any():
            return 1.0
        lim, sd, cov = lim[keep], sd[keep], cov[np.ix_(keep, keep)]
    z = lim / sd
    if z.size == 1:
        return float(ndtr(z[0]))
    return bvn_cdf(z[0], z[1], cov[0, 1] / (sd[0] * sd[1]))


def mvn_cdf(upper, R, tol: float = QUAD_TOL) -> tuple[float, float]:
    """``P(X <= upper)`` for ``X ~ N(0, R)``, ``R`` a correlation matrix with ``d <= 4``.

    Returns ``(value, error_estimate)``.  ``d <= 2`` is closed form; for
    ``d = 3, 4`` the value is ``prod Phi(u_i)`` plus the integral over
    ``t in [0, 1]`` of the derivative along ``R(t) = (1 - t) I + t R``.
    """
    upper = np.asarray(upper, dtype=float)
    R = np.asarray(R, dtype=float)
    d = upper.size
    if d == 1:
        return float(ndtr(upper[0])), 0.0
    if d == 2:
        return bvn_cdf(upper[0], upper[1], R[0, 1]), 1e-15
    if d > 4:
        raise ValueError("deterministic quadrature supports d <= 4")
    pairs = [(i, j) for i, j in itertools.combinations(range(d), 2) if R[i, j] != 0]
    base = float(np.prod(ndtr(upper)))
    if not pairs:
        return base, 0.0
    eye = np.eye(d)

    def integrand(t):
        Rt = eye + t * (R - eye)
        total = 0.0
        for i, j in pairs:
            rho = Rt[i, j]
            total += R[i, j] * _bvn_density(upper[i], upper[j], rho) * _conditional_cdf(upper, Rt, i, j)
        return total

    # the t = 1 endpoint is singular only when R is; quad never evaluates it
    val, err = quad(integrand, 0.0, 1.0, epsabs=tol / 10, epsrel=1e-10, limit=200)
    if not err <= tol:
        raise QuadratureError("rectangle quadrature did not reach tolerance", err)
    return float(min(1.0, max(0.0, base + val))), float(err)


# ---------------------------------------------------------------------------
# order-statistic orthant


@dataclass(frozen=True)
class OrthantProbability:
    value: float
    error: float
    method: str

    def __float__(self) -> float:
        return self.value


def _pattern_probs(R: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Probability of each exceedance pattern (bit ``i`` set = coordinate ``i`` exceeds)."""
    d = u.size
    out = np.empty(1 << d)
    errs = 0.0
    for mask in range(1 << d):
        sign = np.array([-1.0 if mask >> i & 1 else 1.0 for i in range(d)])
        v, e = mvn_cdf(sign * u, R * np.outer(sign, sign))
        out[mask] = v
        errs += e
    return out, errs


def _combine_copies(probs: np.ndarray, d: int, n: int, r: int) -> float:
    """Probability that every coordinate is exceeded by at most ``n - r`` of the ``n`` copies."""
    cap = n - r
    incr = [tuple(mask >> i & 1 for i in range(d)) for mask in range(1 << d)]
    states = {(0,) * d: 1.0}
    for _ in range(n):
        nxt: dict = {}
        for s, w in states.items():
            for mask, inc in enumerate(incr):
                c = tuple(a + b for a, b in zip(s, inc))
                if max(c) <= cap and probs[mask] > 0:
                    nxt[c] = nxt.get(c, 0.0) + w * probs[mask]
        states = nxt
    return float(sum(states.values()))


def _qmc_orthant(R, u, n, r, seed, rounds=16, m=14) -> tuple[float, float]:
    d = u.size
    L = np.linalg.cholesky(R + 1e-12 * np.eye(d))
    est = []
    for k in range(rounds):
        key = int(block_generator(seed, k, stream=7).integers(2**63))
        sob = qmc.Sobol(d * n, scramble=True, seed=key)
        z = ndtri(np.clip(sob.random_base2(m), 1e-16, 1 - 1e-16)).reshape(-1, n, d) @ L.T
        exceed = (z > u).sum(axis=1)
        est.append(np.mean(np.all(exceed <= n - r, axis=1)))
    est = np.asarray(est)
    return float(est.mean()), float(est.std(ddof=1) / math.sqrt(rounds))


def orthant_probability(R, u, n: int = 1, r: int = 1, *, mode: str = "auto",
                        seed: int = 0) -> OrthantProbability:
    """``P(xi_{r:n}(i) <= u_i for all i)`` for ``n`` iid ``N(0, R)`` copies; any real ``u``.

    ``mode="exact"`` (default for ``d <= 4``) sums ``2^d`` rectangle
    probabilities over copy-wise exceedance counts; ``"qmc"`` uses
    scrambled Sobol points and reports a standard error.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    d = u.size
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    if np.linalg.eigvalsh(R).min() < -1e-10:
        raise ValueError("correlation matrix is not positive semidefinite")
    if mode == "auto":
        mode = "exact" if d <= 4 else "qmc"
    if mode == "exact":
        probs, err = _pattern_probs(R, u)
        val = _combine_copies(probs, d, n, r)
        return OrthantProbability(min(1.0, max(0.0, val)), n * err, "exact")
    if mode == "qmc":
        val, se = _qmc_orthant(R, u, n, r, seed)
        return OrthantProbability(val, se, "qmc")
    raise ValueError(f"unknown mode {mode!r}")


def orderstat_orthant(instance: ComparisonInstance, which: int, **kw) -> OrthantProbability:
    if which not in (0, 1):
        raise ValueError("which must be 0 or 1")
    R = instance.sigma0 if which == 0 else instance.sigma1
    return orthant_probability(R, instance.u, instance.n, instance.r, **kw)


# ---------------------------------------------------------------------------
# bound


def _exponent(n: int, r: int, which: str) -> float:
    if which == "stated":
        return (n - r) / 2
    if which == "proof":
        return 2.0 * (n - r)
    raise ValueError(f"unknown exponent variant {which!r}")


def coefficient_matrix(instance: ComparisonInstance, exponent: str = "stated") -> np.ndarray:
    """Signed ``A_ij``; integrated in ``phi = asin h`` so the endpoint factor stays bounded."""
    e = _exponent(instance.n, instance.r, exponent)
    k = instance.rhat
    d = instance.d
    A = np.zeros((d, d))
    for i, j in itertools.combinations(range(d), 2):
        s0, s1 = instance.sigma0[i, j], instance.sigma1[i, j]
        if s0 == s1:
            continue
        if e == 0 and k == 1:
            a = math.asin(s1) - math.asin(s0)
        else:
            def g(phi):
                return (1 + abs(math.sin(phi))) ** e * math.cos(phi) ** (1 - k)
            lo, hi = math.asin(s0), math.asin(s1)
            pts = [0.0] if min(lo, hi) < 0 < max(lo, hi) else None
            a, err = quad(g, lo, hi, points=pts, epsabs=1e-12, epsrel=1e-11, limit=200)
            if err > 1e-9 * max(1.0, abs(a)):
                raise QuadratureError("A_ij quadrature did not converge", err)
        A[i, j] = A[j, i] = a
    return A


def berman_bound(instance: ComparisonInstance, exponent: str = "stated") -> float:
    """Right-hand side without the constant; only pairs with ``A_ij > 0`` contribute."""
    A = coefficient_matrix(instance, exponent)
    u, k, m = instance.u, instance.rhat, instance.n - instance.r
    rho = np.maximum(abs(instance.sigma0), abs(instance.sigma1))
    total = 0.0
    for i, j in itertools.combinations(range(instance.d), 2):
        if A[i, j] > 0:
            total += ((u[i] + u[j]) ** (-m) * A[i, j]
                      * math.exp(-k * (u[i] ** 2 + u[j] ** 2) / (2 * (1 + rho[i, j]))))
    return float(total)


@dataclass(frozen=True)
class CheckReport:
    """``status`` is ``ok``, ``undefined-clean``, ``no-control`` or ``violation``."""

    d: int
    n: int
    r: int
    p0: float
    p1: float
    lhs_diff: float
    bound: float
    ratio: float | None
    status: str
    error: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_instance(instance: ComparisonInstance, exponent: str = "stated") -> CheckReport:
    """Compare ``P0 - P1`` with the unscaled bound.

    With a zero bound the ratio is undefined.  A positive difference then
    counts as a violation only when the two structures coincide (every
    ``A_ij = 0``); if some pair has ``A_ij < 0`` the inequality simply gives
    no control and the report says so.
    """
    P0 = orderstat_orthant(instance, 0)
    P1 = orderstat_orthant(instance, 1)
    lhs = P0.value - P1.value
    bound = berman_bound(instance, exponent)
    if bound > 0:
        ratio, status = float(max(lhs, 0.0) / bound), "ok"
    elif lhs <= ZERO_TOL:
        ratio, status = None, "undefined-clean"
    elif np.all(coefficient_matrix(instance, exponent) == 0):
        ratio, status = None, "violation"
    else:
        ratio, status = None, "no-control"
    return CheckReport(instance.d, instance.n, instance.r, P0.value, P1.value, lhs, bound,
                       ratio, status, P0.error + P1.error)


def check_batch(instances, exponent: str = "stated", threads: int | None = None) -> list[CheckReport]:
    return run_blocks(lambda i: check_instance(instances[i], exponent), len(instances), threads)


def _random_corr(gen: np.random.Generator, d: int, bound: float) -> np.ndarray:
    while True:
        F = gen.normal(size=(d, d + 1))
        S = F @ F.T
        s = np.sqrt(np.diag(S))
        R = S / np.outer(s, s)
        np.fill_diagonal(R, 1.0)
        if d == 1 or np.max(np.abs(R[~np.eye(d, dtype=bool)])) <= bound:
            return R


def random_instance(gen: np.random.Generator, d_max: int = 4, n_max: int = 2,
                    sigma_max: float = 0.9, u_range=(0.5, 3.0)) -> ComparisonInstance:
    """Random instance with ``2 <= d <= d_max``, ``n <= n_max``, ``|sigma| <= sigma_max``."""
    d = int(gen.integers(2, d_max + 1))
    n = int(gen.integers(1, n_max + 1))
    r = int(gen.integers(1, n + 1))
    s0 = _random_corr(gen, d, sigma_max)
    s1 = _random_corr(gen, d, sigma_max)
    u = gen.uniform(*u_range, size=d)
    return ComparisonInstance(n, r, s0, s1, u)


def fit_constants(reports) -> dict:
    """Empirical ``C_{n,r}``: the largest defined ratio for each ``(n, r)``."""
    out: dict = {}
    for rep in reports:
        if rep.ratio is not None:
            key = (rep.n, rep.r)
            out[key] = max(out.get(key, 0.0), rep.ratio)
    return out


def held_out_violations(reports, constants: dict, rtol: float = 1e-9) -> list[int]:
    """Indices of held-out reports whose ratio exceeds the fitted constant (or violate outright)."""
    bad = []
    for idx, rep in enumerate(reports):
        if rep.status == "violation":
            bad.append(idx)
        elif rep.ratio is not None and rep.ratio > constants.get((rep.n, rep.r), 0.0) * (1 + rtol):
            bad.append(idx)
    return bad


def write_batch_csv(reports, filename) -> None:
    """Batch CSV with columns ``instance_id,d,n,r,lhs_diff,bound,ratio``; empty ratio = undefined."""
    with open(Path(filename), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "d", "n", "r", "lhs_diff", "bound", "ratio"])
        for i, rep in enumerate(reports):
            w.writerow([i, rep.d, rep.n, rep.r, repr(float(rep.lhs_diff)), repr(float(rep.bound)),
                        "" if rep.ratio is None else repr(float(rep.ratio))])
