"""Threshold family ``f_p``, the integral test, crossing trackers and the LIL harness.

For ``rhat = n - r + 1`` the thresholds are

    f_p(s) = sqrt((2/rhat) (log s + shift * log log s)),
    shift  = (2 - rhat*alpha) / (2 alpha) + 1 - p,

calibrated so that ``P(sup_[0,1] X_{r:n} > f_p(t)) ~ K / (t log^(1-p) t)``
with ``K = C^(1/alpha) binom(n, rhat) H_{alpha,rhat} (2 pi)^(-rhat/2)
(2/rhat)^((2 - rhat alpha)/(2 alpha))``.  The event ``X_{r:n}(t) > f_p(t)``
infinitely often therefore has probability one exactly when ``p >= 0``.

Everything finite-horizon here is a diagnostic: almost-sure limits are not
observable on a desk-scale simulation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import comb

from .correlation import CorrelationModel, DomainError
from .extremes import TailEstimate, classical_pickands
from .gaussim import GridSpec, circulant_embed, stationary_blocks
from .orderstats import OrderStatPath

__all__ = [
    "CrossingRecord",
    "IfResult",
    "LilConfig",
    "LilReport",
    "TailForm",
    "ThresholdFamily",
    "classify_dichotomy",
    "crossing_statistics",
    "crossing_series",
    "expected_crossings",
    "f_p",
    "gf_tail_form",
    "h_p",
    "integral_If",
    "lil_experiment",
    "track_crossings",
    "validity_band",
    "write_crossing_csv",
    "z_p",
]

E_E = math.exp(math.e)


@dataclass(frozen=True)
class ThresholdFamily:
    """Parameters of ``f_p``; ``H`` is ``H_{alpha,rhat}`` (classical value used when available)."""

    p: float
    n: int = 1
    r: int = 1
    alpha: float = 2.0
    C: float = 1.0
    H: float | None = None

    def __post_init__(self):
        if not 1 <= self.r <= self.n:
            raise ValueError("need 1 <= r <= n")
        if not 0 < self.alpha <= 2 or self.C <= 0:
            raise ValueError("need alpha in (0, 2] and C > 0")

    @property
    def rhat(self) -> int:
        return self.n - self.r + 1

    @property
    def exponent_shift(self) -> float:
        return (2 - self.rhat * self.alpha) / (2 * self.alpha) + 1 - self.p

    @property
    def pickands(self) -> float:
        if self.H is not None:
            return float(self.H)
        if self.rhat == 1 and self.alpha in (1.0, 2.0):
            return classical_pickands(self.alpha)
        raise ValueError(f"H_{{alpha,{self.rhat}}} unknown for alpha={self.alpha}; pass H explicitly")

    @property
    def gf_constant(self) -> float:
        a, k = self.alpha, self.rhat
        return (self.C ** (1 / a) * comb(self.n, k, exact=True) * self.pickands
                * (2 * math.pi) ** (-k / 2) * (2 / k) ** ((2 - k * a) / (2 * a)))

    @property
    def s_min(self) -> float:
        """Smallest ``s`` from which the inner expression is nonnegative and increasing."""
        a = self.exponent_shift
        if a == 0:
            return 1.0
        g = lambda x: x + a * math.log(x)  # noqa: E731
        if a > 0:
            # increasing on (0, inf); single root in (0, 1)
            return math.exp(brentq(g, 1e-300, 1.0))
        x = -a
        if g(x) < 0:
            x = brentq(g, x, max(10.0, 10 * x * math.log(x + 2)))
        return math.exp(x)

    def describe(self) -> dict:
        out = asdict(self)
        out.update(rhat=self.rhat, exponent_shift=self.exponent_shift, s_min=self.s_min)
        try:
            out["gf_constant"] = self.gf_constant
        except ValueError:
            out["gf_constant"] = None
        return out


def f_p(family: ThresholdFamily, s):
    """Threshold ``f_p(s)``; raises :class:`DomainError` below ``s_min``."""
    arr = np.asarray(s, dtype=float)
    smin = family.s_min
    if np.any(arr < smin * (1 - 1e-12)) or np.any(arr <= 1.0):
        raise DomainError(f"f_p is defined for s >= s_min = {max(smin, 1.0):.6g} (and s > 1)")
    ls = np.log(arr)
    a = family.exponent_shift
    inner = ls if a == 0 else ls + a * np.log(ls)
    out = np.sqrt((2.0 / family.rhat) * np.maximum(inner, 0.0))
    return float(out) if out.ndim == 0 else out


def z_p(family: ThresholdFamily, t):
    """Asymptotic ``P(sup_[0,1] X_{r:n} > f_p(t)) = K / (t log^(1-p) t)``."""
    t = np.asarray(t, dtype=float)
    out = family.gf_constant / (t * np.log(t) ** (1 - family.p))
    return float(out) if out.ndim == 0 else out


def h_p(family: ThresholdFamily, t: float, tail_source="asymptotic") -> float:
    """Window scale ``p * log log t / z_p(t)``.

    ``tail_source`` is ``"asymptotic"``, a probability, or a
    :class:`TailEstimate` whose ``p_hat`` is plugged in.
    """
    if family.p <= 0:
        raise DomainError("h_p requires p > 0")
    lo = max(family.s_min, E_E)
    if t < lo:
        raise DomainError(f"h_p needs t >= {lo:.6g}")
    if isinstance(tail_source, str):
        if tail_source != "asymptotic":
            raise ValueError(f"unknown tail source {tail_source!r}")
        z = z_p(family, t)
    elif isinstance(tail_source, TailEstimate):
        z = tail_source.p_hat
    else:
        z = float(tail_source)
    if not z > 0:
        raise DomainError("tail probability must be positive")
    return family.p * math.log(math.log(t)) / z


def classify_dichotomy(family) -> str:
    """``"one"`` when ``f_p`` is crossed infinitely often almost surely (p >= 0), else ``"zero"``."""
    p = family.p if isinstance(family, ThresholdFamily) else float(family)
    return "one" if p >= 0 else "zero"


def expected_crossings(family: ThresholdFamily, a: float, b: float) -> float:
    """``int_a^b z_p(t) dt`` under the asymptotic tail."""
    K, p = family.gf_constant, family.p
    la, lb = math.log(a), math.log(b)
    if p == 0:
        return K * (math.log(lb) - math.log(la))
    return K * (lb**p - la**p) / p


# ---------------------------------------------------------------------------
# integral test


@dataclass(frozen=True)
class TailForm:
    """Declared tail ``z(u) = a u^(-s) (log u)^(-q)`` for large ``u``."""

    a: float
    q: float = 0.0
    s: float = 1.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return self.a * u ** (-self.s) * np.log(u) ** (-self.q)

    @property
    def convergent(self) -> bool:
        return self.s > 1 or (self.s == 1 and self.q > 1)

    def growth(self) -> str:
        """How ``int^U z`` grows when divergent."""
        if self.s < 1:
            return f"U^{1 - self.s:g}"
        if self.q < 1:
            return f"(log U)^{1 - self.q:g}"
        return "log log U"

    def remainder(self, U: float) -> float:
        """``int_U^inf z(u) du`` for a convergent form."""
        if not self.convergent:
            return math.inf
        if self.s == 1:
            return self.a * math.log(U) ** (1 - self.q) / (self.q - 1)
        # in x = log u the integrand is a e^{-(s-1) x} x^{-q}
        val, _ = quad(lambda x: self.a * math.exp(-(self.s - 1) * x) * x ** (-self.q),
                      math.log(U), math.inf, limit=200)
        return val


def gf_tail_form(family: ThresholdFamily) -> TailForm:
    """Tail of the integrand in the integral test for the ``f_p`` family."""
    return TailForm(family.gf_constant, 1 - family.p, 1.0)


def validity_band(f, rhat: int, t) -> bool:
    """Whether ``(2/rhat) log t <= f(t)^2 <= (3/rhat) log t`` on all sample points."""
    t = np.asarray(t, dtype=float)
    f2 = np.asarray(f(t), dtype=float) ** 2
    lt = np.log(t)
    return bool(np.all(f2 >= (2 / rhat) * lt * (1 - 1e-12)) and np.all(f2 <= (3 / rhat) * lt))


@dataclass(frozen=True)
class IfResult:
    verdict: str
    value: float
    numeric: float
    remainder: float
    growth: str | None = None
    in_band: bool | None = None


def _log_quad(z, a: float, b: float) -> tuple[float, float]:
    val, err = quad(lambda x: float(z(math.exp(x))) * math.exp(x), math.log(a), math.log(b),
                    limit=500, epsabs=1e-13, epsrel=1e-12)
    return val, err


def integral_If(z, T: float, u_max: float = 1e12, tail: TailForm | None = None,
                threshold=None) -> IfResult:
    """Integral test ``int_T^inf z(u) du``: numeric on ``[T, u_max]`` plus a tail verdict.

    ``z`` may be a :class:`TailForm` (its exponents are then the declared
    tail) or any callable with ``tail`` declaring the asymptotic exponents.
    Without a declaration the verdict is ``"finite"`` only if the integral
    has visibly stopped growing by ``u_max``, and ``"inconclusive"``
    otherwise.  ``threshold=(f, rhat)`` attaches the validity-band flag.
    """
    if not u_max > T > 1:
        raise ValueError("need 1 < T < u_max")
    if tail is None and isinstance(z, TailForm):
        tail = z
    numeric, _ = _log_quad(z, T, u_max)
    in_band = None
    if threshold is not None:
        f, rhat = threshold
        in_band = validity_band(f, rhat, np.geomspace(T, u_max, 200))
    if tail is not None:
        if tail.convergent:
            rem = tail.remainder(u_max)
            return IfResult("finite", numeric + rem, numeric, rem, None, in_band)
        return IfResult("divergent", math.inf, numeric, math.inf, tail.growth(), in_band)
    last, _ = _log_quad(z, math.sqrt(T * u_max), u_max)
    if last <= 1e-6 * max(abs(numeric), 1e-300):
        return IfResult("finite", numeric, numeric, 0.0, None, in_band)
    return IfResult("inconclusive", numeric, numeric, math.nan, None, in_band)


# ---------------------------------------------------------------------------
# crossings


@dataclass(frozen=True)
class CrossingRecord:
    """Grid crossings of ``f_p`` on a scan window; ``None`` stands for "no crossing"."""

    horizon: float
    window: tuple
    xi: float | None
    eta: dict
    crossing_times: np.ndarray
    episode_starts: np.ndarray

    @property
    def episodes(self) -> int:
        return int(self.episode_starts.size)


def _window_slice(grid: GridSpec, a: float, b: float) -> slice:
    tol = 1e-9 * grid.mesh
    if a > b or a < grid.t0 - tol or b > grid.t1 + tol:
        raise ValueError(f"window [{a}, {b}] not inside grid [{grid.t0}, {grid.t1}]")
    lo = math.ceil((a - grid.t0) / grid.mesh - 1e-9)
    hi = math.floor((b - grid.t0) / grid.mesh + 1e-9)
    return slice(lo, hi + 1)


def crossing_series(path: OrderStatPath, family: ThresholdFamily, window=None):
    """``(t, x, f, crossed)`` on the window (default: whole grid)."""
    a, b = window if window is not None else (path.grid.t0, path.grid.t1)
    if a < family.s_min:
        raise DomainError(f"scan window must start at or after s_min = {family.s_min:.6g}")
    sl = _window_slice(path.grid, a, b)
    t = path.t[sl]
    x = path.values[sl]
    f = f_p(family, t)
    return t, x, f, x >= f


def track_crossings(path: OrderStatPath, family: ThresholdFamily, window=None,
                    queries=()) -> CrossingRecord:
    """Last-crossing ``xi_p`` at the window end and first-crossing ``eta_p(z)`` for each query."""
    a, b = window if window is not None else (path.grid.t0, path.grid.t1)
    t, _, _, crossed = crossing_series(path, family, (a, b))
    times = t[crossed]
    starts = t[crossed & ~np.concatenate([[False], crossed[:-1]])]
    xi = float(times[-1]) if times.size else None
    eta = {}
    for z in queries:
        k = np.searchsorted(times, z - 1e-12 * max(1.0, abs(z)), side="left")
        eta[float(z)] = float(times[k]) if k < times.size else None
    times.setflags(write=False)
    return CrossingRecord(float(b), (float(a), float(b)), xi, eta, times, starts)


def write_crossing_csv(path: OrderStatPath, family: ThresholdFamily, filename, window=None) -> None:
    """Crossing time series CSV with columns ``t,x_value,f_p,crossed``."""
    t, x, f, c = crossing_series(path, family, window)
    with open(Path(filename), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x_value", "f_p", "crossed"])
        for row in zip(t, x, f, c):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])


# ---------------------------------------------------------------------------
# experiment harness


def crossing_statistics(t: np.ndarray, x: np.ndarray, family: ThresholdFamily, horizon: float,
                        bins: np.ndarray) -> np.ndarray:
    """Per-run statistics ``[running max ratio, episodes, max gap, T - xi(T), bin counts...]``.

    ``t`` and ``x`` hold the order-statistic path on the scan grid.  The gap
    statistic is ``max_{t in [T/2, T]} (t - xi_p(t))``; it and ``T - xi(T)``
    are NaN when no crossing precedes the window.
    """
    half = horizon / 2
    f = f_p(family, t)
    crossed = x >= f
    win = t >= half * (1 - 1e-12)
    runmax = float(np.max(x[win] / np.sqrt((2.0 / family.rhat) * np.log(t[win]))))
    start = crossed & ~np.concatenate([[False], crossed[:-1]])
    last = np.maximum.accumulate(np.where(crossed, t, -np.inf))
    lag = t[win] - last[win]
    gap = float(lag.max()) if np.all(np.isfinite(lag)) else math.nan
    tail = float(t[-1] - last[-1]) if np.isfinite(last[-1]) else math.nan
    counts = np.histogram(t[start], bins=bins)[0]
    return np.concatenate([[runmax, start.sum(), gap, tail], counts]).astype(float)


@dataclass
class LilConfig:
    model: CorrelationModel
    n: int = 1
    r: int = 1
    p: float = 1.0
    horizon: float = 1e4
    theta: float = 0.1
    runs: int = 50
    seed: int = 0
    t_start: float | None = None
    H: float | None = None
    bins: int = 8
    threads: int | None = None

    def family(self) -> ThresholdFamily:
        return ThresholdFamily(self.p, self.n, self.r, self.model.alpha, self.model.C, self.H)

    def describe(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "model"}
        out["model"] = self.model.describe()
        return out


@dataclass
class LilReport:
    config: dict
    mesh: float
    t_start: float
    runmax: dict
    crossings: dict
    gaps: dict
    per_run: np.ndarray = field(repr=False)
    label: str = "diagnostic"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_run"] = self.per_run.tolist()
        return out


def _summary(v: np.ndarray) -> dict:
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"count": 0, "mean": None, "q05": None, "q50": None, "q95": None}
    q = np.quantile(v, [0.05, 0.5, 0.95])
    return {"count": int(v.size), "mean": float(v.mean()), "q05": float(q[0]),
            "q50": float(q[1]), "q95": float(q[2])}


def lil_experiment(config: LilConfig) -> LilReport:
    """Run ``config.runs`` independent order-statistic paths on ``[t_start, horizon]``.

    Reports the normalized running maximum on ``[T/2, T]``, crossing-episode
    counts (total and per log-spaced bin) against the asymptotic intensity
    ``z_p``, and the largest last-crossing lag on ``[T/2, T]`` relative to
    ``h_p(T)``.  All comparisons are labelled diagnostic.
    """
    if config.horizon < 1e3:
        raise ValueError("horizon must be at least 1e3")
    if config.p < 0:
        raise ValueError("the experiment harness needs p >= 0")
    fam = config.family()
    T = float(config.horizon)
    t0 = config.t_start if config.t_start is not None else max(math.e, fam.s_min)
    if t0 < fam.s_min:
        raise DomainError(f"t_start must be >= s_min = {fam.s_min:.6g}")
    mesh = config.theta * f_p(fam, T) ** (-2.0 / fam.alpha)
    grid = GridSpec.covering(t0, T, mesh)
    t = grid.points()
    bins = np.geomspace(t0, T, config.bins + 1)
    emb = circulant_embed(config.model, grid)
    r = config.r

    def reduce(paths, gen):
        x = np.partition(paths, r - 1, axis=1)[:, r - 1, :] if config.n > 1 else paths[:, 0, :]
        return np.stack([crossing_statistics(t, xi, fam, T, bins) for xi in x])

    stats = stationary_blocks(config.model, grid, config.n, config.runs, config.seed, reduce,
                              threads=config.threads, embedding=emb)
    K = fam.gf_constant
    predicted_bins = [expected_crossings(fam, a, b) for a, b in zip(bins[:-1], bins[1:])]
    crossings = {
        "mean": float(stats[:, 1].mean()),
        "predicted_klogT": K * math.log(T),
        "predicted_integral": expected_crossings(fam, t0, T),
        "bins": bins.tolist(),
        "observed_per_bin": stats[:, 4:].mean(axis=0).tolist(),
        "predicted_per_bin": predicted_bins,
    }
    gaps = {"max_gap": _summary(stats[:, 2]), "T_minus_xi": _summary(stats[:, 3])}
    if fam.p > 0 and T >= max(fam.s_min, E_E):
        hT = h_p(fam, T)
        gaps["h_p"] = hT
        gaps["gap_over_h_p"] = _summary(stats[:, 2] / hT)
    else:
        gaps["h_p"] = None
        gaps["gap_over_h_p"] = None
    if not np.any(np.isfinite(stats[:, 2])):
        gaps["gap_over_h_p"] = None
    return LilReport(config.describe(), grid.mesh, t0, _summary(stats[:, 0]), crossings, gaps, stats)
