"""Exact Gaussian simulation on uniform grids.

Stationary processes are sampled by circulant embedding of the covariance row;
fractional Brownian motion by circulant embedding of fractional Gaussian noise
(Davies-Harte) followed by a cumulative sum.  Each complex FFT yields two
independent real paths.

All bulk sampling goes through :func:`stationary_blocks` / :func:`fbm_blocks`,
which stream replicate blocks through a user reducer so that millions of
replicates never have to sit in memory at once.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .correlation import CorrelationModel, DomainError
from .rng import block_generator, block_size, run_blocks

__all__ = [
    "Embedding",
    "EmbeddingError",
    "GridSpec",
    "PathEnsemble",
    "PickandsGrid",
    "circulant_embed",
    "fbm_blocks",
    "fgn_autocovariance",
    "read_binary",
    "sample_fbm",
    "sample_stationary",
    "stationary_blocks",
    "write_binary",
    "write_csv",
]

CLIP = 1e-8
MAX_DOUBLINGS = 4
MAGIC = b"GPX1"
_HEADER = struct.Struct("<4sQQdQd")


class EmbeddingError(RuntimeError):
    """The circulant extension has a significantly negative eigenvalue."""

    def __init__(self, message: str, worst: float = float("nan")):
        super().__init__(message)
        self.worst = worst


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``t0 + j * mesh`` for ``j = 0..count-1``."""

    t0: float
    horizon: float
    mesh: float

    def __post_init__(self):
        if not self.mesh > 0:
            raise ValueError("mesh must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.count < 2:
            raise ValueError("grid needs at least two points (mesh larger than horizon)")

    @property
    def count(self) -> int:
        # Tolerate horizon/mesh landing a hair below an integer.
        return int(math.floor(self.horizon / self.mesh * (1 + 1e-12) + 1e-9)) + 1

    @property
    def t1(self) -> float:
        return self.t0 + (self.count - 1) * self.mesh

    def points(self) -> np.ndarray:
        return self.t0 + np.arange(self.count) * self.mesh

    @classmethod
    def covering(cls, t0: float, t1: float, max_mesh: float) -> "GridSpec":
        """Finest-needed grid on ``[t0, t1]`` with both ends on the grid and mesh <= ``max_mesh``."""
        if t1 <= t0:
            raise ValueError("need t1 > t0")
        steps = max(1, math.ceil((t1 - t0) / max_mesh - 1e-9))
        return cls(float(t0), float(t1 - t0), (t1 - t0) / steps)

    def refined(self) -> "GridSpec":
        """Grid with half the mesh containing every point of this one."""
        return GridSpec(self.t0, (self.count - 1) * self.mesh, self.mesh / 2)


@dataclass(frozen=True)
class PickandsGrid:
    """Grid of spacing ``q = theta * u^(-2/alpha)`` on a unit interval."""

    u: float
    alpha: float
    theta: float

    def __post_init__(self):
        if self.u <= 0 or self.theta <= 0 or not 0 < self.alpha <= 2:
            raise ValueError("need u > 0, theta > 0 and alpha in (0, 2]")

    @property
    def q(self) -> float:
        return self.theta * self.u ** (-2.0 / self.alpha)

    @property
    def L(self) -> int:
        L = int(math.floor(1.0 / self.q))
        # Guard L*q <= 1 < (L+1)*q against rounding.
        while L * self.q > 1.0:
            L -= 1
        while (L + 1) * self.q <= 1.0:
            L += 1
        return L

    def points(self, start: float = 0.0) -> np.ndarray:
        return start + np.arange(self.L + 1) * self.q


@dataclass(frozen=True)
class Embedding:
    """Nonnegative circulant eigenvalues and the amplitudes used for sampling."""

    eigenvalues: np.ndarray
    size: int
    doublings: int
    worst: float

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues / self.size)


def _embed_row(row_of_lags, npoints: int, max_doublings: int, clip: float, what: str) -> Embedding:
    base = max(2, 2 * (npoints - 1))
    worst = -np.inf
    for d in range(max_doublings + 1):
        m = base * 2**d
        try:
            c = np.asarray(row_of_lags(np.arange(m // 2 + 1)), dtype=float)
        except DomainError as exc:
            raise EmbeddingError(f"{what}: covariance not evaluable on padded range ({exc})") from None
        row = np.concatenate([c, c[-2:0:-1]])
        lam = np.fft.fft(row).real
        top = lam.max()
        worst = lam.min() / top
        if worst >= -clip:
            lam = np.where(lam < 0, 0.0, lam)
            return Embedding(lam, m, d, float(worst))
    raise EmbeddingError(
        f"{what}: minimum eigenvalue {worst:.3e} x max after {max_doublings} padding doublings; "
        "double the padding again or coarsen the grid", float(worst))


def circulant_embed(model: CorrelationModel, grid: GridSpec, max_doublings: int = MAX_DOUBLINGS,
                    clip: float = CLIP) -> Embedding:
    """Eigenvalues of the smallest admissible circulant extension of the grid covariance.

    Starts from size ``2(N-1)`` and doubles the padding up to ``max_doublings``
    times until every eigenvalue is ``>= -clip * max``; the small negatives
    left are set to zero.
    """
    return _embed_row(lambda k: model(k * grid.mesh), grid.count, max_doublings, clip,
                      "circulant embedding")


def fgn_autocovariance(alpha: float, mesh: float, lags) -> np.ndarray:
    """Autocovariance of increments of fBm (covariance ``|t|^alpha`` scale) on mesh ``mesh``."""
    k = np.abs(np.asarray(lags, dtype=float))
    return 0.5 * mesh**alpha * (np.abs(k + 1) ** alpha - 2 * k**alpha + np.abs(k - 1) ** alpha)


def _complex_paths(amp: np.ndarray, npoints: int, paths: int, gen: np.random.Generator) -> np.ndarray:
    pairs = (paths + 1) // 2
    z = gen.standard_normal((pairs, 2, amp.size))
    y = np.fft.fft((z[:, 0] + 1j * z[:, 1]) * amp, axis=1)[:, :npoints]
    out = np.empty((2 * pairs, npoints))
    out[0::2] = y.real
    out[1::2] = y.imag
    return out[:paths]


def _blocked(replicates: int, per_replicate: int, sample_block, reducer, seed: int, stream: int,
             threads: int | None):
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    bsize = block_size(per_replicate)
    nblocks = -(-replicates // bsize)

    def work(b):
        gen = block_generator(seed, b, stream)
        count = min(bsize, replicates - b * bsize)
        paths = sample_block(count, gen)
        return paths if reducer is None else reducer(paths, gen)

    parts = run_blocks(work, nblocks, threads)
    return np.concatenate(parts, axis=0)


def stationary_blocks(model: CorrelationModel, grid: GridSpec, n: int, replicates: int, seed: int,
                      reducer=None, threads: int | None = None, stream: int = 0,
                      embedding: Embedding | None = None) -> np.ndarray:
    """Simulate ``replicates`` independent ensembles of ``n`` paths and reduce them.

    ``reducer(paths, gen)`` receives an array of shape ``(b, n, N)`` for a
    block of ``b`` replicates together with that block's generator (for any
    extra randomness) and must return an array with leading dimension ``b``.
    Without a reducer the raw ``(replicates, n, N)`` array is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    emb = circulant_embed(model, grid) if embedding is None else embedding
    amp = emb.amplitudes
    npts = grid.count

    def sample_block(count, gen):
        return _complex_paths(amp, npts, count * n, gen).reshape(count, n, npts)

    return _blocked(replicates, 2 * n * emb.size, sample_block, reducer, seed, stream, threads)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """``n`` independent paths of a stationary process on a common grid."""

    grid: GridSpec
    n: int
    values: np.ndarray
    seed: int
    model: CorrelationModel
    replicate: int = 0

    @property
    def t(self) -> np.ndarray:
        return self.grid.points()


def sample_stationary(model: CorrelationModel, grid: GridSpec, n: int = 1, seed: int = 0,
                      replicate: int = 0, embedding: Embedding | None = None) -> PathEnsemble:
    """One ensemble of ``n`` paths; identical to replicate ``replicate`` of :func:`stationary_blocks`."""
    emb = circulant_embed(model, grid) if embedding is None else embedding
    bsize = block_size(2 * n * emb.size)
    b, offset = divmod(int(replicate), bsize)
    gen = block_generator(seed, b, 0)
    paths = _complex_paths(emb.amplitudes, grid.count, (offset + 1) * n, gen)
    values = paths[offset * n:(offset + 1) * n].copy()
    values.setflags(write=False)
    return PathEnsemble(grid, n, values, int(seed), model, int(replicate))


def _fbm_sampler(alpha: float, grid: GridSpec, copies: int):
    """Per-replicate footprint and block sampler for fBm paths."""
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if grid.t0 != 0:
        raise ValueError("fBm grids must start at t0 = 0")
    t = grid.points()
    npts = grid.count
    if alpha == 2:
        def sample_block(count, gen):
            return gen.standard_normal((count, copies, 1)) * t
        return copies * npts, sample_block

    emb = _embed_row(lambda k: fgn_autocovariance(alpha, grid.mesh, k), npts - 1,
                     MAX_DOUBLINGS, CLIP, "fBm factorization")
    amp = emb.amplitudes

    def sample_block(count, gen):
        inc = _complex_paths(amp, npts - 1, count * copies, gen)
        out = np.zeros((count * copies, npts))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out.reshape(count, copies, npts)
    return 2 * copies * emb.size + copies * npts, sample_block


def fbm_blocks(alpha: float, grid: GridSpec, copies: int, replicates: int, seed: int,
               reducer=None, threads: int | None = None, stream: int = 0) -> np.ndarray:
    """Independent fBm paths ``B_{alpha/2}`` with ``Var B(t) = t^alpha`` and ``B(0) = 0``.

    Same block/reducer contract as :func:`stationary_blocks`; paths have shape
    ``(b, copies, N)``.  For ``alpha = 2`` the process is ``t * Z`` exactly.
    """
    per, sample_block = _fbm_sampler(alpha, grid, copies)
    return _blocked(replicates, per, sample_block, reducer, seed, stream, threads)


def sample_fbm(alpha: float, grid: GridSpec, seed: int = 0, copies: int = 1,
               replicate: int = 0) -> np.ndarray:
    """Replicate ``replicate`` of :func:`fbm_blocks`: shape ``(copies, N)``, squeezed when ``copies == 1``."""
    per, sample_block = _fbm_sampler(alpha, grid, copies)
    b, offset = divmod(int(replicate), block_size(per))
    out = sample_block(offset + 1, block_generator(seed, b, 0))[offset]
    return out[0] if copies == 1 else out


def write_csv(ensemble: PathEnsemble, path) -> None:
    """Columnar CSV: ``t, path_1, ..., path_n``."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"path_{i + 1}" for i in range(ensemble.n)])
        for j, tj in enumerate(ensemble.t):
            w.writerow([repr(float(tj))] + [repr(float(v)) for v in ensemble.values[:, j]])


def write_binary(ensemble: PathEnsemble, path) -> None:
    """``GPX1`` binary: header ``(magic, N, n, mesh, seed, t0)`` then n*N float64, little-endian."""
    g = ensemble.grid
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, g.count, ensemble.n, g.mesh, ensemble.seed, g.t0))
        fh.write(np.ascontiguousarray(ensemble.values, dtype="<f8").tobytes())


def read_binary(path) -> tuple[dict, np.ndarray]:
    """Read a ``GPX1`` file; returns ``(header, values)`` with values shaped ``(n, N)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated GPX1 header")
    magic, N, n, mesh, seed, t0 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * N * n:
        raise ValueError(f"{path}: expected {N * n} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, N)
    return {"N": N, "n": n, "mesh": mesh, "seed": seed, "t0": t0}, values
