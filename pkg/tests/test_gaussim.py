import math
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import circulant

from gpx.correlation import powered_exponential, tabulated
from gpx.gaussim import (EmbeddingError, GridSpec, PickandsGrid, circulant_embed, fbm_blocks,
                         read_binary, sample_fbm, sample_stationary, stationary_blocks,
                         write_binary, write_csv)
from gpx.rng import block_generator, block_size, run_blocks


def test_block_generator_is_pure():
    a = block_generator(3, 5, 1).standard_normal(4)
    b = block_generator(3, 5, 1).standard_normal(4)
    c = block_generator(3, 6, 1).standard_normal(4)
    d = block_generator(3, 5, 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        block_generator(-1, 0)


def test_run_blocks_order():
    assert run_blocks(lambda b: b * b, 7, threads=3) == [b * b for b in range(7)]
    assert block_size(1) == 4096 and block_size(10**9) == 1


def test_gridspec_covering_and_refine():
    g = GridSpec.covering(2.0, 7.0, 0.3)
    assert g.points()[0] == 2.0 and g.t1 == pytest.approx(7.0)
    assert g.mesh <= 0.3
    r = g.refined()
    assert r.count == 2 * g.count - 1
    np.testing.assert_allclose(r.points()[::2], g.points())
    with pytest.raises(ValueError):
        GridSpec(0, 1, 2)


@given(st.floats(0.5, 50), st.floats(0.2, 2.0), st.floats(1e-3, 1.0))
def test_pickands_grid_guard(u, alpha, theta):
    g = PickandsGrid(u, alpha, theta)
    if g.q <= 1:
        assert g.L * g.q <= 1.0 < (g.L + 1) * g.q


def test_embedding_matches_dense_eigen():
    m = powered_exponential(1, 1)
    grid = GridSpec(0, 1.0, 0.5)
    emb = circulant_embed(m, grid)
    row = m(np.array([0, 0.5, 1.0, 0.5]))
    dense = np.linalg.eigvalsh(circulant(row))
    np.testing.assert_allclose(np.sort(emb.eigenvalues), np.sort(dense), atol=1e-12)
    assert np.all(emb.eigenvalues >= 0)


def test_white_noise_embedding():
    m = tabulated([0, 0.1, 1000], [1, 0, 0], C=10, alpha=1)
    emb = circulant_embed(m, GridSpec(0, 1.0, 0.1))
    np.testing.assert_allclose(emb.eigenvalues, 1.0, atol=1e-12)


def test_gaussian_kernel_clip_path():
    emb = circulant_embed(powered_exponential(1, 2), GridSpec(0, 1.0, 0.01))
    assert np.all(emb.eigenvalues >= 0)
    assert emb.worst >= -1e-8
    # dense oracle: the grid covariance itself is PSD up to rounding
    t = np.arange(101) * 0.01
    cov = np.exp(-(t[:, None] - t[None, :]) ** 2)
    assert np.linalg.eigvalsh(cov).min() > -1e-10


def test_embedding_failure_reports_worst():
    bad = tabulated([0, 0.1, 1000], [1, -0.99, -0.99], C=1, alpha=1)
    with pytest.raises(EmbeddingError) as info:
        circulant_embed(bad, GridSpec(0, 1.0, 0.1))
    assert info.value.worst < -1e-8
    short = tabulated([0, 0.5], [1, 0.5], C=1, alpha=1)
    with pytest.raises(EmbeddingError):
        circulant_embed(short, GridSpec(0, 1.0, 0.1))


def test_stationary_moments():
    m = powered_exponential(1, 1)
    grid = GridSpec(0, 2.0, 0.5)
    x = stationary_blocks(m, grid, 1, 100_000, seed=11)[:, 0, :]
    n = x.shape[0]
    j = 2
    assert abs(x[:, j].mean()) <= 4 / math.sqrt(n)
    assert abs(x[:, j].var() - 1) <= 4 * math.sqrt(2 / n)
    rho = np.corrcoef(x[:, j], x[:, j + 1])[0, 1]
    r = math.exp(-0.5)
    assert rho == pytest.approx(0.6065, abs=1e-4 + 4 * (1 - r * r) / math.sqrt(n))


def test_stationary_covariance_exact_small_grid():
    m = powered_exponential(2.0, 1.5)
    grid = GridSpec(0, 0.7, 0.1)
    x = stationary_blocks(m, grid, 1, 200_000, seed=3)[:, 0, :]
    t = grid.points()
    target = m(t[:, None] - t[None, :])
    S = x.T @ x / x.shape[0]
    se = np.sqrt((1 + target**2) / x.shape[0])
    assert np.all(np.abs(S - target) <= 4 * se)


def test_single_ensemble_matches_block_layout():
    m = powered_exponential(1, 1)
    grid = GridSpec(0, 1.0, 0.1)
    allp = stationary_blocks(m, grid, 3, 10, seed=5)
    for rep in (0, 4, 9):
        ens = sample_stationary(m, grid, 3, seed=5, replicate=rep)
        assert np.array_equal(ens.values, allp[rep])
        assert not ens.values.flags.writeable


def test_thread_count_does_not_change_output():
    m = powered_exponential(1, 1)
    grid = GridSpec(0, 50.0, 0.01)  # several blocks
    f = lambda p, g: p.max(axis=2)  # noqa: E731
    a = stationary_blocks(m, grid, 2, 300, seed=9, reducer=f, threads=1)
    b = stationary_blocks(m, grid, 2, 300, seed=9, reducer=f, threads=4)
    assert np.array_equal(a, b)


def test_fbm_variance_and_covariance():
    grid = GridSpec(0, 2.0, 0.25)
    t = grid.points()
    for alpha in (0.5, 1.0, 1.5, 2.0):
        B = fbm_blocks(alpha, grid, 1, 40_000, seed=2)[:, 0, :]
        assert np.all(B[:, 0] == 0)
        ratio = B[:, 1:].var(axis=0) / t[1:] ** alpha
        assert np.all(np.abs(ratio - 1) < 0.05)
    B = fbm_blocks(1.5, grid, 1, 200_000, seed=4)[:, 0, :]
    cov12 = np.mean(B[:, 4] * B[:, 8])
    target = 0.5 * (1 + 2**1.5 - 1)
    assert target == pytest.approx(1.414214, abs=1e-6)
    assert abs(cov12 - target) < 4 * math.sqrt((1 * 2**1.5 + target**2) / B.shape[0])


def test_brownian_increments_uncorrelated():
    grid = GridSpec(0, 2.0, 0.5)
    B = fbm_blocks(1.0, grid, 1, 100_000, seed=8)[:, 0, :]
    a, b = B[:, 1] - B[:, 0], B[:, 3] - B[:, 2]
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(B.shape[0])


def test_fbm_validation_and_single():
    with pytest.raises(ValueError):
        fbm_blocks(1.0, GridSpec(1.0, 1.0, 0.1), 1, 10, 0)
    with pytest.raises(ValueError):
        fbm_blocks(2.5, GridSpec(0, 1.0, 0.1), 1, 10, 0)
    grid = GridSpec(0, 1.0, 0.1)
    allp = fbm_blocks(0.8, grid, 2, 5, seed=1)
    assert np.array_equal(sample_fbm(0.8, grid, seed=1, copies=2, replicate=3), allp[3])


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32))
def test_binary_roundtrip(n, seed):
    path = Path(tempfile.mkdtemp()) / "x.gpx"
    ens = sample_stationary(powered_exponential(1, 1), GridSpec(0.5, 1.0, 0.1), n, seed)
    write_binary(ens, path)
    header, values = read_binary(path)
    assert header["N"] == 11 and header["n"] == n and header["seed"] == seed
    assert header["t0"] == 0.5
    assert np.array_equal(values, ens.values)


def test_binary_rejects_garbage(tmp_path):
    p = tmp_path / "bad.gpx"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(ValueError):
        read_binary(p)


def test_csv_columns(tmp_path):
    ens = sample_stationary(powered_exponential(1, 1), GridSpec(0, 1.0, 0.5), 2, 0)
    p = tmp_path / "x.csv"
    write_csv(ens, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,path_1,path_2"
    assert len(lines) == 4
    assert float(lines[2].split(",")[2]) == ens.values[1, 1]
