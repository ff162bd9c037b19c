"""Design operators: dense Gaussian and randomized-DFT, against dense oracles."""

import numpy as np
import pytest

from scsparc.design import build_dft_design, build_gaussian_design
from scsparc.message import random_message
from scsparc.params import CouplingParams, SparcParams, build_base_matrix


def small_params(M=4, L=8, omega=2, Lambda=4, n=40, sigma2=0.1, P=1.0):
    base = build_base_matrix(CouplingParams(omega, Lambda), P)
    return SparcParams(n=n, M=M, L=L, base=base, P=P, sigma2=sigma2), base


def test_dense_block_structure():
    params, W = small_params()
    op = build_gaussian_design(params, W, seed=0)
    A = op.materialize()
    nr, nc = op.rows_per_block, op.cols_per_block
    for r in range(W.rows):
        for c in range(W.cols):
            blk = A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc]
            if W.entries[r, c] == 0.0:
                assert np.all(blk == 0.0)


def test_dense_block_variance():
    # oracle: sample variance of a large block within 10% of W_rc/L
    base = build_base_matrix(CouplingParams(1, 1), 1.0)
    params = SparcParams(n=200, M=4, L=50, base=base, P=1.0, sigma2=0.1)
    op = build_gaussian_design(params, base, seed=3)
    A = op.materialize()
    assert A.shape == (200, 200)
    var = A.var()
    expected = base.entries[0, 0] / params.L
    assert abs(var - expected) / expected < 0.10


def test_apply_matches_dense_product():
    params, W = small_params()
    for seed in range(3):
        op = build_gaussian_design(params, W, seed=seed)
        A = op.materialize()
        rng = np.random.default_rng(seed + 100)
        for _ in range(10):
            beta = rng.standard_normal(op.n_cols)
            ref = A @ beta
            got = op.apply(beta)
            assert np.linalg.norm(got - ref) <= 1e-10 * max(np.linalg.norm(ref), 1.0)


def test_apply_zero_input():
    params, W = small_params()
    op = build_gaussian_design(params, W, seed=0)
    assert np.all(op.apply(np.zeros(op.n_cols)) == 0.0)
    assert np.all(op.apply_scaled_adjoint(np.ones((W.rows, W.cols)), np.zeros(op.n_rows)) == 0.0)


def test_scaled_adjoint_matches_dense():
    params, W = small_params()
    op = build_gaussian_design(params, W, seed=1)
    A = op.materialize()
    nr, nc = op.rows_per_block, op.cols_per_block
    rng = np.random.default_rng(7)
    S = rng.uniform(0.5, 2.0, size=(W.rows, W.cols))
    S_full = np.repeat(np.repeat(S, nr, axis=0), nc, axis=1)
    z = rng.standard_normal(op.n_rows)
    ref = (S_full * A).conj().T @ z
    got = op.apply_scaled_adjoint(S, z)
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)


def test_power_constraint():
    # oracle: E||A beta||^2 = n*P, averaged over independent codewords
    params, W = small_params(n=200, L=16, M=8)
    total = 0.0
    for seed in range(100):
        op = build_gaussian_design(params, W, seed=seed)
        beta = random_message(params.M, params.L, seed=seed + 1000)
        total += np.sum(np.abs(op.apply(beta)) ** 2)
    avg = total / 100
    assert abs(avg - params.n * params.P) / (params.n * params.P) < 0.02


def test_dft_entry_magnitudes():
    # every entry of a nonzero block has |entry|^2 = W_rc/L exactly
    params, W = small_params(M=4, L=8, omega=2, Lambda=4, n=10)
    op = build_dft_design(params, W, seed=0)
    A = op.materialize()
    nr, nc = op.rows_per_block, op.cols_per_block
    for r in range(W.rows):
        for c in range(W.cols):
            blk = A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc]
            if W.entries[r, c] == 0.0:
                assert np.all(blk == 0.0)
            else:
                mag2 = np.abs(blk) ** 2
                assert np.allclose(mag2, W.entries[r, c] / params.L, atol=1e-12)


def test_dft_row_norms():
    params, W = small_params(M=4, L=8, omega=2, Lambda=4, n=10)
    op = build_dft_design(params, W, seed=2)
    A = op.materialize()
    nr, nc = op.rows_per_block, op.cols_per_block
    for r in range(W.rows):
        for c in range(W.cols):
            if W.entries[r, c] == 0.0:
                continue
            blk = A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc]
            norms = np.sum(np.abs(blk) ** 2, axis=1)
            assert np.allclose(norms, W.entries[r, c] * nc / params.L, atol=1e-10)


def test_dft_apply_and_adjoint_match_dense():
    params, W = small_params(M=4, L=8, omega=2, Lambda=4, n=10)
    op = build_dft_design(params, W, seed=4)
    A = op.materialize()
    rng = np.random.default_rng(0)
    for _ in range(10):
        beta = rng.standard_normal(op.n_cols) + 1j * rng.standard_normal(op.n_cols)
        ref = A @ beta
        got = op.apply(beta)
        assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)
    S = rng.uniform(0.5, 2.0, size=(W.rows, W.cols))
    nr, nc = op.rows_per_block, op.cols_per_block
    S_full = np.repeat(np.repeat(S, nr, axis=0), nc, axis=1)
    z = rng.standard_normal(op.n_rows) + 1j * rng.standard_normal(op.n_rows)
    ref = (S_full * A).conj().T @ z
    got = op.apply_scaled_adjoint(S, z)
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)


def test_adjoint_inner_product_identity():
    # <A beta, z> == <beta, A* z> for both operator kinds
    params, W = small_params(M=4, L=8, omega=2, Lambda=4, n=40)
    ones = np.ones((W.rows, W.cols))
    rng = np.random.default_rng(9)
    for op in (
        build_gaussian_design(params, W, seed=5),
        build_gaussian_design(params, W, seed=5, field="complex"),
        build_dft_design(small_params(n=10)[0], W, seed=5),
    ):
        beta = rng.standard_normal(op.n_cols) + (
            1j * rng.standard_normal(op.n_cols) if op.field == "complex" else 0.0
        )
        z = rng.standard_normal(op.n_rows) + (
            1j * rng.standard_normal(op.n_rows) if op.field == "complex" else 0.0
        )
        lhs = np.vdot(z, op.apply(beta))
        rhs = np.vdot(op.apply_scaled_adjoint(ones, z), beta)
        assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), 1.0)


def test_dft_determinism():
    params, W = small_params(M=4, L=8, omega=2, Lambda=4, n=10)
    a = build_dft_design(params, W, seed=6).materialize()
    b = build_dft_design(params, W, seed=6).materialize()
    assert np.array_equal(a, b)
    c = build_dft_design(params, W, seed=7).materialize()
    assert not np.array_equal(a, c)


def test_design_validation():
    params, W = small_params()
    with pytest.raises(ValueError):
        build_gaussian_design(params, W, seed=0, field="ternary")
    with pytest.raises(MemoryError):
        build_gaussian_design(params, W, seed=0, memory_cap=8)
    op = build_gaussian_design(params, W, seed=0)
    with pytest.raises(ValueError):
        op.apply(np.zeros(3))
    with pytest.raises(ValueError):
        op.apply_scaled_adjoint(np.zeros((W.rows, W.cols)), np.zeros(op.n_rows))
