"""Block-structured design operators.

The design matrix has row_blocks x col_blocks blocks; block (r, c) carries
variance W[r, c]/L per entry. Two kinds are provided:

 * dense_gaussian: explicit i.i.d. Gaussian blocks, real or complex field.
 * dft_fast: each nonzero block is a row-subsampled unitary DFT with a
   random column permutation and i.i.d. random phases per column, scaled so
   every entry has squared magnitude W[r, c]/L. Products use the FFT and
   cost O(ML log ML). This kind is complex-field by construction.

For the complex field, the operator has params.n // 2 rows (n counts real
dimensions throughout).
"""

from __future__ import annotations

import numpy as np

from .params import BaseMatrix, SparcParams, is_power_of_2

__all__ = [
    "DesignOperator",
    "DenseGaussianDesign",
    "DftDesign",
    "build_gaussian_design",
    "build_dft_design",
]

DEFAULT_MEMORY_CAP = 2 * 1024**3  # bytes


def _check_scaling(S: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.shape != shape:
        raise ValueError(f"scaling matrix must have shape {shape}, got {S.shape}")
    if not np.all(np.isfinite(S)) or np.any(S <= 0):
        raise ValueError("scaling matrix entries must be positive and finite")
    return S


class DesignOperator:
    """Common interface: forward product, scaled adjoint, materialize."""

    kind: str
    field: str

    def __init__(self, params: SparcParams, W: BaseMatrix, field: str):
        if W.rows != params.row_blocks or W.cols != params.col_blocks:
            raise ValueError("base matrix dims inconsistent with params")
        if field not in ("real", "complex"):
            raise ValueError(f"unknown field {field!r}")
        if field == "complex" and params.n % 2 != 0:
            raise ValueError("complex field requires an even number of real dims n")
        self.params = params
        self.W = W
        self.field = field
        self.n_rows = params.n if field == "real" else params.n // 2
        self.n_cols = params.M * params.L
        if self.n_rows % W.rows != 0:
            raise ValueError("row blocks must divide the operator row count")
        self.rows_per_block = self.n_rows // W.rows
        self.cols_per_block = self.n_cols // W.cols

    def apply(self, beta: np.ndarray) -> np.ndarray:
        """Forward product A @ beta."""
        raise NotImplementedError

    def apply_scaled_adjoint(self, S: np.ndarray, z: np.ndarray) -> np.ndarray:
        """(S ⊙ A)* z where S is a positive row_blocks x col_blocks matrix.

        Output block c is sum_r S[r, c] * conj(A_rc).T @ z_r.
        """
        raise NotImplementedError

    def materialize(self, memory_cap: int = DEFAULT_MEMORY_CAP) -> np.ndarray:
        """Dense matrix representation (test oracle; size-capped)."""
        raise NotImplementedError

    def _check_apply_input(self, beta: np.ndarray) -> None:
        if beta.size != self.n_cols:
            raise ValueError(f"expected input of length {self.n_cols}, got {beta.size}")

    def _check_adjoint_input(self, z: np.ndarray) -> None:
        if z.size != self.n_rows:
            raise ValueError(f"expected input of length {self.n_rows}, got {z.size}")


class DenseGaussianDesign(DesignOperator):
    kind = "dense_gaussian"

    def __init__(
        self,
        params: SparcParams,
        W: BaseMatrix,
        seed,
        field: str = "real",
        memory_cap: int = DEFAULT_MEMORY_CAP,
    ):
        super().__init__(params, W, field)
        itemsize = 8 if field == "real" else 16
        nbytes = self.n_rows * self.n_cols * itemsize
        if nbytes > memory_cap:
            raise MemoryError(
                f"dense design needs {nbytes} bytes, above the cap {memory_cap}"
            )
        rng = np.random.default_rng(seed)
        L = params.L
        nr, nc = self.rows_per_block, self.cols_per_block
        dtype = float if field == "real" else complex
        A = np.zeros((self.n_rows, self.n_cols), dtype=dtype)
        for r in range(W.rows):
            for c in range(W.cols):
                var = W.entries[r, c] / L
                if var == 0.0:
                    continue
                if field == "real":
                    blk = np.sqrt(var) * rng.standard_normal((nr, nc))
                else:
                    blk = np.sqrt(var / 2.0) * (
                        rng.standard_normal((nr, nc))
                        + 1j * rng.standard_normal((nr, nc))
                    )
                A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc] = blk
        self._A = A

    def apply(self, beta):
        self._check_apply_input(beta)
        return self._A @ beta

    def apply_scaled_adjoint(self, S, z):
        self._check_adjoint_input(z)
        S = _check_scaling(S, (self.W.rows, self.W.cols))
        nr, nc = self.rows_per_block, self.cols_per_block
        out = np.zeros(self.n_cols, dtype=self._A.dtype)
        for c in range(self.W.cols):
            acc = np.zeros(nc, dtype=self._A.dtype)
            for r in range(self.W.rows):
                blk = self._A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc]
                acc += S[r, c] * (blk.conj().T @ z[r * nr : (r + 1) * nr])
            out[c * nc : (c + 1) * nc] = acc
        return out

    def materialize(self, memory_cap: int = DEFAULT_MEMORY_CAP):
        return self._A.copy()


class DftDesign(DesignOperator):
    """Fast operator whose nonzero blocks are randomized unitary-DFT rows.

    Block (r, c): sqrt(W_rc/L) * sqrt(N) * F_N[row_subset, perm] * diag(phases)
    with F_N the N-point unitary DFT, N = cols_per_block. Every entry has
    squared magnitude W_rc/L.
    """

    kind = "dft_fast"

    def __init__(self, params: SparcParams, W: BaseMatrix, seed):
        super().__init__(params, W, "complex")
        N = self.cols_per_block
        if not is_power_of_2(N):
            raise ValueError(f"cols per block ({N}) must be a power of 2")
        if self.rows_per_block > N:
            raise ValueError("rows per block must not exceed cols per block")
        # Independent row subset, column permutation and phases per nonzero
        # block, spawned in a fixed block order for determinism.
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self._blocks: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        children = iter(root.spawn(W.rows * W.cols))
        for r in range(W.rows):
            for c in range(W.cols):
                child = next(children)
                if W.entries[r, c] == 0.0:
                    continue
                rng = np.random.default_rng(child)
                rows = rng.choice(N, size=self.rows_per_block, replace=False)
                perm = rng.permutation(N)
                phases = np.exp(2j * np.pi * rng.random(N))
                self._blocks[(r, c)] = (rows, perm, phases)

    def _scale(self, r: int, c: int) -> float:
        # sqrt(W/L) * sqrt(N) absorbed: fft is the unnormalized DFT,
        # i.e. sqrt(N) * unitary DFT, so only sqrt(W/L) is applied here.
        return np.sqrt(self.W.entries[r, c] / self.params.L)

    def apply(self, beta):
        self._check_apply_input(beta)
        nc = self.cols_per_block
        out = np.zeros(self.n_rows, dtype=complex)
        for (r, c), (rows, perm, phases) in self._blocks.items():
            v = np.zeros(nc, dtype=complex)
            v[perm] = phases * beta[c * nc : (c + 1) * nc]
            out[r * self.rows_per_block : (r + 1) * self.rows_per_block] += (
                self._scale(r, c) * np.fft.fft(v)[rows]
            )
        return out

    def apply_scaled_adjoint(self, S, z):
        self._check_adjoint_input(z)
        S = _check_scaling(S, (self.W.rows, self.W.cols))
        nr, nc = self.rows_per_block, self.cols_per_block
        out = np.zeros(self.n_cols, dtype=complex)
        for (r, c), (rows, perm, phases) in self._blocks.items():
            u = np.zeros(nc, dtype=complex)
            u[rows] = z[r * nr : (r + 1) * nr]
            t = nc * np.fft.ifft(u)  # conjugate-transpose of the DFT
            out[c * nc : (c + 1) * nc] += (
                S[r, c] * self._scale(r, c) * phases.conj() * t[perm]
            )
        return out

    def materialize(self, memory_cap: int = DEFAULT_MEMORY_CAP):
        nbytes = self.n_rows * self.n_cols * 16
        if nbytes > memory_cap:
            raise MemoryError(
                f"materializing needs {nbytes} bytes, above the cap {memory_cap}"
            )
        nr, nc = self.rows_per_block, self.cols_per_block
        A = np.zeros((self.n_rows, self.n_cols), dtype=complex)
        for (r, c), (rows, perm, phases) in self._blocks.items():
            F = np.exp(-2j * np.pi * np.outer(rows, perm).astype(float) / nc)
            A[r * nr : (r + 1) * nr, c * nc : (c + 1) * nc] = (
                self._scale(r, c) * F * phases[np.newaxis, :]
            )
        return A


def build_gaussian_design(
    params: SparcParams,
    W: BaseMatrix,
    seed,
    field: str = "real",
    memory_cap: int = DEFAULT_MEMORY_CAP,
) -> DenseGaussianDesign:
    return DenseGaussianDesign(params, W, seed, field=field, memory_cap=memory_cap)


def build_dft_design(params: SparcParams, W: BaseMatrix, seed) -> DftDesign:
    return DftDesign(params, W, seed)
