"""Exact batch weighted SVD and exact error computations.

Everything here materializes the full data matrix and exists to validate
the streaming results; the exact decomposition routes through a Cholesky
factorization of the weight matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError
from .incremental import Tolerances, reconstruct, run_stream
from .weighted_linalg import weighted_operator_norm

__all__ = [
    "ExactSvd",
    "SweepRow",
    "exact_weighted_svd",
    "exact_error",
    "tolerance_sweep",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class ExactSvd:
    """Core SVD with respect to the weighted inner product: V (m, k) with
    V^T M V = I, sigma positive descending, W (n, k) orthonormal."""

    V: np.ndarray
    sigma: np.ndarray
    W: np.ndarray

    @property
    def k(self):
        return self.sigma.size


def exact_weighted_svd(U, M, drop_tol_factor=1e-14):
    """Core SVD of U in the M-inner product via S = L^T U.

    A standard SVD of S is computed and the left factor is mapped back with
    a triangular back substitution. Singular values below
    ``drop_tol_factor * sigma_1`` are dropped together with their vectors.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] != M.dim:
        raise ValueError(f"U has shape {U.shape}, expected ({M.dim}, n)")
    S = M.apply_lt(U)
    V_hat, sigma, Wh = scipy.linalg.svd(S, full_matrices=False)
    if sigma.size == 0 or sigma[0] == 0.0:
        keep = 0
    else:
        keep = int(np.count_nonzero(sigma >= drop_tol_factor * sigma[0]))
    V = M.solve_lt(V_hat[:, :keep]) if keep else np.zeros((M.dim, 0))
    return ExactSvd(V=np.asarray(V), sigma=sigma[:keep], W=Wh.T[:, :keep])


def exact_error(U, state, M):
    """Weighted operator-norm distance between U and the streamed result."""
    U = np.asarray(U, dtype=np.float64)
    R = reconstruct(state)
    if U.shape != R.shape:
        raise ValueError(
            f"data matrix has shape {U.shape} but the state reconstructs {R.shape}"
        )
    return weighted_operator_norm(U - R, M)


@dataclass(frozen=True)
class SweepRow:
    """One tolerance-grid cell. ``t_p``/``t_sv``/``state`` carry extra
    diagnostics beyond the serialized columns."""

    tol: float
    tol_sv: float
    rank: int
    exact_error: float
    incr_error_bound: float
    t_p: int
    t_sv: int
    state: object

    def csv_values(self):
        return (self.tol, self.tol_sv, self.rank, self.exact_error, self.incr_error_bound)


def write_sweep_csv(path, rows):
    """Serialize sweep rows with exactly the five table columns."""
    from .io_formats import write_csv

    write_csv(
        path,
        ["tol", "tol_sv", "rank", "exact_error", "incr_error_bound"],
        [row.csv_values() for row in rows],
    )


def _as_matrix(snapshots):
    columns = getattr(snapshots, "columns", snapshots)
    U = np.asarray(columns, dtype=np.float64)
    if U.ndim != 2:
        raise InvalidInputError("snapshots must form an m x s matrix")
    return U


def tolerance_sweep(snapshots, M, tol_grid):
    """Run the streaming decomposition once per tolerance pair.

    ``snapshots`` is an m x s matrix (or anything with a ``.columns``
    attribute holding one). Returns one :class:`SweepRow` per pair with the
    final rank, the exact operator-norm error against the full matrix, and
    the incrementally accumulated bound.
    """
    U = _as_matrix(snapshots)
    if U.shape[1] == 0:
        raise InvalidInputError("empty snapshot stream")
    rows = []
    for tols in tol_grid:
        if not isinstance(tols, Tolerances):
            tols = Tolerances(*tols)
        state, n_skipped = run_stream(iter(U.T), M, tols)
        R = reconstruct(state)
        if n_skipped:
            R = np.hstack([np.zeros((U.shape[0], n_skipped)), R])
        err = weighted_operator_norm(U - R, M)
        rows.append(
            SweepRow(
                tol=tols.tol,
                tol_sv=tols.tol_sv,
                rank=state.k,
                exact_error=err,
                incr_error_bound=state.e,
                t_p=state.T_p,
                t_sv=state.T_sv,
                state=state,
            )
        )
    return rows
