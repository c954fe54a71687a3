"""Streaming SVD update with two truncations and a running error bound.

The state machine consumes one data column at a time and maintains a core
SVD (V, sigma, W) of an approximate data matrix, together with a scalar e
that bounds the weighted operator-norm distance between the true data
matrix and the approximation. Truncation happens in two places: a new
column whose out-of-basis residual norm p falls below ``tol`` is projected
into the current basis (adding p to the bound), and trailing singular
values at or below ``tol_sv`` are dropped after each update (adding the
largest dropped value to the bound).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ZeroColumnError
from .weighted_linalg import (
    m_norm,
    modified_gram_schmidt_weighted,
    small_svd,
)

__all__ = [
    "Tolerances",
    "SvdState",
    "UpdateReport",
    "initialize",
    "update",
    "error_bound",
    "reconstruct",
    "pod_output",
    "run_stream",
]


@dataclass(frozen=True)
class Tolerances:
    """Truncation thresholds: ``tol`` for the residual norm p, ``tol_sv``
    for trailing singular values."""

    tol: float = 1e-10
    tol_sv: float = 1e-10

    def __post_init__(self):
        if not (self.tol > 0.0 and self.tol_sv > 0.0):
            raise ValueError("tolerances must be positive")


@dataclass
class SvdState:
    """Running decomposition: V (m, k) M-orthonormal, sigma descending
    positive, W (n, k) orthonormal or None when right vectors are skipped.

    ``e`` is the accumulated error bound; ``T_p`` and ``T_sv`` count the
    truncation events that contributed to it. Single-owner mutable state:
    one update at a time.
    """

    V: np.ndarray
    sigma: np.ndarray
    W: np.ndarray | None
    k: int
    n: int
    e: float = 0.0
    T_p: int = 0
    T_sv: int = 0
    e_comp: float = field(default=0.0, repr=False)  # Kahan compensation

    @property
    def keeps_w(self):
        return self.W is not None

    def copy(self):
        return SvdState(
            V=self.V.copy(),
            sigma=self.sigma.copy(),
            W=None if self.W is None else self.W.copy(),
            k=self.k,
            n=self.n,
            e=self.e,
            T_p=self.T_p,
            T_sv=self.T_sv,
            e_comp=self.e_comp,
        )


@dataclass(frozen=True)
class UpdateReport:
    """Per-column diagnostics of one update step."""

    p: float
    d: np.ndarray
    e_p: float
    e_sv: float
    r: int
    rank_grew: bool
    reorthogonalized: bool


def initialize(c, M, keep_w=True, init_tol=None):
    """Start a decomposition from a single nonzero column.

    ``init_tol`` defaults to 1e-14 * sqrt(max diagonal of M); a column at
    or below it raises :class:`ZeroColumnError` (the caller may skip the
    column and retry with the next one).
    """
    # contiguous copy: memory layout must not influence the arithmetic,
    # so every caller (file reader, matrix view) produces identical bits
    c = np.ascontiguousarray(c, dtype=np.float64)
    if not np.isfinite(c).all():
        raise InvalidInputError("column contains non-finite entries")
    if init_tol is None:
        init_tol = 1e-14 * float(np.sqrt(np.max(M.diagonal())))
    nrm = m_norm(c, M)
    if nrm <= init_tol:
        raise ZeroColumnError(f"column norm {nrm:.3e} is at or below {init_tol:.3e}")
    return SvdState(
        V=(c / nrm)[:, None],
        sigma=np.array([nrm]),
        W=np.ones((1, 1)) if keep_w else None,
        k=1,
        n=1,
    )


def _kahan_add(total, comp, term):
    y = term - comp
    t = total + y
    return t, (t - total) - y


def update(state, c, M, tols, reorth_threshold=None):
    """Fold one new column into the decomposition; mutates ``state``.

    Follows the bordered-matrix update: with d = V^T M c and p the M-norm
    of the residual c - V d, the small matrix [diag(sigma) d; 0 p] is
    decomposed in full, growing the rank by one unless p < tol (or the
    rank already equals the ambient dimension), in which case the residual
    direction is discarded and p is added to the error bound. Trailing
    singular values at or below tol_sv are then truncated, adding the
    largest one dropped. Finally the basis is reorthogonalized when the
    first and last columns have drifted measurably out of M-orthogonality.

    ``reorth_threshold`` overrides the drift threshold, which defaults to
    min(tol, tol * m).

    Returns ``(state, UpdateReport)``.
    """
    m = state.V.shape[0]
    c = np.ascontiguousarray(c, dtype=np.float64)  # layout-independent bits
    if c.shape != (m,):
        raise ValueError(f"column has shape {c.shape}, expected ({m},)")
    if not np.isfinite(c).all():
        raise InvalidInputError("column contains non-finite entries")

    k = state.k
    Mc = M.matvec(c)
    d = state.V.T @ Mc
    res = c - state.V @ d
    p = float(np.sqrt(abs(res @ M.matvec(res))))

    Q = np.zeros((k + 1, k + 1))
    Q[:k, :k] = np.diag(state.sigma)
    Q[:k, k] = d
    Q[k, k] = 0.0 if p < tols.tol else p
    V_Q, sigma_Q, W_Q = small_svd(Q)

    no_growth = (p < tols.tol) or (k >= m)
    if no_growth:
        state.V = state.V @ V_Q[:k, :k]
        state.sigma = sigma_Q[:k].copy()
        if state.W is not None:
            state.W = np.vstack(
                [state.W @ W_Q[:k, :k], W_Q[k, :k][None, :]]
            )
        e_p = p
    else:
        # One extra projection pass before normalizing: the raw residual
        # carries cancellation round-off of size eps*||c||, which p may not
        # dominate. Re-projecting shrinks the in-span contamination to
        # eps*||res|| so the new direction stays M-orthogonal to V at
        # machine level regardless of how small p is. Exact arithmetic:
        # a no-op.
        res2 = res - state.V @ (state.V.T @ M.matvec(res))
        p2 = float(np.sqrt(abs(res2 @ M.matvec(res2))))
        j = res2 / p2 if p2 > 0.0 else res / p
        state.V = np.hstack([state.V, j[:, None]]) @ V_Q
        state.sigma = sigma_Q.copy()
        if state.W is not None:
            state.W = np.vstack([state.W @ W_Q[:k, :], W_Q[k, :][None, :]])
        state.k = k + 1
        e_p = 0.0

    # Singular value truncation: keep the leading r values above tol_sv.
    k_new = state.k
    r = int(np.count_nonzero(state.sigma > tols.tol_sv))
    if r == 0:
        r = 1  # never produce an empty state
    if r < k_new:
        e_sv = float(state.sigma[r])
        state.V = state.V[:, :r]
        state.sigma = state.sigma[:r]
        if state.W is not None:
            state.W = state.W[:, :r]
        state.k = r
    else:
        e_sv = 0.0

    threshold = (
        min(tols.tol, tols.tol * m) if reorth_threshold is None else reorth_threshold
    )
    drift = abs(float(state.V[:, -1] @ M.matvec(state.V[:, 0])))
    reorthogonalized = False
    if drift > threshold:
        state.V = modified_gram_schmidt_weighted(state.V, M)
        reorthogonalized = True

    state.e, state.e_comp = _kahan_add(state.e, state.e_comp, e_p)
    state.e, state.e_comp = _kahan_add(state.e, state.e_comp, e_sv)
    state.n += 1
    if e_p > 0.0:
        state.T_p += 1
    if e_sv > 0.0:
        state.T_sv += 1

    report = UpdateReport(
        p=p,
        d=d,
        e_p=e_p,
        e_sv=e_sv,
        r=state.k,
        rank_grew=not no_growth,
        reorthogonalized=reorthogonalized,
    )
    return state, report


def error_bound(state):
    """Accumulated upper bound on the weighted operator-norm error."""
    return state.e


def reconstruct(state):
    """Dense m x n matrix V diag(sigma) W^T of the approximate data."""
    if state.W is None:
        raise ValueError("right singular vectors were not maintained")
    return (state.V * state.sigma) @ state.W.T


def pod_output(state):
    """POD modes (the M-orthonormal columns of V) and eigenvalues sigma^2."""
    return state.V, state.sigma**2


def run_stream(columns, M, tols, keep_w=True, reorth_threshold=None):
    """Feed an iterable of columns through initialize + update.

    Leading columns rejected as :class:`ZeroColumnError` are skipped (they
    carry no information for the decomposition); their count is returned so
    callers comparing against the full matrix can left-pad.

    Returns ``(state, n_skipped)``.
    """
    state = None
    n_skipped = 0
    for c in columns:
        if state is None:
            try:
                state = initialize(c, M, keep_w=keep_w)
            except ZeroColumnError:
                n_skipped += 1
            continue
        update(state, c, M, tols, reorth_threshold=reorth_threshold)
    if state is None:
        raise InvalidInputError("stream contained no usable columns")
    return state, n_skipped
