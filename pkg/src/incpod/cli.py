"""Command-line front end: simulate, pod, verify, report.

Paths are prefix-based: ``simulate --output runs/fhn`` writes
``runs/fhn.pods`` (snapshot stream) and ``runs/fhn.wm`` (weight matrix);
the other subcommands read the same pair via ``--input``.

Exit codes: 0 success, 1 usage, 2 data/format error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    FormatError,
    IntegrationFailureError,
    InvalidInputError,
    NotPositiveDefiniteError,
    PreconditionViolationError,
    ZeroColumnError,
)
from .fhn import FhnParams, Mesh1D, build_weight_matrix, simulate
from .incremental import Tolerances, initialize, pod_output, update
from .io_formats import (
    checkpoint,
    read_stream,
    read_stream_matrix,
    read_weight_matrix,
    restore,
    write_csv,
    write_stream,
    write_weight_matrix,
)
from .oracle import exact_weighted_svd, tolerance_sweep
from .perturbation import vector_bound_check
from .weighted_linalg import WeightMatrix, m_inner, m_norm

VERIFY_GRID = tuple(
    Tolerances(t, tsv) for t in (1e-8, 1e-10, 1e-12) for tsv in (1e-8, 1e-10, 1e-12)
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    """Validated flags shared by the subcommands."""

    subcommand: str
    tol: float = 1e-10
    tol_sv: float = 1e-10
    nodes: int = 500
    t_final: float = 10.0
    input: str | None = None
    output: str | None = None
    checkpoint_every: int = 0
    keep_w: bool = True
    seed: int = 0
    random: tuple[int, int, int] | None = None
    resume: str | None = None
    max_columns: int = 20000
    deterministic: bool = True

    def __post_init__(self):
        if not (self.tol > 0.0 and self.tol_sv > 0.0):
            raise UsageError("tolerances must be positive")
        if self.nodes < 2:
            raise UsageError("--nodes must be at least 2")
        if self.t_final <= 0.0:
            raise UsageError("--t-final must be positive")
        if self.input and self.output and self.input == self.output:
            raise UsageError("--input and --output prefixes must differ")
        if self.checkpoint_every < 0:
            raise UsageError("--checkpoint-every must be nonnegative")


def build_parser():
    parser = _Parser(prog="incpod", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, with_tols=True):
        if with_tols:
            p.add_argument("--tol", type=float, default=1e-10)
            p.add_argument("--tol-sv", type=float, default=1e-10)
        p.add_argument("--input")
        p.add_argument("--output", required=True)
        p.add_argument("--seed", type=int, default=0)

    p_sim = sub.add_parser("simulate", help="generate FHN snapshots + weight matrix")
    p_sim.add_argument("--nodes", type=int, default=500)
    p_sim.add_argument("--t-final", type=float, default=10.0)
    add_common(p_sim, with_tols=False)

    p_pod = sub.add_parser("pod", help="stream the snapshots through the SVD update")
    add_common(p_pod)
    p_pod.add_argument("--checkpoint-every", type=int, default=0)
    p_pod.add_argument("--no-w", action="store_true", help="skip right singular vectors")
    p_pod.add_argument("--resume", help="checkpoint file to continue from")

    p_ver = sub.add_parser("verify", help="tolerance sweep against the exact oracle")
    add_common(p_ver)
    p_ver.add_argument("--max-columns", type=int, default=20000)
    p_ver.add_argument(
        "--random",
        nargs=3,
        type=int,
        metavar=("M", "N", "SEED"),
        help="verify on a random m x n instance instead of --input",
    )

    p_rep = sub.add_parser("report", help="singular value / mode error CSVs")
    add_common(p_rep)
    return parser


def _config_from_args(args):
    fields = {
        "subcommand": args.subcommand,
        "input": getattr(args, "input", None),
        "output": args.output,
        "seed": args.seed,
        "deterministic": os.environ.get("POD_DETERMINISTIC", "1") != "0",
    }
    for name in ("tol", "tol_sv", "nodes", "t_final", "checkpoint_every",
                 "max_columns", "resume"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    if getattr(args, "no_w", False):
        fields["keep_w"] = False
    if getattr(args, "random", None):
        fields["random"] = tuple(args.random)
    return RunConfig(**fields)


def _load_inputs(cfg, materialize=False):
    if not cfg.input:
        raise UsageError("--input is required for this subcommand")
    M = read_weight_matrix(cfg.input + ".wm")
    if materialize:
        times, weights, U = read_stream_matrix(
            cfg.input + ".pods", max_columns=cfg.max_columns
        )
        if U.shape[0] != M.dim:
            raise FormatError(
                f"stream dimension {U.shape[0]} does not match weight matrix {M.dim}"
            )
        return M, U
    reader = read_stream(cfg.input + ".pods")
    if reader.m != M.dim:
        reader.close()
        raise FormatError(
            f"stream dimension {reader.m} does not match weight matrix {M.dim}"
        )
    return M, reader


def cmd_simulate(cfg):
    t0 = time.perf_counter()
    mesh = Mesh1D(cfg.nodes)
    snaps = simulate(FhnParams(), mesh, cfg.t_final)
    M = build_weight_matrix(mesh)
    write_stream(cfg.output + ".pods", snaps.times, snaps.weights, snaps.columns)
    write_weight_matrix(cfg.output + ".wm", M)
    wall = time.perf_counter() - t0
    print(f"s={snaps.count} m={snaps.m} wall={wall:.2f}s")
    return 0


def _atomic_checkpoint(state, path, tols):
    tmp = path + ".tmp"
    checkpoint(state, tmp, tols)
    os.replace(tmp, path)


class _TraceWriter:
    """Streams per-column trace rows so memory stays O(m k)."""

    def __init__(self, fh):
        import csv

        self._writer = csv.writer(fh)
        self._writer.writerow(["n", "k", "p", "e_p", "e_sv", "e"])

    def row(self, n, k, p, e_p, e_sv, e):
        self._writer.writerow(
            [str(n), str(k), f"{p:.17g}", f"{e_p:.17g}", f"{e_sv:.17g}", f"{e:.17g}"]
        )


def cmd_pod(cfg):
    M, reader = _load_inputs(cfg)
    tols = Tolerances(cfg.tol, cfg.tol_sv)
    ckpt_path = cfg.output + ".podc"
    init_tol = 1e-14 * float(np.sqrt(np.max(M.diagonal())))

    state = None
    replay = 0  # columns the restored state already consumed
    if cfg.resume:
        state, tols = restore(cfg.resume)
        replay = state.n

    with reader, open(cfg.output + "_trace.csv", "w", newline="") as trace_fh:
        trace = _TraceWriter(trace_fh)
        for t, w, c in reader:
            if replay > 0:
                # replay the original consume/skip decisions: only columns
                # ahead of the first consumed one can have been skipped
                before_first_consumed = replay == state.n
                if before_first_consumed and m_norm(c, M) <= init_tol:
                    continue
                replay -= 1
                continue
            if state is None:
                try:
                    state = initialize(c, M, keep_w=cfg.keep_w)
                except ZeroColumnError:
                    continue
                trace.row(state.n, state.k, 0.0, 0.0, 0.0, state.e)
            else:
                state, rep = update(state, c, M, tols)
                trace.row(state.n, state.k, rep.p, rep.e_p, rep.e_sv, state.e)
            if cfg.checkpoint_every and state.n % cfg.checkpoint_every == 0:
                if state.W is not None:
                    _atomic_checkpoint(state, ckpt_path, tols)
        if state is None:
            raise InvalidInputError("stream contained no usable columns")

    if state.W is not None:
        _atomic_checkpoint(state, ckpt_path, tols)
    modes, eigenvalues = pod_output(state)
    write_csv(
        cfg.output + "_eigenvalues.csv",
        ["index", "sigma", "eigenvalue"],
        [(i + 1, state.sigma[i], eigenvalues[i]) for i in range(state.k)],
    )
    print(
        f"n={state.n} rank={state.k} e={state.e:.6e} T_p={state.T_p} T_sv={state.T_sv}"
    )
    return 0


def _mode_errors(exact, state, M, count):
    errs = []
    for j in range(count):
        v_ex = exact.V[:, j]
        v_in = state.V[:, j]
        if m_inner(v_in, v_ex, M) < 0.0:
            v_in = -v_in
        errs.append(m_norm(v_ex - v_in, M))
    return errs


def _distinct_prefix(sigma, k):
    """Largest usable k with sigma_1 > ... > sigma_{k+1} > 0."""
    usable = 0
    for j in range(min(k, sigma.size - 1)):
        if sigma[j + 1] <= 0.0 or sigma[j + 1] >= sigma[j]:
            break
        usable = j + 1
    return usable


def cmd_verify(cfg):
    if cfg.random:
        m, n, seed = cfg.random
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, m))
        M = WeightMatrix(((A @ A.T) + (A @ A.T).T) / 2.0 + m * np.eye(m))
        U = rng.standard_normal((m, n))
        grid = [Tolerances(1e-300, 1e-300)]
    else:
        M, U = _load_inputs(cfg, materialize=True)
        grid = list(VERIFY_GRID)

    ex = exact_weighted_svd(U, M)
    sigma1 = ex.sigma[0] if ex.k else 0.0
    rows = tolerance_sweep(U, M, grid)
    out_rows = []
    for row in rows:
        dominated = row.exact_error <= row.incr_error_bound + 1e-10 * sigma1
        out_rows.append(row.csv_values() + (dominated,))
    write_csv(
        cfg.output + "_sweep.csv",
        ["tol", "tol_sv", "rank", "exact_error", "incr_error_bound", "dominated"],
        out_rows,
    )

    # vector/value bound report for the tightest-tolerance run
    tight = min(rows, key=lambda r: (r.tol, r.tol_sv))
    eps = max(tight.incr_error_bound, np.finfo(float).tiny)
    k = _distinct_prefix(ex.sigma, min(30, tight.state.k))
    if k >= 1:
        bound_rows = vector_bound_check(ex, tight.state, M, eps, k)
        write_csv(
            cfg.output + "_modes.csv",
            ["j", "sigma_j", "eps_j", "E_j", "gap_ok", "v_err", "v_bound",
             "w_err", "w_bound"],
            [r.csv_values() for r in bound_rows],
        )
    all_dominated = all(r[-1] for r in out_rows)
    print(f"rows={len(out_rows)} dominated={'all' if all_dominated else 'VIOLATED'}")
    return 0 if all_dominated else 3


def cmd_report(cfg):
    M, U = _load_inputs(cfg, materialize=True)
    tols = Tolerances(cfg.tol, cfg.tol_sv)
    rows = tolerance_sweep(U, M, [tols])
    state = rows[0].state
    ex = exact_weighted_svd(U, M)

    count = max(ex.k, state.k)
    sv_rows = []
    for j in range(count):
        sv_rows.append(
            (
                j + 1,
                ex.sigma[j] if j < ex.k else None,
                state.sigma[j] if j < state.k else None,
            )
        )
    write_csv(
        cfg.output + "_singular_values.csv",
        ["index", "exact_sigma", "incremental_sigma"],
        sv_rows,
    )

    shared = min(ex.k, state.k)
    errs = _mode_errors(ex, state, M, shared)
    write_csv(
        cfg.output + "_mode_errors.csv",
        ["index", "sigma", "m_norm_error"],
        [(j + 1, ex.sigma[j], errs[j]) for j in range(shared)],
    )
    print(f"rank={state.k} e={state.e:.6e} exact_error={rows[0].exact_error:.6e}")
    return 0


_DISPATCH = {
    "simulate": cmd_simulate,
    "pod": cmd_pod,
    "verify": cmd_verify,
    "report": cmd_report,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return _DISPATCH[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, InvalidInputError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (
        IntegrationFailureError,
        NotPositiveDefiniteError,
        PreconditionViolationError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
