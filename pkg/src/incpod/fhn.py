"""1D FitzHugh-Nagumo snapshot generator on a piecewise-linear FEM grid.

The two-field system on (0, 1)

    v_t = mu v_xx - w/mu + f(v)/mu + c/mu,   f(v) = v (v - 0.1)(1 - v)
    w_t = b v - gamma w + c

with Neumann data v_x(t, 0) = -A t^3 exp(-15 t), v_x(t, 1) = 0 and zero
initial conditions is discretized with continuous piecewise linear
elements on equally spaced nodes. The nonlinearity is handled with
interpolated coefficients: f is evaluated nodewise and multiplied by the
mass matrix, so no quadrature of the cubic is needed. Snapshots are the
stacked coefficient vectors [v; w] at the accepted times of an adaptive
implicit integrator, scaled by sqrt of the local time step (rectangle-rule
quadrature weights in time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import IntegrationFailureError, InvalidInputError
from .weighted_linalg import WeightMatrix

__all__ = [
    "FhnParams",
    "Mesh1D",
    "StepperConfig",
    "SnapshotSet",
    "assemble_fem",
    "build_weight_matrix",
    "neumann_forcing",
    "simulate",
]

# TR-BDF2: one-step, L-stable, second order, with an embedded third-order
# error weight vector. Both implicit stages share the iteration matrix
# M - (g/2) h J.
_GAMMA = 2.0 - math.sqrt(2.0)
_D = _GAMMA / 2.0  # shared implicit coefficient; also the b3 weight
_B1 = math.sqrt(2.0) / 4.0  # = b2
_EHAT = ((1.0 - math.sqrt(2.0)) / 3.0, 1.0 / 3.0, (math.sqrt(2.0) - 2.0) / 3.0)


@dataclass(frozen=True)
class FhnParams:
    """Physical constants; ``bc_amplitude`` scales the boundary flux pulse."""

    mu: float = 0.015
    b: float = 0.5
    gamma: float = 2.0
    c_const: float = 0.05
    bc_amplitude: float = 50000.0

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError("diffusion coefficient mu must be positive")


@dataclass(frozen=True)
class Mesh1D:
    """Equally spaced nodes on [0, 1]."""

    nodes: int

    def __post_init__(self):
        if self.nodes < 2:
            raise InvalidInputError("mesh needs at least 2 nodes")

    @property
    def h(self):
        return 1.0 / (self.nodes - 1)

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.nodes)


@dataclass(frozen=True)
class StepperConfig:
    rtol: float = 1e-6
    atol: float = 1e-8
    h0: float = 1e-4
    h_min: float = 1e-13
    h_max: float = np.inf
    max_steps: int = 1_000_000
    newton_maxiter: int = 8
    newton_tol: float = 0.03


@dataclass
class SnapshotSet:
    """Accepted-time snapshot columns, scaled by their sqrt(dt) weights."""

    times: np.ndarray
    columns: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def count(self):
        return self.times.size

    @property
    def m(self):
        return self.columns.shape[0]

    def raw_columns(self):
        """Unscale: divide each column by its stored weight."""
        return self.columns / self.weights


def assemble_fem(mesh):
    """P1 mass and stiffness matrices on the unit interval (sparse).

    Mass: interior diagonal 2h/3, off-diagonal h/6, boundary diagonal h/3.
    Stiffness (Neumann): interior diagonal 2/h, off-diagonal -1/h,
    boundary diagonal 1/h.
    """
    n, h = mesh.nodes, mesh.h
    main_m = np.full(n, 2.0 * h / 3.0)
    main_m[0] = main_m[-1] = h / 3.0
    off_m = np.full(n - 1, h / 6.0)
    mass = scipy.sparse.diags([off_m, main_m, off_m], [-1, 0, 1], format="csr")

    main_k = np.full(n, 2.0 / h)
    main_k[0] = main_k[-1] = 1.0 / h
    off_k = np.full(n - 1, -1.0 / h)
    stiffness = scipy.sparse.diags([off_k, main_k, off_k], [-1, 0, 1], format="csr")
    return mass, stiffness


def build_weight_matrix(mesh):
    """Weight matrix for the stacked [v; w] coefficient vector: the
    product-L2 inner product, i.e. block diagonal (mass, mass)."""
    mass, _ = assemble_fem(mesh)
    return WeightMatrix(scipy.sparse.block_diag([mass, mass], format="csr"))


def neumann_forcing(t, params):
    """Weak-form boundary term added to the first v equation.

    Integration by parts of mu v_xx against the first basis function
    leaves -mu v_x(t,0) phi_1(0) = mu A t^3 exp(-15 t).
    """
    return params.mu * params.bc_amplitude * t**3 * np.exp(-15.0 * t)


def _f_cubic(v):
    return v * (v - 0.1) * (1.0 - v)


def _f_cubic_prime(v):
    return -3.0 * v**2 + 2.2 * v - 0.1


class _FhnSystem:
    """Semidiscrete right-hand side M_sys y' = F(t, y) and its Jacobian."""

    def __init__(self, params, mesh):
        self.params = params
        self.n = mesh.nodes
        self.mass, self.stiff = assemble_fem(mesh)
        self.msys = scipy.sparse.block_diag([self.mass, self.mass], format="csc")
        self.mass_one = self.mass @ np.ones(self.n)
        p = params
        self._const_v = (p.c_const / p.mu) * self.mass_one
        self._const_w = p.c_const * self.mass_one
        # constant Jacobian blocks; only d(Bv')/dv changes with v
        self._jvw = -(1.0 / p.mu) * self.mass
        self._jwv = p.b * self.mass
        self._jww = -p.gamma * self.mass

    def rhs(self, t, y):
        p, n = self.params, self.n
        v, w = y[:n], y[n:]
        Fv = (
            -p.mu * (self.stiff @ v)
            - (1.0 / p.mu) * (self.mass @ w)
            + (1.0 / p.mu) * (self.mass @ _f_cubic(v))
            + self._const_v
        )
        Fv[0] += neumann_forcing(t, p)
        Fw = p.b * (self.mass @ v) - p.gamma * (self.mass @ w) + self._const_w
        return np.concatenate([Fv, Fw])

    def jacobian(self, y):
        p, n = self.params, self.n
        v = y[:n]
        jvv = -p.mu * self.stiff + (1.0 / p.mu) * (
            self.mass @ scipy.sparse.diags(_f_cubic_prime(v))
        )
        return scipy.sparse.bmat(
            [[jvv, self._jvw], [self._jwv, self._jww]], format="csc"
        )


def _scaled_rms(vec, scale):
    return float(np.sqrt(np.mean((vec / scale) ** 2)))


def simulate(params, mesh, t_final, stepper_cfg=None, scale=True):
    """Integrate the semidiscrete system from zero initial data to t_final.

    Uses TR-BDF2 with Newton inner solves on the sparse iteration matrix
    and a filtered embedded error estimate; the step sequence is fully
    deterministic for fixed inputs. Returns a :class:`SnapshotSet` with one
    column per accepted step (the zero initial state is excluded), scaled
    by sqrt(dt) unless ``scale`` is False (weights are still recorded).

    Raises :class:`IntegrationFailureError` with the last reached time if
    the step size underflows or the step budget runs out.
    """
    if not t_final > 0.0:
        raise InvalidInputError("t_final must be positive")
    cfg = stepper_cfg or StepperConfig()
    sys_ = _FhnSystem(params, mesh)
    m = 2 * mesh.nodes

    t = 0.0
    y = np.zeros(m)
    f_now = sys_.rhs(t, y)
    h = min(cfg.h0, t_final, cfg.h_max)

    times, raws, weights = [], [], []
    steps = 0
    while t < t_final:
        if steps >= cfg.max_steps:
            raise IntegrationFailureError(
                f"step budget {cfg.max_steps} exhausted at t={t:.6g}", t_reached=t
            )
        if h < cfg.h_min:
            raise IntegrationFailureError(
                f"step size underflow at t={t:.6g}", t_reached=t
            )
        h = min(h, t_final - t)
        steps += 1

        J = sys_.jacobian(y)
        lu = scipy.sparse.linalg.splu((sys_.msys - (_D * h) * J).tocsc())
        wt = cfg.atol + cfg.rtol * np.abs(y)

        def stage(y_guess, t_stage, rhs_fixed):
            """Solve M(Y - y) = rhs_fixed + d*h*F(t_stage, Y) by Newton."""
            Y = y_guess.copy()
            for _ in range(cfg.newton_maxiter):
                G = sys_.msys @ (Y - y) - rhs_fixed - (_D * h) * sys_.rhs(t_stage, Y)
                delta = lu.solve(-G)
                Y += delta
                if _scaled_rms(delta, wt) <= cfg.newton_tol:
                    return Y
            return None

        y2 = stage(y, t + _GAMMA * h, (_D * h) * f_now)
        f2 = None if y2 is None else sys_.rhs(t + _GAMMA * h, y2)
        y3 = (
            None
            if y2 is None
            else stage(y2, t + h, h * (_B1 * f_now + _B1 * f2))
        )
        if y3 is None:
            h *= 0.25
            continue
        f3 = sys_.rhs(t + h, y3)

        est_rhs = h * (_EHAT[0] * f_now + _EHAT[1] * f2 + _EHAT[2] * f3)
        est = lu.solve(est_rhs)
        err = _scaled_rms(est, cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y3)))

        if err <= 1.0:
            t_prev = t
            t = t + h
            y = y3
            f_now = f3
            times.append(t)
            raws.append(y.copy())
            weights.append(np.sqrt(t - t_prev))  # dt from recorded times
            h = h * min(5.0, max(0.2, 0.9 * err ** (-1.0 / 3.0) if err > 0 else 5.0))
        else:
            h = h * max(0.1, min(0.5, 0.9 * err ** (-1.0 / 3.0)))
        h = min(h, cfg.h_max)

    weights = np.asarray(weights)
    raw_matrix = np.column_stack(raws)
    columns = raw_matrix * weights if scale else raw_matrix
    return SnapshotSet(
        times=np.asarray(times),
        columns=columns,
        weights=weights,
    )
