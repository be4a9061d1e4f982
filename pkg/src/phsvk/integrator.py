"""Implicit midpoint time stepping with Newton iterations on the stage equations."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .system import PHSystem, State

__all__ = [
    "IntegratorConfig",
    "NewtonDiverged",
    "LinearSolveFailed",
    "StepFailed",
    "NewtonRecord",
    "StepInfo",
    "Trajectory",
    "newton_solve",
    "step_midpoint",
    "run",
]

log = logging.getLogger(__name__)


class NewtonDiverged(RuntimeError):
    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(message)
        self.history = list(history)


class LinearSolveFailed(RuntimeError):
    pass


class StepFailed(RuntimeError):
    """A time step failed; ``step`` is the zero-based index of the failing step."""

    def __init__(self, step: int, t: float, cause: Exception):
        super().__init__(f"step {step} (t = {t:.6g} s) failed: {cause}")
        self.step = step
        self.t = t
        self.cause = cause


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    newton_tol: float = 1e-10
    max_newton_iter: int = 15
    jacobian_mode: str = "analytic"
    linear_solver: str = "block"

    def __post_init__(self):
        if not self.dt >= 0:
            raise ValueError(f"dt must be non-negative, got {self.dt}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_newton_iter < 1:
            raise ValueError("max_newton_iter must be >= 1")
        if self.jacobian_mode not in ("analytic", "finite_difference"):
            raise ValueError(f"unknown jacobian_mode {self.jacobian_mode!r}")
        if self.linear_solver not in ("block", "direct"):
            raise ValueError(f"unknown linear_solver {self.linear_solver!r}")


@dataclass
class NewtonRecord:
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.residual_norms) - 1

    @property
    def final_residual(self) -> float:
        return self.residual_norms[-1]

    def tail_ratio(self) -> float:
        """Last residual over the one before it (0 when no iteration was needed)."""
        r = self.residual_norms
        if len(r) < 2 or r[-2] == 0.0:
            return 0.0
        return r[-1] / r[-2]


def _factorize(A: sp.spmatrix):
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise LinearSolveFailed(str(exc)) from exc
    return lu


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], sp.spmatrix | np.ndarray],
    x0: np.ndarray,
    tol: float,
    max_iter: int,
    scale: float = 1.0,
    solve: Callable | None = None,
) -> tuple[np.ndarray, NewtonRecord]:
    """Newton's method until ``||R(x)|| / scale <= tol``.

    At least one update is taken unless the initial residual is exactly
    zero: a small but nonzero residual may still carry the whole solution
    when the state itself is small.

    Args:
        solve: optional ``solve(x, rhs) -> dx`` replacing the factorization of
            ``jacobian(x)`` (used to reuse a constant factorization).

    Raises:
        NewtonDiverged: tolerance not met after ``max_iter`` iterations; the
            exception carries the residual history.
        LinearSolveFailed: singular or non-finite linear stage solve.
    """
    x = np.array(x0, dtype=float)
    rec = NewtonRecord()
    r = residual(x)
    rec.residual_norms.append(float(np.linalg.norm(r)) / scale)
    for k in range(max_iter):
        if rec.residual_norms[-1] == 0.0 or (k > 0 and rec.residual_norms[-1] <= tol):
            rec.converged = True
            return x, rec
        if solve is not None:
            dx = solve(x, r)
        else:
            J = jacobian(x)
            if sp.issparse(J):
                dx = _factorize(J).solve(r)
            else:
                try:
                    dx = np.linalg.solve(J, r)
                except np.linalg.LinAlgError as exc:
                    raise LinearSolveFailed(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise LinearSolveFailed("non-finite Newton update")
        x = x - dx
        r = residual(x)
        rec.residual_norms.append(float(np.linalg.norm(r)) / scale)
    if rec.residual_norms[-1] <= tol:
        rec.converged = True
        return x, rec
    raise NewtonDiverged(
        f"Newton did not reach {tol:g} in {max_iter} iterations (last {rec.residual_norms[-1]:.3e})",
        rec.residual_norms,
    )


@dataclass
class StepInfo:
    t: float
    dt: float
    newton: NewtonRecord
    power: float
    balance_residual: float
    short_step: bool = False


class _Stage:
    """Residual and Jacobian of one implicit midpoint stage."""

    def __init__(self, system: PHSystem, state: State, dt: float):
        self.system = system
        self.state = state
        self.dt = dt
        self.t_mid = state.t + 0.5 * dt
        self.tau, self.nu = system.input_values(self.t_mid)
        n_v, n_S, n_F = system.sizes
        self.n_v, self.n_S = n_v, n_S
        self.nonlinear = not system.linear
        o = system.ops
        self.M = system.mass_matrix() if self.nonlinear else sp.block_diag([o.M_v, o.M_S], format="csr")
        self.x0 = self.pack(state)
        self.Mx0 = self.M @ self.x0

    def pack(self, s: State) -> np.ndarray:
        parts = [s.v, s.S, s.F] if self.nonlinear else [s.v, s.S]
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = x[: self.n_v]
        S = x[self.n_v : self.n_v + self.n_S]
        F = x[self.n_v + self.n_S :] if self.nonlinear else self.state.F
        return v, S, F

    def mid(self, x: np.ndarray) -> State:
        v, S, F = self.unpack(0.5 * (self.x0 + x))
        if not self.nonlinear:
            F = self.state.F
        return State(v, S, F, self.state.u, self.t_mid)

    def residual(self, x: np.ndarray) -> np.ndarray:
        rv, rS, rF = self.system.rhs(self.mid(x), self.t_mid, self.tau, self.nu)
        f = np.concatenate([rv, rS, rF] if self.nonlinear else [rv, rS])
        return self.M @ x - self.Mx0 - self.dt * f

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        m = self.mid(x)
        K, _ = self.system.operators(m.F)
        h = 0.5 * self.dt
        if not self.nonlinear:
            return (self.M + h * sp.bmat([[None, K], [-K.T, None]])).tocsr()
        dKS, dKv, dGnu = self.system.assembler.jacobian_blocks(m.F, m.S, m.v, self.nu)
        Z = self.system.ops.Z
        A = sp.bmat([[None, K, dKS], [-K.T, None, -(dKv + dGnu)], [-Z, None, None]], format="csr")
        return (self.M + h * A).tocsr()

    def _split(self, r: np.ndarray):
        a, b = self.n_v, self.n_v + self.n_S
        return r[:a], r[a:b], r[b:]

    def linear_schur(self) -> sp.csr_matrix:
        K, _ = self.system.operators(self.state.F)
        MSi, _ = self.system.mass_inverses()
        h = 0.5 * self.dt
        return (self.system.ops.M_v + h * h * (K @ (MSi @ K.T))).tocsr()

    def block_solve(self, x: np.ndarray, r: np.ndarray, lu=None) -> np.ndarray:
        """Solve ``jacobian(x) @ dx = r`` by eliminating the stress and deformation blocks.

        ``M_S`` and ``M_F`` are block diagonal over cells, so their inverses
        are exact and sparse; only a velocity-sized system is factorized.
        """
        h = 0.5 * self.dt
        system = self.system
        MSi, MFi = system.mass_inverses()
        r1, r2, r3 = self._split(r)
        m = self.mid(x)
        K, _ = system.operators(m.F)
        if not self.nonlinear:
            if lu is None:
                lu = _factorize(self.linear_schur())
            a = lu.solve(r1 - h * (K @ (MSi @ r2)))
            b = MSi @ (r2 + h * (K.T @ a))
            return np.concatenate([a, b])
        dKS, dKv, dGnu = system.assembler.jacobian_blocks(m.F, m.S, m.v, self.nu)
        B = (dKv + dGnu).tocsr()
        Z = system.ops.Z
        MFiZ = MFi @ Z
        W = h * K.T + (h * h) * (B @ MFiZ)
        schur = system.ops.M_v + h * (K @ (MSi @ W)) + (h * h) * (dKS @ MFiZ)
        s3 = MFi @ r3
        a = _factorize(schur).solve(r1 - h * (K @ (MSi @ (r2 + h * (B @ s3)))) - h * (dKS @ s3))
        c = s3 + h * (MFi @ (Z @ a))
        b = MSi @ (r2 + h * (K.T @ a) + h * (B @ c))
        return np.concatenate([a, b, c])

    def fd_jacobian(self, x: np.ndarray, eps: float = 1e-7) -> np.ndarray:
        n = x.size
        J = np.empty((n, n))
        for k in range(n):
            e = np.zeros(n)
            step = eps * max(1.0, abs(x[k]))
            e[k] = step
            J[:, k] = (self.residual(x + e) - self.residual(x - e)) / (2.0 * step)
        return J

    def result(self, x: np.ndarray) -> State:
        v, S, F = self.unpack(x)
        v_mid = 0.5 * (self.state.v + v)
        u = self.state.u + self.dt * v_mid
        return State(v.copy(), S.copy(), np.array(F, copy=True), u, self.state.t + self.dt)


class _LinearCache:
    """Factorization of the constant stage matrix of a frozen linear system."""

    def __init__(self):
        self.key = None
        self.lu = None

    def solver(self, stage: _Stage, block: bool):
        key = (id(stage.system), stage.dt, block)
        if key != self.key:
            self.lu = _factorize(stage.linear_schur() if block else stage.jacobian(stage.x0))
            self.key = key
        lu = self.lu
        if block:
            return lambda x, r: stage.block_solve(x, r, lu)
        return lambda x, r: lu.solve(r)


def step_midpoint(
    system: PHSystem,
    state: State,
    config: IntegratorConfig,
    dt: float | None = None,
    _cache: _LinearCache | None = None,
) -> tuple[State, StepInfo]:
    """One implicit midpoint step from ``state`` (at ``state.t``) of size ``dt``.

    Solves ``M (x+ - x) - dt f((x + x+) / 2, t + dt / 2) = 0`` for
    ``x = (v, S, F)`` (``(v, S)`` for the linear model) and updates the
    displacement with the midpoint velocity.
    """
    dt = config.dt if dt is None else dt
    stage = _Stage(system, state, dt)
    scale = max(1.0, float(np.linalg.norm(stage.Mx0)))
    solve = None
    if config.jacobian_mode == "finite_difference":
        jac = stage.fd_jacobian
    else:
        jac = stage.jacobian
        block = config.linear_solver == "block"
        if system.linear and _cache is not None:
            solve = _cache.solver(stage, block)
        elif block:
            solve = stage.block_solve
    x, rec = newton_solve(stage.residual, jac, stage.x0, config.newton_tol, config.max_newton_iter, scale, solve)
    new = stage.result(x)
    mid = state.midpoint(new)
    power = system.supplied_power(mid, stage.tau, stage.nu)
    balance = system.hamiltonian(new) - system.hamiltonian(state) - dt * power
    return new, StepInfo(new.t, dt, rec, power, balance)


@dataclass
class Trajectory:
    """Per-step diagnostics; index 0 is the initial state."""

    t: list[float] = field(default_factory=list)
    H: list[float] = field(default_factory=list)
    power: list[float] = field(default_factory=list)
    balance_residual: list[float] = field(default_factory=list)
    y_N: list[np.ndarray] = field(default_factory=list)
    y_D: list[np.ndarray] = field(default_factory=list)
    newton_iterations: list[int] = field(default_factory=list)
    newton_records: list[NewtonRecord] = field(default_factory=list)
    short_step: list[bool] = field(default_factory=list)
    final_state: State | None = None

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.array(self.t),
            "H": np.array(self.H),
            "power": np.array(self.power),
            "balance_residual": np.array(self.balance_residual),
            "newton_iterations": np.array(self.newton_iterations),
        }


Recorder = Callable[[int, State, StepInfo | None], None]


def step_times(dt: float, t_end: float) -> list[float]:
    """Step sizes covering ``[0, t_end]``; a remainder becomes one shorter final step."""
    if dt <= 0:
        raise ValueError("dt must be positive for a run")
    n = int(math.floor(t_end / dt + 1e-9))
    steps = [dt] * n
    rest = t_end - n * dt
    if rest > 1e-9 * dt:
        steps.append(rest)
    return steps


def run(
    system: PHSystem,
    state: State,
    config: IntegratorConfig,
    recorders: Sequence[Recorder] = (),
) -> Trajectory:
    """Integrate from ``state`` to ``config.t_end``.

    Every recorder is called as ``recorder(step_index, state, info)`` for the
    initial state (``info=None``) and after each accepted step.
    """
    traj = Trajectory()
    y_N, y_D = system.outputs(state)
    traj.t.append(state.t)
    traj.H.append(system.hamiltonian(state))
    traj.power.append(0.0)
    traj.balance_residual.append(0.0)
    traj.y_N.append(y_N)
    traj.y_D.append(y_D)
    traj.newton_iterations.append(0)
    traj.short_step.append(False)
    for rec in recorders:
        rec(0, state, None)

    cache = _LinearCache() if system.linear else None
    t0 = state.t
    steps = step_times(config.dt, config.t_end - t0)
    for k, h in enumerate(steps):
        try:
            state, info = step_midpoint(system, state, config, dt=h, _cache=cache)
        except (NewtonDiverged, LinearSolveFailed) as exc:
            raise StepFailed(k, state.t, exc) from exc
        info.short_step = h != config.dt
        # clock from the step count, so input switching times are not hit by round-off drift
        state.t = config.t_end if info.short_step else t0 + (k + 1) * config.dt
        info.t = state.t
        y_N, y_D = system.outputs(state)
        traj.t.append(state.t)
        traj.H.append(system.hamiltonian(state))
        traj.power.append(info.power)
        traj.balance_residual.append(info.balance_residual)
        traj.y_N.append(y_N)
        traj.y_D.append(y_D)
        traj.newton_iterations.append(info.newton.iterations)
        traj.newton_records.append(info.newton)
        traj.short_step.append(info.short_step)
        for rec in recorders:
            rec(k + 1, state, info)
        if k % 500 == 0:
            log.debug("t = %.4f s, H = %.6e J, newton = %d", state.t, traj.H[-1], info.newton.iterations)
    traj.final_state = state
    return traj
