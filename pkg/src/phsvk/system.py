"""Finite-dimensional port-Hamiltonian model.

State equations, with blocks ordered ``(v, S, F)``::

    M_v dv/dt = -K(F) S + G_tau tau
    M_S dS/dt =  K(F)^T v + G_nu(F) nu
    M_F dF/dt =  Z v

Hamiltonian ``H = v^T M_v v / 2 + S^T M_S S / 2`` and collocated outputs
``y_N = G_tau^T v``, ``y_D = G_nu(F)^T S``, so that
``dH/dt = tau . y_N + nu . y_D``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import Assembler, ConstantOperators, Material, MixedSpaces
from .fem import interpolate
from .voigt import grad_to_vec

__all__ = ["State", "BoundaryInput", "PHSystem"]

Signal = Callable[[float], np.ndarray]


def _zero_signal(n: int) -> Signal:
    return lambda t: np.zeros(n)


@dataclass
class State:
    """Coefficient vectors of velocity, stress, deformation gradient and displacement."""

    v: np.ndarray
    S: np.ndarray
    F: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def copy(self) -> "State":
        return State(self.v.copy(), self.S.copy(), self.F.copy(), self.u.copy(), self.t)

    def midpoint(self, other: "State") -> "State":
        return State(
            0.5 * (self.v + other.v),
            0.5 * (self.S + other.S),
            0.5 * (self.F + other.F),
            0.5 * (self.u + other.u),
            0.5 * (self.t + other.t),
        )


@dataclass(frozen=True)
class BoundaryInput:
    """Time signals of the traction input ``tau`` and the velocity input ``nu``.

    Each signal maps ``t`` to its coefficient vector in the input basis
    (for uniform inputs: one entry per spatial component).
    """

    tau: Signal
    nu: Signal

    @classmethod
    def zero(cls, n_tau: int, n_nu: int) -> "BoundaryInput":
        return cls(_zero_signal(n_tau), _zero_signal(n_nu))

    def scaled(self, factor: float) -> "BoundaryInput":
        tau, nu = self.tau, self.nu
        return BoundaryInput(lambda t: factor * np.asarray(tau(t), float), lambda t: factor * np.asarray(nu(t), float))


@dataclass(eq=False)
class PHSystem:
    """Assembled port-Hamiltonian model on fixed mixed spaces.

    With ``linear=True`` the model is the frozen linear comparison model:
    ``K`` and ``G_nu`` are evaluated once at ``F = I`` and the deformation
    gradient does not evolve.
    """

    assembler: Assembler
    inputs: BoundaryInput
    linear: bool = False
    ops: ConstantOperators = field(init=False)
    F_identity: np.ndarray = field(init=False)
    _frozen: tuple | None = field(init=False, default=None, repr=False)
    _last: tuple | None = field(init=False, default=None, repr=False)
    _inverses: tuple | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.ops = self.assembler.constant_operators()
        d = self.assembler.d
        self.F_identity = interpolate(self.spaces.defgrad, grad_to_vec(np.eye(d)))
        if self.linear:
            self._frozen = self.assembler.state_operators(self.F_identity)

    @classmethod
    def build(
        cls,
        spaces: MixedSpaces,
        material: Material,
        inputs: BoundaryInput | None = None,
        linear: bool = False,
        input_basis: str = "uniform",
    ) -> "PHSystem":
        asm = Assembler(spaces, material, input_basis)
        if inputs is None:
            inputs = BoundaryInput.zero(asm.n_tau, asm.n_nu)
        return cls(asm, inputs, linear)

    @property
    def spaces(self) -> MixedSpaces:
        return self.assembler.spaces

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.assembler.n_v, self.assembler.n_S, self.assembler.n_F

    def frozen_linear(self) -> "PHSystem":
        """Linear elastodynamics counterpart on the same spaces and inputs."""
        return PHSystem(self.assembler, self.inputs, linear=True)

    def with_inputs(self, inputs: BoundaryInput) -> "PHSystem":
        return PHSystem(self.assembler, inputs, self.linear)

    # ----------------------------------------------------------------- states

    def initial_state(self, velocity=0.0, stress=0.0) -> State:
        """State with interpolated velocity and stress, ``F = I`` and zero displacement."""
        sv, ss = self.spaces.velocity, self.spaces.stress
        return State(
            interpolate(sv, velocity),
            interpolate(ss, stress),
            self.F_identity.copy(),
            np.zeros(sv.dim),
            0.0,
        )

    def operators(self, F_hat) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """``K`` and ``G_nu`` at ``F_hat`` (fixed at ``F = I`` for the linear model)."""
        if self.linear:
            return self._frozen
        if self._last is not None and np.array_equal(self._last[0], F_hat):
            return self._last[1]
        ops = self.assembler.state_operators(F_hat)
        self._last = (np.array(F_hat, dtype=float, copy=True), ops)
        return ops

    def mass_inverses(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Exact inverses of ``M_S`` and ``M_F``, block diagonal over cells (DG spaces)."""
        if self._inverses is None:
            sp_ = self.spaces
            self._inverses = (
                _block_inverse(self.ops.M_S, sp_.stress.cell_dofs),
                _block_inverse(self.ops.M_F, sp_.defgrad.cell_dofs),
            )
        return self._inverses

    def input_values(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        a = self.assembler
        tau = np.asarray(self.inputs.tau(t), dtype=float).reshape(a.n_tau)
        nu = np.asarray(self.inputs.nu(t), dtype=float).reshape(a.n_nu)
        return tau, nu

    # ------------------------------------------------------------- structure

    def hamiltonian(self, state: State) -> float:
        return 0.5 * float(state.v @ (self.ops.M_v @ state.v)) + 0.5 * float(state.S @ (self.ops.M_S @ state.S))

    def mass_matrix(self) -> sp.csr_matrix:
        o = self.ops
        return sp.block_diag([o.M_v, o.M_S, o.M_F], format="csr")

    def interconnection(self, F_hat) -> sp.csr_matrix:
        """Block operator ``J(F)``; skew-symmetric by construction."""
        K, _ = self.operators(F_hat)
        Z = self.ops.Z
        return sp.bmat([[None, -K, -Z.T], [K.T, None, None], [Z, None, None]], format="csr")

    def rhs(self, state: State, t: float, tau=None, nu=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Block right-hand sides ``M dx/dt`` at ``state`` and time ``t``.

        The deformation gradient block vanishes for the linear model.
        """
        if tau is None or nu is None:
            tau, nu = self.input_values(t)
        K, G_nu = self.operators(state.F)
        o = self.ops
        rv = -(K @ state.S) + o.G_tau @ tau
        rS = K.T @ state.v + G_nu @ nu
        rF = np.zeros(self.assembler.n_F) if self.linear else o.Z @ state.v
        return rv, rS, rF

    def outputs(self, state: State) -> tuple[np.ndarray, np.ndarray]:
        """Collocated outputs ``y_N = G_tau^T v`` and ``y_D = G_nu(F)^T S``."""
        _, G_nu = self.operators(state.F)
        return self.ops.G_tau.T @ state.v, G_nu.T @ state.S

    def supplied_power(self, state: State, tau, nu) -> float:
        """Boundary power ``v^T G_tau tau + S^T G_nu(F) nu``."""
        y_N, y_D = self.outputs(state)
        return float(y_N @ tau + y_D @ nu)

    def power_balance_residual(self, before: State, after: State, dt: float) -> float:
        """``H(after) - H(before) - dt * P_mid`` with inputs sampled at the midpoint time."""
        mid = before.midpoint(after)
        tau, nu = self.input_values(mid.t)
        return self.hamiltonian(after) - self.hamiltonian(before) - dt * self.supplied_power(mid, tau, nu)


def _block_inverse(M: sp.csr_matrix, blocks: np.ndarray) -> sp.csr_matrix:
    """Inverse of a matrix that is block diagonal over the index rows of ``blocks``."""
    n = M.shape[0]
    if blocks.size != n or np.unique(blocks).size != n:
        raise ValueError("blocks must partition the matrix indices")
    owner = np.empty(n, dtype=np.intp)
    owner[blocks] = np.arange(blocks.shape[0])[:, None]
    coo = M.tocoo()
    if np.any(owner[coo.row] != owner[coo.col]):
        raise ValueError("matrix is not block diagonal over the given blocks")
    rows = np.broadcast_to(blocks[:, :, None], blocks.shape + (blocks.shape[1],))
    cols = np.broadcast_to(blocks[:, None, :], rows.shape)
    loc = np.asarray(M.tocsr()[rows.ravel(), cols.ravel()]).reshape(rows.shape)
    inv = np.linalg.inv(loc)
    return sp.csr_matrix((inv.ravel(), (rows.ravel(), cols.ravel())), shape=M.shape)
