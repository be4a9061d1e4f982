"""Benchmark scenarios: build the model from a config, integrate, write artifacts."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import Material, dump_matrix_market, mass_spectra, mixed_spaces
from .config import ScenarioConfig, apply_overrides
from .integrator import IntegratorConfig, StepInfo, Trajectory, run, step_times
from .mesh import interval_mesh, rect_tri_mesh
from .system import BoundaryInput, PHSystem, State
from .writers import cell_values, node_values, write_csv, write_vtk

__all__ = ["ScenarioResult", "build_system", "integrator_config", "run_rod", "run_beam", "run_scenario"]

log = logging.getLogger(__name__)

HAMILTONIAN_HEADER = ["t [s]", "H [J]", "power_in [W]", "balance_residual [J]"]
ROD_BOUNDARY_HEADER = ["t [s]", "nu_bar [m/s]", "v_at_0 [m/s]", "tau_bar [N]", "FS_at_L [N]", "v_at_L [m/s]"]
SOLVER_HEADER = ["step", "t [s]", "newton_iterations", "final_residual", "tail_ratio", "short_step"]


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    system: PHSystem
    trajectory: Trajectory
    files: dict[str, str] = field(default_factory=dict)
    series: dict[str, np.ndarray] = field(default_factory=dict)


def build_system(config: ScenarioConfig, linear: bool | None = None, scale: float = 1.0) -> tuple[PHSystem, State]:
    """Model and initial state described by ``config``.

    ``scale`` multiplies both input signals (used for small-amplitude studies).
    """
    lengths, elements = config.geometry.lengths, config.mesh.elements
    m = config.material
    if config.dim == 1:
        mesh = interval_mesh(lengths[0], elements[0])
        material = Material.rod(m.rho0, m.young, m.area)
    else:
        mesh = rect_tri_mesh(lengths[0], lengths[1], elements[0], elements[1])
        material = Material.lame(m.rho0, m.lam, m.mu, 2)
    deg = config.degrees
    spaces = mixed_spaces(mesh, deg.velocity, deg.stress, deg.defgrad)
    tau = config.loading.traction.function(scale)
    nu = config.loading.velocity.function(scale)
    system = PHSystem.build(
        spaces,
        material,
        linear=config.linear if linear is None else linear,
        input_basis=config.loading.input_basis,
    )
    if config.loading.input_basis == "trace":
        # nodal coefficients of the uniform boundary field
        a = system.assembler
        tau = _on_trace(tau, a.neumann_dofs % a.d)
        nu = _on_trace(nu, a.dirichlet_dofs % a.d)
    system = system.with_inputs(BoundaryInput(tau, nu))
    init = config.initial
    stress = np.asarray(init.stress, dtype=float) if init.stress is not None else 0.0
    state = system.initial_state(velocity=np.asarray(init.velocity, dtype=float), stress=stress)
    return system, state


def _on_trace(signal, components: np.ndarray):
    return lambda t: np.asarray(signal(t), dtype=float)[components]


def integrator_config(config: ScenarioConfig) -> IntegratorConfig:
    s = config.solver
    return IntegratorConfig(
        dt=config.time.dt,
        t_end=config.time.t_end,
        newton_tol=s.newton_tol,
        max_newton_iter=s.max_newton_iter,
        jacobian_mode=s.jacobian,
        linear_solver=s.linear_solver,
    )


class _StatsRecorder:
    def __init__(self):
        self.rows: list[tuple] = []

    def __call__(self, k: int, state: State, info: StepInfo | None) -> None:
        if info is None:
            return
        rec = info.newton
        self.rows.append((k, state.t, rec.iterations, rec.final_residual, rec.tail_ratio(), info.short_step))


class _VtkRecorder:
    def __init__(self, system: PHSystem, directory: str, prefix: str, every: int, n_steps: int):
        self.system, self.directory, self.prefix = system, directory, prefix
        self.every, self.n_steps = every, n_steps
        self.paths: list[str] = []

    def __call__(self, k: int, state: State, info: StepInfo | None) -> None:
        if self.every <= 0 or (k % self.every and k != self.n_steps):
            return
        sp_ = self.system.spaces
        path = os.path.join(self.directory, f"{self.prefix}_{k:06d}.vtk")
        write_vtk(
            sp_.mesh,
            path,
            point_vectors={
                "displacement": node_values(sp_.velocity, state.u),
                "velocity": node_values(sp_.velocity, state.v),
            },
            cell_arrays={
                "stress": cell_values(sp_.stress, state.S),
                "defgrad": cell_values(sp_.defgrad, state.F),
            },
            title=f"{self.prefix} t={state.t:.6f} s",
        )
        self.paths.append(path)


def _log_spectra(system: PHSystem) -> None:
    if log.isEnabledFor(logging.INFO):
        for name, s in mass_spectra(system.assembler, system.ops).items():
            log.info("%s: eigenvalues in [%.3e, %.3e], condition %.3e", name, s.lambda_min, s.lambda_max, s.condition)


def _hamiltonian_rows(traj: Trajectory):
    return zip(traj.t, traj.H, traj.power, traj.balance_residual)


def _dump_matrices(system: PHSystem, directory: str) -> list[str]:
    o = system.ops
    K, G_nu = system.assembler.state_operators(system.F_identity)
    mats = {"M_v": o.M_v, "M_S": o.M_S, "M_F": o.M_F, "Z": o.Z, "G_tau": o.G_tau, "K_identity": K, "G_nu_identity": G_nu}
    return dump_matrix_market(mats, os.path.join(directory, "matrices"))


def _common_outputs(result: ScenarioResult, stats: _StatsRecorder, out: str) -> None:
    path = os.path.join(out, "hamiltonian.csv")
    write_csv(path, HAMILTONIAN_HEADER, _hamiltonian_rows(result.trajectory))
    result.files["hamiltonian"] = path
    path = os.path.join(out, "solver_stats.csv")
    write_csv(path, SOLVER_HEADER, stats.rows)
    result.files["solver_stats"] = path
    if result.config.output.dump_matrices:
        for p in _dump_matrices(result.system, out):
            result.files[f"matrix:{os.path.basename(p)}"] = p


def run_rod(config: ScenarioConfig, write: bool = True) -> ScenarioResult:
    """Rod benchmark: energy, boundary traces and solver statistics."""
    if config.dim != 1:
        raise ValueError("run_rod needs a one-dimensional config")
    system, state = build_system(config)
    _log_spectra(system)
    length = config.geometry.lengths[0]
    sv, ss, sf = system.spaces.velocity, system.spaces.stress, system.spaces.defgrad
    last = system.spaces.mesh.n_cells - 1
    v0, vL = sv.point_evaluator([0.0], cell=0), sv.point_evaluator([length], cell=last)
    SL, FL = ss.point_evaluator([length], cell=last), sf.point_evaluator([length], cell=last)
    rows: list[tuple] = []

    def boundary(k: int, st: State, info: StepInfo | None) -> None:
        tau, nu = system.input_values(st.t)
        rows.append((st.t, nu[0], (v0 @ st.v)[0], tau[0], (FL @ st.F)[0] * (SL @ st.S)[0], (vL @ st.v)[0]))

    stats = _StatsRecorder()
    icfg = integrator_config(config)
    out = config.output.directory
    recorders = [boundary, stats]
    vtk = None
    if write and config.output.vtk_every > 0:
        vtk = _VtkRecorder(system, os.path.join(out, "vtk"), "rod", config.output.vtk_every, _n_steps(icfg))
        recorders.append(vtk)
    if write:
        os.makedirs(out, exist_ok=True)
    traj = run(system, state, icfg, recorders)
    result = ScenarioResult(config, system, traj)
    result.series["boundary"] = np.array(rows)
    if write:
        _common_outputs(result, stats, out)
        path = os.path.join(out, "boundary.csv")
        write_csv(path, ROD_BOUNDARY_HEADER, rows)
        result.files["boundary"] = path
        if vtk is not None:
            result.files["vtk"] = os.path.dirname(vtk.paths[0]) if vtk.paths else ""
    return result


def run_beam(config: ScenarioConfig, linear: bool | None = None, write: bool = True) -> ScenarioResult:
    """Plane beam benchmark: energy, probe displacements, VTK series, solver statistics."""
    if config.dim != 2:
        raise ValueError("run_beam needs a two-dimensional config")
    if linear is not None and linear != config.linear:
        config = apply_overrides(config, linear=linear)
    system, state = build_system(config)
    _log_spectra(system)
    sv = system.spaces.velocity
    probes = config.probe_points
    evals = [sv.point_evaluator(list(p)) for p in probes]
    rows: list[tuple] = []

    def tip(k: int, st: State, info: StepInfo | None) -> None:
        rows.append((st.t,) + tuple(float(x) for E in evals for x in E @ st.u))

    stats = _StatsRecorder()
    icfg = integrator_config(config)
    out = config.output.directory
    recorders = [tip, stats]
    vtk = None
    if write and config.output.vtk_every > 0:
        prefix = "beam_linear" if config.linear else "beam"
        vtk = _VtkRecorder(system, os.path.join(out, "vtk"), prefix, config.output.vtk_every, _n_steps(icfg))
        recorders.append(vtk)
    if write:
        os.makedirs(out, exist_ok=True)
    traj = run(system, state, icfg, recorders)
    result = ScenarioResult(config, system, traj)
    result.series["probe_displacement"] = np.array(rows)
    if write:
        _common_outputs(result, stats, out)
        header = ["t [s]"] + [f"u_X{i + 1}_p{j} [m]" for j in range(len(probes)) for i in range(2)]
        path = os.path.join(out, "tip_displacement.csv")
        write_csv(path, header, rows)
        result.files["tip_displacement"] = path
        if vtk is not None:
            result.files["vtk"] = os.path.dirname(vtk.paths[0]) if vtk.paths else ""
    return result


def _n_steps(icfg: IntegratorConfig) -> int:
    return len(step_times(icfg.dt, icfg.t_end))


def run_scenario(config: ScenarioConfig, write: bool = True) -> ScenarioResult:
    log.info("running %s (%s), %d steps", config.scenario, "linear" if config.linear else "nonlinear",
             round(config.time.t_end / config.time.dt))
    if config.dim == 1:
        return run_rod(config, write)
    return run_beam(config, write=write)
