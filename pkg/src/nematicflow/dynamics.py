"""Right-hand side and time integration of the coupled flow / Q-tensor system.

Discretisation: every product is formed on the grid from dealiased fields and
truncated back onto the dealiased modes. Cubic grid sums of dealiased fields
are exact, so the semi-discrete system inherits the continuous energy law
exactly provided the molecular field is the exact gradient of the discrete
free energy. The bulk field is therefore taken pointwise on the grid, and its
advective work is returned to the momentum equation as the force
``-(grad Q) : B``; in the continuum that force is the gradient of the bulk
density and the Leray projector removes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from . import landau_de_gennes as ldg
from . import tensor_algebra as ta
from .landau_de_gennes import EnergyReport, MaterialParams
from .spectral_domain import SpectralGrid, discrete_norms
from .state import SimState

SCHEMES = ("explicit_rk4", "imex")
# sigma^s with zero alignment parameter is mu D; nothing else enters the stress
ALIGNMENT_XI = 0.0
assert ALIGNMENT_XI == 0.0

_BLOWUP_LIMIT = 1e100


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_end: float = 0.5
    scheme: str = "explicit_rk4"
    mollifier_n: int | None = None
    snapshot_every: int = 1

    def __post_init__(self):
        problems = []
        if self.scheme not in SCHEMES:
            problems.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            problems.append("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            problems.append("t_end must be >= 0")
        elif self.t_end > 0 and self.dt > self.t_end:
            problems.append("dt must not exceed t_end")
        if self.mollifier_n is not None and self.mollifier_n < 1:
            problems.append("mollifier_n must be >= 1")
        if self.snapshot_every < 0:
            problems.append("snapshot_every must be >= 0")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_end / self.dt - 1e-9)) if self.t_end > 0 else 0


class BlowUpError(RuntimeError):
    """Raised when the state stops being finite; carries the partial run."""

    def __init__(self, time: float, norms: dict, partial: "RunResult"):
        self.time = time
        self.norms = norms
        self.partial = partial
        super().__init__(f"non-finite state at t={time:.6g} ({norms})")


@dataclass
class Diagnostics:
    """Quantities available for free from a right-hand-side evaluation."""

    report: EnergyReport
    H_hat: np.ndarray


@dataclass
class RunResult:
    final: SimState
    reports: list = field(default_factory=list)
    steps: int = 0
    blowup_time: float | None = None


# ----------------------------------------------------------------------------
# right-hand side

def _vorticity_hat(grid: SpectralGrid, uh):
    ik = grid.ik
    return np.stack([ik[1] * uh[2] - ik[2] * uh[1],
                     ik[2] * uh[0] - ik[0] * uh[2],
                     ik[0] * uh[1] - ik[1] * uh[0]])


def _spin_matrix(w):
    """Omega_ij = (u_i,j - u_j,i)/2 from the vorticity w = curl u."""
    z = np.zeros_like(w[0])
    return 0.5 * np.stack([
        np.stack([z, -w[2], w[1]]),
        np.stack([w[2], z, -w[0]]),
        np.stack([-w[1], w[0], z]),
    ])


def _bulk_nonlinear(Q, p: MaterialParams, reference: bool = False):
    """Bulk field without its linear -aQ part, on the grid."""
    if reference:
        return ldg.bulk_field(Q, p) + p.a * Q
    out = np.empty_like(Q)
    _kernels.bulk_field(Q.reshape(5, -1), 0.0, p.b, p.c, out.reshape(5, -1))
    return out


def _nonlinear(u, w, Q, dq, H, B, p: MaterialParams, reference: bool = False):
    """Grid values of (force, stress, Q transport).

    force: advection in Lamb form u x w (the dropped grad |u|^2/2 is a
    spectral gradient after truncation, removed exactly by Leray) plus the
    bulk force -(grad Q):B. stress: sigma^d + sigma^a. Q transport:
    Omega Q - Q Omega - u.grad Q.
    """
    if reference:
        m = ta.to_matrix(Q)
        force = np.stack([u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]])
        for g in range(3):
            force[g] -= ta.frobenius(dq[:, g], B)
        stress = ldg.distortion_stress_pointwise(ldg.full_gradient(dq), m, p, dq) + ta.commutator(m, ta.to_matrix(H))
        adv = u[0] * dq[:, 0] + u[1] * dq[:, 1] + u[2] * dq[:, 2]
        rot = ta.sym_traceless_project(ta.commutator(_spin_matrix(w), m), check=False)
        return force, stress, rot - adv
    shape = Q.shape[1:]
    npts = Q[0].size
    force = np.empty((3,) + shape)
    stress = np.empty((3, 3) + shape)
    qnl = np.empty((5,) + shape)
    _kernels.nonlinear_terms(
        np.ascontiguousarray(u).reshape(3, npts), np.ascontiguousarray(w).reshape(3, npts),
        np.ascontiguousarray(Q).reshape(5, npts), np.ascontiguousarray(dq).reshape(5, 3, npts),
        np.ascontiguousarray(H).reshape(5, npts), np.ascontiguousarray(B).reshape(5, npts),
        p.L1, p.L2, p.L3, p.L4,
        force.reshape(3, npts), stress.reshape(9, npts), qnl.reshape(5, npts))
    return force, stress, qnl


def _energy_report(grid, uh, Qh, Q, H_hat, p, t) -> EnergyReport:
    kinetic = 0.5 * grid.spectral_inner(uh, uh)
    e1, e23, e4 = ldg._elastic_sums(grid, Qh, p)
    bulk = grid.integrate(ldg.bulk_density(Q, p))
    grad_u_sq = float(np.sum(grid.weights * grid.k2_deriv * np.abs(uh) ** 2) * grid.volume)
    return EnergyReport(t, kinetic, e1, e23, e4, bulk, kinetic + e1 + e23 + e4 + bulk,
                        p.mu * grad_u_sq, p.gamma * grid.q_inner_hat(H_hat, H_hat))


def _core_rhs(grid: SpectralGrid, uh, Qh, p: MaterialParams, mollifier_n=None, t=0.0, diagnostics=False):
    """Return (du_hat, dQ_hat[, Diagnostics]).

    With ``mollifier_n`` the nonlinear terms see P J_n u and J_n Q and every
    product is wrapped in J_n; the linear elastic operators act on J_n Q.
    """
    if mollifier_n is None:
        wrap = grid.dealias_mask
        us, Qs = uh, Qh
    else:
        jn = grid.mollifier_mask(mollifier_n)
        wrap = grid.dealias_mask & jn
        us = grid.leray_hat(uh * jn)
        Qs = Qh * jn

    fields = grid.to_physical(np.concatenate([us, _vorticity_hat(grid, us), Qs,
                                              ldg.grad_hat(grid, Qs).reshape((15,) + grid.rshape)]))
    u, w, Q = fields[0:3], fields[3:6], fields[6:11]
    dq = fields[11:].reshape((5, 3) + grid.shape)

    M, E = ldg.elastic_operator_hat(grid, Qs, p)
    B_nl = _bulk_nonlinear(Q, p)
    B_hat = grid.to_spectral(B_nl) * wrap - p.a * Qs
    H_hat = M + E + B_hat
    HB = grid.to_physical(np.concatenate([H_hat, B_hat]))
    H, B = HB[:5], HB[5:]

    force, stress, qnl = _nonlinear(u, w, Q, dq, H, B, p)
    f_hat = grid.to_spectral(np.concatenate([force, stress.reshape((9,) + grid.shape)]))
    f_hat = f_hat[:3] + grid.matrix_divergence_hat(f_hat[3:].reshape((3, 3) + grid.rshape))
    f_hat = f_hat * wrap
    f_hat[(slice(None), 0, 0, 0)] = 0.0
    du = grid.leray_hat(f_hat) - p.mu * grid.k2 * us
    dQ = grid.to_spectral(qnl) * wrap + p.gamma * H_hat

    if not diagnostics:
        return du, dQ
    if mollifier_n is None:
        report = _energy_report(grid, uh, Qh, Q, H_hat, p, t)
    else:
        report = _energy_report(grid, uh, Qh, grid.to_physical(Qh), H_hat, p, t)
    return du, dQ, Diagnostics(report, H_hat)


def velocity_rhs(state: SimState, p: MaterialParams) -> np.ndarray:
    """Spectral du/dt: P[-u.grad u + mu lap u + div(sigma^a + sigma^d)] with
    the bulk advective force included (see module docstring)."""
    return _core_rhs(state.grid, state.u_hat, state.Q_hat, p)[0]


def qtensor_rhs(state: SimState, p: MaterialParams) -> np.ndarray:
    """Spectral dQ/dt: -u.grad Q + Omega Q - Q Omega + Gamma H."""
    return _core_rhs(state.grid, state.u_hat, state.Q_hat, p)[1]


def full_rhs(state: SimState, p: MaterialParams, mollifier_n=None):
    return _core_rhs(state.grid, state.u_hat, state.Q_hat, p, mollifier_n)


def mollified_rhs(state: SimState, p: MaterialParams, n: int):
    """Right-hand side of the mollified system; returns (du_hat, dQ_hat)."""
    if n < 1:
        raise ValueError("mollifier index must be >= 1")
    return _core_rhs(state.grid, state.u_hat, state.Q_hat, p, mollifier_n=n)


# ----------------------------------------------------------------------------
# steppers

def _finalise(grid, uh, Qh):
    return grid.leray_hat(grid.dealias(uh)), grid.dealias(Qh)


def rk4_step(state: SimState, p: MaterialParams, dt: float, mollifier_n=None, k1=None) -> SimState:
    grid = state.grid
    u0, Q0 = state.u_hat, state.Q_hat
    if k1 is None:
        k1 = _core_rhs(grid, u0, Q0, p, mollifier_n)
    a1, b1 = k1[0], k1[1]
    a2, b2 = _core_rhs(grid, u0 + 0.5 * dt * a1, Q0 + 0.5 * dt * b1, p, mollifier_n)
    a3, b3 = _core_rhs(grid, u0 + 0.5 * dt * a2, Q0 + 0.5 * dt * b2, p, mollifier_n)
    a4, b4 = _core_rhs(grid, u0 + dt * a3, Q0 + dt * b3, p, mollifier_n)
    uh = u0 + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    Qh = Q0 + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    uh, Qh = _finalise(grid, uh, Qh)
    return SimState(grid, uh, Qh, state.t + dt)


class ImexOperator:
    """Per-wavenumber inverses of (I - dt*Gamma*A(k)) with A(k) the 5x5 matrix
    of the linear elastic operator M in component coordinates, plus the scalar
    viscous factor 1/(1 + dt*mu*|k|^2)."""

    def __init__(self, grid: SpectralGrid, p: MaterialParams, dt: float):
        if not p.L1 > 0:
            raise ValueError("imex requires L1 > 0")
        self.grid, self.dt = grid, dt
        cols = []
        for c in range(5):
            e = np.zeros((5,) + grid.rshape, dtype=complex)
            e[c] = 1.0
            M, _ = ldg.elastic_operator_hat(grid, e, p.replace(L4=0.0))
            cols.append(M)
        # A[..., r, c] = component r of M applied to basis vector c
        A = np.stack(cols, axis=-1)
        A = np.moveaxis(A, 0, -2)
        eye = np.eye(5)
        self.inv = np.linalg.inv(eye - dt * p.gamma * A)
        self.visc = 1.0 / (1.0 + dt * p.mu * grid.k2)
        self.params = p

    def solve_q(self, rhs: np.ndarray) -> np.ndarray:
        v = np.moveaxis(rhs, 0, -1)[..., None]
        return np.moveaxis((self.inv @ v)[..., 0], -1, 0)


def imex_step(state: SimState, p: MaterialParams, dt: float, op: ImexOperator | None = None,
              mollifier_n=None, k1=None) -> SimState:
    """First-order step: mu lap u and Gamma M implicit, the rest explicit."""
    grid = state.grid
    if op is None:
        op = ImexOperator(grid, p, dt)
    uh, Qh = state.u_hat, state.Q_hat
    du, dQ = (k1[0], k1[1]) if k1 is not None else _core_rhs(grid, uh, Qh, p, mollifier_n)
    M, _ = ldg.elastic_operator_hat(grid, Qh if mollifier_n is None else Qh * grid.mollifier_mask(mollifier_n),
                                    p.replace(L4=0.0))
    # remove the implicit parts from the explicit tendency
    du_exp = du + p.mu * grid.k2 * uh
    dQ_exp = dQ - p.gamma * M
    u_new = (uh + dt * du_exp) * op.visc
    Q_new = op.solve_q(Qh + dt * dQ_exp)
    u_new, Q_new = _finalise(grid, u_new, Q_new)
    return SimState(grid, u_new, Q_new, state.t + dt)


def step(state: SimState, p: MaterialParams, config: SolverConfig, op=None) -> SimState:
    if config.scheme == "explicit_rk4":
        return rk4_step(state, p, config.dt, config.mollifier_n)
    return imex_step(state, p, config.dt, op, config.mollifier_n)


# ----------------------------------------------------------------------------
# run loop

def state_norms(state: SimState) -> dict:
    with np.errstate(all="ignore"):
        nu = discrete_norms(state.grid, state.u)
        nq = discrete_norms(state.grid, state.Q)
    return {"u_l2": nu.l2, "u_h1": nu.h1, "Q_l2": nq.l2, "Q_h1": nq.h1}


def _is_sane(state: SimState) -> bool:
    with np.errstate(all="ignore"):
        s = float(np.sum(np.abs(state.u_hat))) + float(np.sum(np.abs(state.Q_hat)))
    return math.isfinite(s) and s < _BLOWUP_LIMIT


def diagnostics(state: SimState, p: MaterialParams, mollifier_n=None) -> Diagnostics:
    return _core_rhs(state.grid, state.u_hat, state.Q_hat, p, mollifier_n, state.t, diagnostics=True)[2]


def run(initial: SimState, p: MaterialParams, config: SolverConfig,
        sinks: Iterable[Callable] = (), step_hook: Callable | None = None) -> RunResult:
    """Integrate to ``config.t_end``.

    Each sink is called as ``sink(state, report)`` at every ``snapshot_every``-th
    step (and always at the first and last state; ``snapshot_every = 0`` means
    only those two). ``step_hook(state)`` runs after every step. The final step
    is shortened when t_end is not a multiple of dt.
    """
    sinks = list(sinks)
    grid = initial.grid
    state = initial.copy()
    result = RunResult(final=state)
    n = config.n_steps
    every = config.snapshot_every
    op = None
    if config.scheme == "imex":
        op = ImexOperator(grid, p, config.dt)

    def emit(st, rep):
        result.reports.append(rep)
        for s in sinks:
            s(st, rep)

    for i in range(n):
        due = i == 0 or (every > 0 and i % every == 0)
        dt = min(config.dt, config.t_end - state.t) if i == n - 1 else config.dt
        if dt <= 0:
            break
        k1 = None
        if due:
            du, dQ, diag = _core_rhs(grid, state.u_hat, state.Q_hat, p, config.mollifier_n, state.t, True)
            k1 = (du, dQ)
            emit(state, diag.report)
        if config.scheme == "explicit_rk4":
            new = rk4_step(state, p, dt, config.mollifier_n, k1)
        else:
            if dt != config.dt:
                op = ImexOperator(grid, p, dt)
            new = imex_step(state, p, dt, op, config.mollifier_n, k1)
        if not _is_sane(new):
            result.final = state
            result.steps = i
            result.blowup_time = new.t
            raise BlowUpError(new.t, state_norms(state), result)
        state = new
        if step_hook is not None:
            step_hook(state)
    if n > 0 and config.t_end - state.t > 1e-9 * max(1.0, config.t_end):
        raise RuntimeError("time loop ended early")
    result.final = state
    result.steps = n
    emit(state, diagnostics(state, p, config.mollifier_n).report)
    return result
