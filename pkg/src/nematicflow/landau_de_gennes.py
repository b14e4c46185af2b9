"""Landau-de Gennes energetics: densities, molecular field, multipliers, stresses.

Nonlinear terms are formed pointwise in physical space. Quadratic products are
truncated back onto the dealiased modes, which makes them exact. The bulk
field is the pointwise value on the grid, truncated the same way; that is the
exact gradient of the grid-quadrature bulk energy, so the discrete energy and
molecular field stay consistent.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor_algebra as ta
from .spectral_domain import SpectralGrid


class ParameterError(ValueError):
    """Material parameters violate the standing assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class MaterialParams:
    """Bulk constants a, b, c; elastic constants L1..L4; viscosity mu; rotational
    diffusion gamma. The alignment parameter and L5 are fixed at zero."""

    a: float = -0.2
    b: float = 1.0
    c: float = 1.0
    L1: float = 1.0
    L2: float = 0.5
    L3: float = 0.5
    L4: float = 0.3
    mu: float = 1.0
    gamma: float = 1.0
    # admit c = 0 (purely quadratic energy) for closed-form checks; never set
    # by configuration files
    allow_degenerate: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError(problems)

    def violations(self) -> list[str]:
        out = []
        for f in fields(self):
            if f.name != "allow_degenerate" and not np.isfinite(getattr(self, f.name)):
                out.append(f"{f.name} must be finite")
        if self.allow_degenerate and self.c == 0:
            pass
        elif not self.c > 0:
            out.append("c must be > 0 (assumption c>0, L1>0, L2+L3>=0: energy bounded below)")
        if not self.L1 > 0:
            out.append("L1 must be > 0 (assumption c>0, L1>0, L2+L3>=0: energy bounded below)")
        if not self.L2 + self.L3 >= 0:
            out.append("L2 + L3 must be >= 0 (assumption c>0, L1>0, L2+L3>=0: energy bounded below)")
        if not self.mu > 0:
            out.append("mu must be > 0")
        if not self.gamma > 0:
            out.append("gamma must be > 0")
        return out

    def replace(self, **changes) -> "MaterialParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return MaterialParams(**values)


@dataclass
class EnergyReport:
    t: float
    kinetic: float
    elastic_L1: float
    elastic_L23: float
    elastic_L4_cross: float
    bulk: float
    total: float
    dissipation_viscous: float
    dissipation_rotational: float

    @property
    def dissipation(self) -> float:
        return self.dissipation_viscous + self.dissipation_rotational

    @property
    def free_energy(self) -> float:
        return self.total - self.kinetic


# ----------------------------------------------------------------------------
# pointwise bulk terms

def bulk_density(q: np.ndarray, p: MaterialParams) -> np.ndarray:
    tr2, tr3 = ta.trace_invariants(q)
    return 0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2 * tr2


def bulk_field(q: np.ndarray, p: MaterialParams) -> np.ndarray:
    """B_Q = -aQ + b(Q^2 - tr(Q^2) I/3) - c tr(Q^2) Q, pointwise."""
    tr2, _ = ta.trace_invariants(q)
    out = (-p.a - p.c * tr2) * q
    if p.b != 0.0:
        out += p.b * ta.q_squared_traceless(q)
    return out


# ----------------------------------------------------------------------------
# linear spectral operators

def divergence_vector_hat(grid: SpectralGrid, Qh: np.ndarray) -> np.ndarray:
    """(div Q)_i = Q_ik,k."""
    m = ta.to_matrix(Qh)
    ik = grid.ik
    return np.stack([ik[0] * m[i, 0] + ik[1] * m[i, 1] + ik[2] * m[i, 2] for i in range(3)])


def curl_matrix_hat(grid: SpectralGrid, Qh: np.ndarray) -> np.ndarray:
    """W_ij = e_lik Q_lj,k, i.e. column j of W is the curl of column j of Q."""
    m = ta.to_matrix(Qh)
    ik = grid.ik
    w = np.empty((3, 3) + np.shape(Qh)[1:], dtype=complex)
    for j in range(3):
        w[0, j] = ik[1] * m[2, j] - ik[2] * m[1, j]
        w[1, j] = ik[2] * m[0, j] - ik[0] * m[2, j]
        w[2, j] = ik[0] * m[1, j] - ik[1] * m[0, j]
    return w


def _sym_outer_traceless(ik, v):
    """Symmetric traceless part of T_ij = ik_j v_i, in 5-component storage."""
    tr3 = (ik[0] * v[0] + ik[1] * v[1] + ik[2] * v[2]) / 3.0
    return np.stack([
        ik[0] * v[0] - tr3,
        0.5 * (ik[1] * v[0] + ik[0] * v[1]),
        0.5 * (ik[2] * v[0] + ik[0] * v[2]),
        ik[1] * v[1] - tr3,
        0.5 * (ik[2] * v[1] + ik[1] * v[2]),
    ])


def elastic_operator_hat(grid: SpectralGrid, Qh: np.ndarray, p: MaterialParams):
    """Return (M, E) spectral Q-tensor fields of the linear molecular field."""
    M = -p.L1 * grid.k2 * Qh
    if p.L2 + p.L3 != 0.0:
        M = M + (p.L2 + p.L3) * _sym_outer_traceless(grid.ik, divergence_vector_hat(grid, Qh))
    if p.L4 != 0.0:
        E = p.L4 * ta.sym_traceless_project(curl_matrix_hat(grid, Qh), check=False)
    else:
        E = np.zeros_like(Qh)
    return M, E


def grad_hat(grid: SpectralGrid, Qh: np.ndarray) -> np.ndarray:
    """dQ[c, g] = d_g Q_c, shape (5, 3) + rshape."""
    return grid.gradient_hat(Qh)


def full_gradient(dq: np.ndarray) -> np.ndarray:
    """G[a, b, g] = d_g Q_ab from the 5-component gradient (5, 3, ...)."""
    return np.stack([ta.to_matrix(dq[:, g]) for g in range(3)], axis=2)


# ----------------------------------------------------------------------------
# molecular field

def molecular_field_hat(grid: SpectralGrid, Qh: np.ndarray, p: MaterialParams,
                        Q: np.ndarray | None = None, dealias: bool = True):
    """Spectral (H, M, E, B); B is the grid-pointwise bulk field transformed and,
    by default, truncated to the dealiased modes."""
    if Q is None:
        Q = grid.to_physical(Qh)
    M, E = elastic_operator_hat(grid, Qh, p)
    B = grid.to_spectral(bulk_field(Q, p))
    if dealias:
        B = grid.dealias(B)
    return M + E + B, M, E, B


def molecular_field(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams, dealias: bool = True):
    """Physical (H, M, E, B) for a physical Q field; H = M + E + B lies in S0."""
    Qh = grid.to_spectral(Q)
    if dealias:
        Qh = grid.dealias(Qh)
    H, M, E, B = molecular_field_hat(grid, Qh, p, Q=Q if not dealias else None, dealias=dealias)
    M, E = grid.to_physical(M), grid.to_physical(E)
    B = grid.to_physical(B) if dealias else bulk_field(Q, p)
    return M + E + B, M, E, B


def unconstrained_euler_lagrange(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams) -> np.ndarray:
    """Full-matrix negative variation without multipliers:
    L1 dQ + (L2+L3) Q_ik,kj + L4 e_lik Q_lj,k - aQ + bQ^2 - c tr(Q^2) Q."""
    Qh = grid.to_spectral(Q)
    v = divergence_vector_hat(grid, Qh)
    t = np.stack([np.stack([grid.ik[j] * v[i] for j in range(3)]) for i in range(3)])
    lin = p.L1 * ta.to_matrix(grid.laplacian_hat(Qh)) + (p.L2 + p.L3) * t + p.L4 * curl_matrix_hat(grid, Qh)
    lin = grid.to_physical(lin)
    m = ta.to_matrix(Q)
    tr2, _ = ta.trace_invariants(Q)
    return lin - p.a * m + p.b * ta.matmul(m, m) - p.c * tr2 * m


def lagrange_multipliers(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams):
    """Return (lambda0, A) with A_ij = lambda_ij - lambda_ji, both physical."""
    Qh = grid.to_spectral(Q)
    v = divergence_vector_hat(grid, Qh)
    t = np.stack([np.stack([grid.ik[j] * v[i] for j in range(3)]) for i in range(3)])
    w = curl_matrix_hat(grid, Qh)
    trt = grid.to_physical(t[0, 0] + t[1, 1] + t[2, 2])
    trw = grid.to_physical(w[0, 0] + w[1, 1] + w[2, 2])
    tr2, _ = ta.trace_invariants(Q)
    lam0 = (p.L2 + p.L3) / 3.0 * trt + p.b / 3.0 * tr2 + p.L4 / 3.0 * trw
    anti = 0.5 * (p.L2 + p.L3) * (t - np.swapaxes(t, 0, 1)) + 0.5 * p.L4 * (w - np.swapaxes(w, 0, 1))
    return lam0, grid.to_physical(anti)


# ----------------------------------------------------------------------------
# densities and energy

def elastic_density_parts(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams, dealias: bool = True):
    """Pointwise (L1, L2+L3, L4-cross) parts of the elastic energy density."""
    Qh = grid.dealias(grid.to_spectral(Q)) if dealias else grid.to_spectral(Q)
    G = grid.to_physical(full_gradient(grad_hat(grid, Qh)))
    m = ta.to_matrix(grid.to_physical(Qh)) if dealias else ta.to_matrix(Q)
    f1 = 0.5 * p.L1 * np.einsum("abg...,abg...->...", G, G)
    div = np.einsum("ijj...->i...", G)
    f2 = 0.5 * p.L2 * np.einsum("i...,i...->...", div, div)
    f3 = 0.5 * p.L3 * np.einsum("ikj...,ijk...->...", G, G)
    f4 = np.zeros(grid.shape)
    for l, i, k, s in ta.LEVI_CIVITA:
        f4 += s * np.einsum("j...,j...->...", m[l], G[i, :, k])
    f4 *= 0.5 * p.L4
    parts = [f1, f2 + f3, f4]
    if dealias:
        parts = [grid.to_physical(grid.dealias(grid.to_spectral(f))) for f in parts]
    return tuple(parts)


def elastic_density(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams, dealias: bool = True) -> np.ndarray:
    f1, f23, f4 = elastic_density_parts(grid, Q, p, dealias)
    return f1 + f23 + f4


def _elastic_sums(grid: SpectralGrid, Qh: np.ndarray, p: MaterialParams):
    dq = grad_hat(grid, Qh)
    grad_sq = sum(grid.q_inner_hat(dq[:, g], dq[:, g]) for g in range(3))
    v = divergence_vector_hat(grid, Qh)
    div_sq = grid.spectral_inner(v, v)
    m = ta.to_matrix(Qh)
    cross = 0.0
    if p.L4 != 0.0:
        for l, i, k, s in ta.LEVI_CIVITA:
            cross += s * grid.spectral_inner(m[l], grid.ik[k] * m[i])
    return 0.5 * p.L1 * grad_sq, 0.5 * (p.L2 + p.L3) * div_sq, 0.5 * p.L4 * cross


def free_energy_hat(grid: SpectralGrid, Qh: np.ndarray, p: MaterialParams) -> float:
    """Discrete Landau-de Gennes functional: spectral sums for the quadratic
    parts, grid quadrature for the bulk polynomial."""
    e1, e23, e4 = _elastic_sums(grid, Qh, p)
    return e1 + e23 + e4 + grid.integrate(bulk_density(grid.to_physical(Qh), p))


def total_energy(state, p: MaterialParams) -> EnergyReport:
    """Energy breakdown and the two dissipation rates of a state."""
    grid = state.grid
    if state.u_hat.shape[1:] != grid.rshape or state.Q_hat.shape[1:] != grid.rshape:
        raise ValueError("state fields do not match the grid")
    uh, Qh = state.u_hat, state.Q_hat
    kinetic = 0.5 * grid.spectral_inner(uh, uh)
    e1, e23, e4 = _elastic_sums(grid, Qh, p)
    Q = grid.to_physical(Qh)
    bulk = grid.integrate(bulk_density(Q, p))
    H = molecular_field_hat(grid, Qh, p, Q=Q)[0]
    grad_u_sq = float(np.sum(grid.weights * grid.k2_deriv * np.abs(uh) ** 2) * grid.volume)
    return EnergyReport(
        t=state.t,
        kinetic=kinetic,
        elastic_L1=e1,
        elastic_L23=e23,
        elastic_L4_cross=e4,
        bulk=bulk,
        total=kinetic + e1 + e23 + e4 + bulk,
        dissipation_viscous=p.mu * grad_u_sq,
        dissipation_rotational=p.gamma * grid.q_inner_hat(H, H),
    )


# ----------------------------------------------------------------------------
# stresses

def distortion_stress_pointwise(G: np.ndarray, m: np.ndarray, p: MaterialParams, dq=None) -> np.ndarray:
    """sigma^d from the full gradient G[a, b, g] = d_g Q_ab and matrix Q.

    ``dq`` (5-component gradient) is optional and only speeds up the L1 term.
    """
    s = np.empty((3, 3) + G.shape[3:])
    for i in range(3):
        for j in range(i, 3):
            # Q_kl,i Q_kl,j, symmetric in (i, j)
            if dq is not None:
                acc = ta.frobenius(dq[:, i], dq[:, j])
            else:
                acc = sum(G[k, l, i] * G[k, l, j] for k in range(3) for l in range(3))
            s[i, j] = p.L1 * acc
            s[j, i] = s[i, j]
    if p.L2 != 0.0:
        div = [G[k, 0, 0] + G[k, 1, 1] + G[k, 2, 2] for k in range(3)]
        for i in range(3):
            for j in range(3):
                s[i, j] += p.L2 * (div[0] * G[0, j, i] + div[1] * G[1, j, i] + div[2] * G[2, j, i])
    if p.L3 != 0.0:
        # sum_k (G_k G_k)^T with (G_k)_{jl} = Q_kj,l
        for k in range(3):
            s += p.L3 * np.swapaxes(ta.matmul(G[k], G[k]), 0, 1)
    if p.L4 != 0.0:
        for i in range(3):
            # P[m, k] = Q_ml Q_kl,i ; e_mkj P[m, k] lands in column j
            P = ta.matmul(m, G[:, :, i])
            s[i, 0] += 0.5 * p.L4 * (P[1, 2] - P[2, 1])
            s[i, 1] += 0.5 * p.L4 * (P[2, 0] - P[0, 2])
            s[i, 2] += 0.5 * p.L4 * (P[0, 1] - P[1, 0])
    return -s


def distortion_stress(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams, dealias: bool = True) -> np.ndarray:
    Qh = grid.to_spectral(Q)
    if dealias:
        Qh = grid.dealias(Qh)
    G = grid.to_physical(full_gradient(grad_hat(grid, Qh)))
    s = distortion_stress_pointwise(G, ta.to_matrix(grid.to_physical(Qh)), p)
    if dealias:
        s = grid.to_physical(grid.dealias(grid.to_spectral(s)))
    return s


def antisymmetric_stress(Q: np.ndarray, H: np.ndarray) -> np.ndarray:
    """sigma^a = Q H - H Q for Q-tensor fields in 5-component storage."""
    return ta.commutator(ta.to_matrix(Q), ta.to_matrix(H))


# ----------------------------------------------------------------------------
# coercivity constant

class CoercivityError(RuntimeError):
    def __init__(self, K, s, t):
        self.K, self.s, self.t = K, s, t
        super().__init__(f"no certified K within budget; largest candidate {K:g} violated at s={s:g}, t={t:g}")


_TR3_BOUND = 1.0 / np.sqrt(6.0)


def coercivity_margin(K: float, p: MaterialParams, s, t) -> np.ndarray:
    """Right side minus left side of the bulk coercivity inequality at
    invariant pairs s = tr(Q^2), t = tr(Q^3)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return 0.5 * (K + p.a) * s - p.b / 3.0 * t + 0.125 * p.c * s * s


def worst_case_tr3(p: MaterialParams, s) -> np.ndarray:
    """The admissible tr(Q^3) that minimises the margin: |t| <= s^1.5 / sqrt 6."""
    return np.sign(p.b) * _TR3_BOUND * np.asarray(s, dtype=float) ** 1.5


def coercivity_constant_K(p: MaterialParams, search_budget: int = 4000, s_max: float = 100.0,
                          samples: int = 100_000, ratio: float = 1.01, k_start: float = 1e-4) -> float:
    """Smallest K on the grid {0} U {k_start * ratio**j} such that the bulk
    coercivity inequality holds at ``samples`` points s in [0, s_max] with the
    worst admissible tr(Q^3)."""
    if not p.c > 0:
        raise ValueError("c must be positive")
    s = np.linspace(0.0, s_max, samples)
    t = worst_case_tr3(p, s)
    candidates = np.concatenate([[0.0], k_start * ratio ** np.arange(search_budget)])

    def ok(K):
        return bool(np.all(coercivity_margin(K, p, s, t) >= 0.0))

    if not ok(candidates[-1]):
        margin = coercivity_margin(candidates[-1], p, s, t)
        worst = int(np.argmin(margin))
        raise CoercivityError(candidates[-1], s[worst], t[worst])
    lo, hi = -1, len(candidates) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(candidates[mid]):
            hi = mid
        else:
            lo = mid
    return float(candidates[hi])
