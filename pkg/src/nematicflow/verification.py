"""Numerical certificates for the analytical structure of the model.

Every check returns plain numbers; thresholds live with the callers (tests and
the ``verify`` subcommand) so a failing check reports how far off it was.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import dynamics as dyn
from . import landau_de_gennes as ldg
from . import tensor_algebra as ta
from .landau_de_gennes import MaterialParams
from .spectral_domain import SpectralGrid, discrete_norms, random_band_limited
from .state import SimState


@dataclass
class IdentityReport:
    name: str
    value: float
    scale: float

    @property
    def relative_residual(self) -> float:
        if self.scale == 0.0:
            return 0.0 if self.value == 0.0 else math.inf
        return abs(self.value) / self.scale

    def passed(self, tol: float) -> bool:
        return self.relative_residual <= tol


# ----------------------------------------------------------------------------
# energy balance

@dataclass
class EnergyBalance:
    times: np.ndarray
    residuals: np.ndarray
    aggregate: float


def energy_balance_residual(reports, dt: float) -> EnergyBalance:
    """r_m = (E_{m+1} - E_m)/dt + (D_m + D_{m+1})/2 on a uniform trajectory.

    The dissipation is averaged over the interval (trapezoid), so r_m is
    O(dt^2) on smooth trajectories. ``aggregate`` is sum |r_m| dt over the
    integral of the dissipation (0 when both vanish).
    """
    reports = list(reports)
    if len(reports) < 3:
        raise ValueError("energy balance needs at least 3 samples")
    t = np.array([r.t for r in reports])
    steps = np.diff(t)
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("trajectory is not uniformly sampled at dt")
    E = np.array([r.total for r in reports])
    D = np.array([r.dissipation for r in reports])
    mid = 0.5 * (D[1:] + D[:-1])
    r = np.diff(E) / dt + mid
    total = float(np.sum(mid) * dt)
    num = float(np.sum(np.abs(r)) * dt)
    if total == 0.0:
        agg = 0.0 if num == 0.0 else math.inf
    else:
        agg = num / total
    return EnergyBalance(0.5 * (t[1:] + t[:-1]), r, agg)


def observed_order(dts, errors) -> float:
    """Least-squares slope of log(error) against log(dt)."""
    x = np.log(np.asarray(dts, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ----------------------------------------------------------------------------
# cancellation identities

def _padded_size(grid: SpectralGrid, degree: int):
    """Smallest fast even grid on which products of ``degree`` dealiased
    factors integrate exactly."""
    out = []
    for n in grid.n:
        kmax = (n - 1) // 3
        m = sfft.next_fast_len(degree * kmax + 1, real=True)
        while m % 2:
            m = sfft.next_fast_len(m + 1, real=True)
        out.append(max(m, n))
    return tuple(out)


def _spin(grad_u):
    return 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))


def cancellation_suite(state: SimState, p: MaterialParams, dealias: bool = True,
                       solenoidal_tol: float = 1e-10) -> list[IdentityReport]:
    """The five energy-law cancellations, integrated exactly.

    With ``dealias`` every factor is evaluated on a zero-padded grid fine
    enough that the quintic integrands carry no aliasing. ``dealias=False``
    evaluates everything on the native grid (negative control).

    J2 = int u_g Q_ab,g B_ab
    J3 + J4 + J7 = int u.grad Q : (M + E) + <u, div sigma^d>
    J5 + J6 = int (Q Omega - Omega Q) : H - int (Q H - H Q) : grad u
    J8 = -L3 int u_g Q_ab,gd Q_ad,b
    J9 = int tr((Omega Q - Q Omega) Q)
    """
    grid = state.grid
    uh, Qh = state.u_hat, state.Q_hat
    unorm = math.sqrt(max(grid.spectral_inner(uh, uh), 0.0))
    if grid.spectral_divergence_max(uh) > solenoidal_tol * max(unorm, 1e-300) and unorm > 0:
        raise ValueError("cancellation identities need a solenoidal velocity")
    if dealias:
        size = _padded_size(grid, 5)
        ev = lambda fh: grid.padded_physical(fh, size)  # noqa: E731
        vol_w = grid.volume / float(np.prod(size))
    else:
        ev = grid.to_physical
        vol_w = grid.volume / grid.npoints

    def integral(f):
        return float(np.sum(f) * vol_w)

    u = ev(uh)
    grad_u = ev(np.stack([np.stack([grid.ik[j] * uh[i] for j in range(3)]) for i in range(3)]))
    Q = ev(Qh)
    dq = ev(ldg.grad_hat(grid, Qh))
    G = ldg.full_gradient(dq)
    m = ta.to_matrix(Q)
    M_hat, E_hat = ldg.elastic_operator_hat(grid, Qh, p)
    M = ta.to_matrix(ev(M_hat))
    E = ta.to_matrix(ev(E_hat))
    B = ta.to_matrix(ldg.bulk_field(Q, p))
    H = M + E + B
    om = _spin(grad_u)
    # u.grad Q as a full matrix
    adv = np.einsum("g...,abg...->ab...", u, G)

    reports = []

    val = scale = 0.0
    for g in range(3):
        s2 = u[g] * G[:, :, g] * B
        val += integral(s2.sum(axis=(0, 1)))
        scale += integral(np.abs(s2).sum(axis=(0, 1)))
    reports.append(IdentityReport("J2", val, scale))

    s3 = adv * M
    s4 = adv * E
    sig = ldg.distortion_stress_pointwise(G, m, p)
    s7 = -sig * grad_u
    val = integral(s3.sum(axis=(0, 1))) + integral(s4.sum(axis=(0, 1))) + integral(s7.sum(axis=(0, 1)))
    scale = integral(np.abs(s3).sum(axis=(0, 1))) + integral(np.abs(s4).sum(axis=(0, 1))) \
        + integral(np.abs(s7).sum(axis=(0, 1)))
    reports.append(IdentityReport("J3+J4+J7", val, scale))

    s5 = (ta.matmul(m, om) - ta.matmul(om, m)) * H
    s6 = -ta.commutator(m, H) * grad_u
    reports.append(IdentityReport(
        "J5+J6",
        integral(s5.sum(axis=(0, 1))) + integral(s6.sum(axis=(0, 1))),
        integral(np.abs(s5).sum(axis=(0, 1))) + integral(np.abs(s6).sum(axis=(0, 1))),
    ))

    # Q_ab,gd one (g, d) pair at a time; Q_ad,b is G[:, d, :]
    val = scale = 0.0
    cache = {}
    for g in range(3):
        for d in range(3):
            key = (min(g, d), max(g, d))
            if key not in cache:
                cache[key] = ta.to_matrix(ev(grid.ik[g] * grid.ik[d] * Qh))
            s8 = -p.L3 * u[g] * cache[key] * G[:, d, :]
            val += integral(s8.sum(axis=(0, 1)))
            scale += integral(np.abs(s8).sum(axis=(0, 1)))
    reports.append(IdentityReport("J8", val, scale))

    c9 = ta.commutator(om, m)
    s9 = np.einsum("ij...,ji...->ij...", c9, m)
    reports.append(IdentityReport("J9", integral(s9.sum(axis=(0, 1))), integral(np.abs(s9).sum(axis=(0, 1)))))
    return reports


# ----------------------------------------------------------------------------
# null Lagrangian and the L4 lower bound

def null_lagrangian(grid: SpectralGrid, Q: np.ndarray) -> IdentityReport:
    """int (Q_ij,k Q_ik,j - Q_ij,j Q_ik,k) relative to int |grad Q|^2.

    Q is truncated to the dealiased modes first, so the grid quadrature of
    these quadratic integrands is exact.
    """
    Qh = grid.dealias(grid.to_spectral(Q))
    G = grid.to_physical(ldg.full_gradient(ldg.grad_hat(grid, Qh)))
    a = np.einsum("ijk...,ikj...->...", G, G)
    div = np.einsum("ijj...->i...", G)
    b = np.einsum("i...,i...->...", div, div)
    grad_sq = np.einsum("ijk...,ijk...->...", G, G)
    return IdentityReport("null_lagrangian", grid.integrate(a - b), grid.integrate(grad_sq))


@dataclass
class L4Bound:
    cross: float
    lower: float

    @property
    def margin(self) -> float:
        return self.cross - self.lower


def l4_lower_bound(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams) -> L4Bound:
    """Compare the L4 cross energy with -(L1/4)||grad Q||^2 - (L4^2/L1)||Q||^2."""
    Qh = grid.dealias(grid.to_spectral(Q))
    _, _, cross = ldg._elastic_sums(grid, Qh, p)
    n = discrete_norms(grid, grid.to_physical(Qh))
    lower = -0.25 * p.L1 * n.h1**2 - p.L4**2 / p.L1 * n.l2**2
    return L4Bound(cross, lower)


# ----------------------------------------------------------------------------
# variational consistency

def _fd4(f, eps):
    return (-f(2 * eps) + 8 * f(eps) - 8 * f(-eps) + f(-2 * eps)) / (12 * eps)


def variational_consistency(grid: SpectralGrid, Q: np.ndarray, p: MaterialParams, fd_step: float = 1e-5,
                            n_directions: int = 10, seed: int = 0, directions=None) -> float:
    """Worst relative mismatch between -<H, G> and a fourth-order central
    difference of the discrete free energy along S0-valued directions G."""
    if not 1e-7 <= fd_step <= 1e-3:
        raise ValueError("fd_step must lie in [1e-7, 1e-3]")
    Qh = grid.dealias(grid.to_spectral(Q))
    H = ldg.molecular_field_hat(grid, Qh, p)[0]
    if directions is None:
        rng = np.random.default_rng(seed)
        directions = [random_band_limited(grid, "qtensor", 2.0, int(rng.integers(2**31)))
                      for _ in range(n_directions)]
    worst = 0.0
    used = 0
    for d in directions:
        Gh = grid.dealias(grid.to_spectral(d))
        if grid.q_inner_hat(Gh, Gh) == 0.0:
            continue
        used += 1
        ana = -grid.q_inner_hat(H, Gh)
        fd = _fd4(lambda e: ldg.free_energy_hat(grid, Qh + e * Gh, p), fd_step)
        denom = abs(ana) if ana != 0.0 else 1.0
        worst = max(worst, abs(fd - ana) / denom)
    if used == 0:
        raise ValueError("all test directions were degenerate")
    return worst


# ----------------------------------------------------------------------------
# higher-order diagnostic A(t)

def higher_order_diagnostic(state: SimState, p: MaterialParams, method: str = "spectral"):
    """A = ||grad u||^2 + L1 ||lap Q||^2 + (L2+L3) ||grad div Q||^2; returns (A, A + 1)."""
    grid = state.grid
    uh, Qh = state.u_hat, state.Q_hat
    v = ldg.divergence_vector_hat(grid, Qh)
    if method == "spectral":
        k2 = grid.k2_deriv
        gu = float(np.sum(grid.weights * k2 * np.abs(uh) ** 2) * grid.volume)
        lq = grid.q_inner_hat(grid.k2 * Qh, grid.k2 * Qh)
        gd = float(np.sum(grid.weights * k2 * np.abs(v) ** 2) * grid.volume)
    elif method == "physical":
        grad_u = grid.to_physical(grid.gradient_hat(uh))
        gu = grid.integrate(np.sum(grad_u**2, axis=(0, 1)))
        lap = grid.to_physical(grid.laplacian_hat(Qh))
        lq = grid.q_inner(lap, lap)
        gdv = grid.to_physical(grid.gradient_hat(v))
        gd = grid.integrate(np.sum(gdv**2, axis=(0, 1)))
    else:
        raise ValueError(f"unknown method {method!r}")
    A = gu + p.L1 * lq + (p.L2 + p.L3) * gd
    return A, A + 1.0


# ----------------------------------------------------------------------------
# viscosity sweep

@dataclass
class SweepRow:
    mu: float
    sup_A_tilde: float
    blowup_time: float | None
    steps: int


def viscosity_sweep(initial: SimState, p: MaterialParams, mu_list, T: float,
                    config: dyn.SolverConfig | None = None) -> list[SweepRow]:
    """sup over t <= T of A~(t) for each viscosity, blow-ups recorded as rows."""
    mu_list = [float(m) for m in mu_list]
    if len(mu_list) < 3:
        raise ValueError("mu_list needs at least 3 entries")
    if any(b <= a for a, b in zip(mu_list, mu_list[1:])):
        raise ValueError("mu_list must be strictly ascending")
    base = config or dyn.SolverConfig(dt=1e-3, t_end=T)
    cfg = dyn.SolverConfig(dt=base.dt, t_end=T, scheme=base.scheme, mollifier_n=base.mollifier_n,
                           snapshot_every=0)
    rows = []
    for mu in mu_list:
        pm = p.replace(mu=mu)
        best = [higher_order_diagnostic(initial, pm)[1]]

        def hook(st, pm=pm, best=best):
            best[0] = max(best[0], higher_order_diagnostic(st, pm)[1])

        try:
            res = dyn.run(initial, pm, cfg, step_hook=hook)
            rows.append(SweepRow(mu, best[0], None, res.steps))
        except dyn.BlowUpError as err:
            rows.append(SweepRow(mu, best[0], err.time, err.partial.steps))
    return rows


def sweep_violations(rows) -> list[tuple[float, float]]:
    """Adjacent (mu, mu') pairs where sup A~ increased with viscosity or a
    run blew up after a smaller viscosity did not."""
    bad = []
    for r0, r1 in zip(rows, rows[1:]):
        worse = r1.blowup_time is not None and r0.blowup_time is None
        if worse or (r1.blowup_time is None and r0.blowup_time is None and r1.sup_A_tilde > r0.sup_A_tilde):
            bad.append((r0.mu, r1.mu))
    return bad


# ----------------------------------------------------------------------------
# twin runs

@dataclass
class TwinRunResult:
    times: np.ndarray
    G: np.ndarray
    diss_u: np.ndarray
    diss_Q: np.ndarray
    c_fit: float
    kappa1: float
    kappa2: float
    self_consistent: bool
    c_fit_refined: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def c_fit_change(self) -> float | None:
        if self.c_fit_refined is None:
            return None
        if self.c_fit == 0.0:
            return 0.0 if self.c_fit_refined == 0.0 else math.inf
        return abs(self.c_fit_refined - self.c_fit) / abs(self.c_fit)

    @property
    def bound_satisfied(self) -> bool:
        stable = self.c_fit_change is None or self.c_fit_change <= 0.05
        return self.self_consistent and stable


def _h1_full(grid, fh, q=False):
    if q:
        l2 = grid.q_inner_hat(fh, fh)
        h1 = sum(grid.q_inner_hat(grid.ik[g] * fh, grid.ik[g] * fh) for g in range(3))
    else:
        l2 = grid.spectral_inner(fh, fh)
        h1 = float(np.sum(grid.weights * grid.k2_deriv * np.abs(fh) ** 2) * grid.volume)
    return l2, h1


def _twin_series(s1: SimState, s2: SimState, p: MaterialParams):
    grid = s1.grid
    du = s1.u_hat - s2.u_hat
    dQ = s1.Q_hat - s2.Q_hat
    ul2, uh1 = _h1_full(grid, du)
    ql2, qh1 = _h1_full(grid, dQ, q=True)
    G = ul2 + ql2 + qh1
    lap = grid.q_inner_hat(grid.k2 * dQ, grid.k2 * dQ)
    return G, p.mu * uh1, p.gamma * p.L1**2 * lap


def _kappas(s1: SimState, s2: SimState):
    g = s1.grid
    l2, h1 = _h1_full(g, s1.u_hat)
    ql2, qh1 = _h1_full(g, s1.Q_hat, q=True)
    k1 = math.sqrt(l2) + math.sqrt(ql2 + qh1)
    ul2, uh1 = _h1_full(g, s2.u_hat)
    ql2b, qh1b = _h1_full(g, s2.Q_hat, q=True)
    qh2 = g.q_inner_hat(g.k2 * s2.Q_hat, g.k2 * s2.Q_hat)
    k2 = math.sqrt(ul2 + uh1) + math.sqrt(ql2b + qh1b + qh2)
    return k1, k2


def _twin_once(initial1, initial2, p, config, sample_every):
    if initial1.grid != initial2.grid:
        raise ValueError("twin states live on different grids")
    cfg = dyn.SolverConfig(dt=config.dt, t_end=config.t_end, scheme=config.scheme,
                           mollifier_n=config.mollifier_n, snapshot_every=0)
    n = cfg.n_steps
    if abs(n * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("twin runs need t_end to be a multiple of dt")
    s1, s2 = initial1.copy(), initial2.copy()
    op = dyn.ImexOperator(s1.grid, p, cfg.dt) if cfg.scheme == "imex" else None
    times, Gs, du, dq = [], [], [], []
    k1, k2 = _kappas(s1, s2)

    def record(a, b):
        G, x, y = _twin_series(a, b, p)
        times.append(a.t)
        Gs.append(G)
        du.append(x)
        dq.append(y)

    record(s1, s2)
    for i in range(1, n + 1):
        s1 = dyn.step(s1, p, cfg, op)
        s2 = dyn.step(s2, p, cfg, op)
        if not (dyn._is_sane(s1) and dyn._is_sane(s2)):
            raise dyn.BlowUpError(s1.t, dyn.state_norms(s1), dyn.RunResult(final=s1, steps=i))
        a, b = _kappas(s1, s2)
        k1, k2 = max(k1, a), max(k2, b)
        if i % sample_every == 0:
            record(s1, s2)
    return np.array(times), np.array(Gs), np.array(du), np.array(dq), k1, k2


def _fit(times, G):
    if G[0] == 0.0:
        if np.all(G == 0.0):
            return 0.0
        raise ValueError("G(0) = 0 for distinct trajectories: degenerate perturbation")
    with np.errstate(divide="ignore"):
        rates = (np.log(G[1:]) - math.log(G[0])) / times[1:]
    return float(np.max(rates)) if rates.size else 0.0


def twin_run(initial1: SimState, initial2: SimState, p: MaterialParams, config: dyn.SolverConfig,
             sample_every: int = 1, refine: bool = False) -> TwinRunResult:
    """Evolve two states with identical settings and fit G(t) <= G(0) e^{C t}.

    G = ||du||^2 + ||dQ||^2_{H^1} (full H^1 norm). ``C_fit`` is the largest
    observed exponent over the sampled times; with ``refine`` the pair is run
    again at dt/2 on the same sample times and the refit exponent recorded.
    """
    times, G, du, dq, k1, k2 = _twin_once(initial1, initial2, p, config, sample_every)
    t0 = times[0]
    rel = times - t0
    c = _fit(rel, G)
    ok = bool(np.all(G <= G[0] * np.exp(c * rel) * (1 + 1e-6) + 0.0))
    result = TwinRunResult(times, G, du, dq, c, k1, k2, ok)
    if refine:
        half = dyn.SolverConfig(dt=config.dt / 2, t_end=config.t_end, scheme=config.scheme,
                                mollifier_n=config.mollifier_n, snapshot_every=0)
        t2, G2, *_ = _twin_once(initial1, initial2, p, half, 2 * sample_every)
        result.c_fit_refined = _fit(t2 - t2[0], G2)
        result.extra["G_refined"] = G2
    return result


def perturb(state: SimState, scale: float, seed: int, decay: float = 3.0) -> SimState:
    """Add a smooth random perturbation (solenoidal in u) of rms size ``scale``."""
    grid = state.grid
    if scale == 0.0:
        return state.copy()
    du = random_band_limited(grid, "vector", decay, seed, solenoidal=True, amplitude=scale)
    dq = random_band_limited(grid, "qtensor", decay, seed + 1, amplitude=scale)
    out = SimState(grid, state.u_hat + grid.to_spectral(du), state.Q_hat + grid.to_spectral(dq), state.t)
    out.u_hat = grid.leray_hat(grid.dealias(out.u_hat))
    out.Q_hat = grid.dealias(out.Q_hat)
    return out


# ----------------------------------------------------------------------------
# mollifier algebra

def mollifier_suite(grid: SpectralGrid, n_list=(1, 2, 4, 8), seed: int = 0) -> list[IdentityReport]:
    """Idempotence, self-adjointness and derivative commutation of J_n on
    random (unfiltered) grid data."""
    rng = np.random.default_rng(seed)
    reports = []
    for n in n_list:
        f = rng.standard_normal(grid.shape)
        g = rng.standard_normal(grid.shape)
        # idempotence is a statement about the multiplier, so compare coefficients
        fh = grid.to_spectral(f)
        jfh = grid.mollify_hat(fh, n)
        jjfh = grid.mollify_hat(jfh, n)
        reports.append(IdentityReport(f"idempotence[n={n}]", float(np.max(np.abs(jjfh - jfh))),
                                      float(np.max(np.abs(jfh)))))
        jf = grid.to_physical(jfh)
        lhs = grid.inner(jf, g)
        rhs = grid.inner(f, grid.mollify(g, n))
        scale = math.sqrt(grid.inner(f, f) * grid.inner(g, g))
        reports.append(IdentityReport(f"self_adjoint[n={n}]", lhs - rhs, scale))
        worst = 0.0
        grad_norm = 0.0
        for axis in range(3):
            a = grid.derivative(jf, axis)
            b = grid.mollify(grid.derivative(f, axis), n)
            worst = max(worst, float(np.max(np.abs(a - b))))
            grad_norm += grid.inner(grid.derivative(f, axis), grid.derivative(f, axis))
        # sup-norm residual against the L2 size of grad f normalised by volume
        reports.append(IdentityReport(f"derivative_commute[n={n}]", worst,
                                      math.sqrt(grad_norm / grid.volume)))
    return reports


# ----------------------------------------------------------------------------
# delta-system dissipation bound

def delta_dissipation_constant(p: MaterialParams) -> float:
    return 2.0 * (p.L4**2 + (p.L2 + p.L3) ** 2) / p.L1 + p.L1 * abs(p.L2 + p.L3)


def delta_dissipation_check(grid: SpectralGrid, Q1: np.ndarray, Q2: np.ndarray,
                            p: MaterialParams) -> IdentityReport:
    """Margin of ||M_dQ + E_dQ||^2 >= (L1^2/2)||lap dQ||^2 - C ||grad dQ||^2.

    ``value`` is the margin (non-negative when the bound holds); ``scale`` is
    the left side plus the absolute right side.
    """
    dQ = grid.dealias(grid.to_spectral(np.asarray(Q1) - np.asarray(Q2)))
    M, E = ldg.elastic_operator_hat(grid, dQ, p)
    lhs = grid.q_inner_hat(M + E, M + E)
    lap = grid.q_inner_hat(grid.k2 * dQ, grid.k2 * dQ)
    grad = sum(grid.q_inner_hat(grid.ik[g] * dQ, grid.ik[g] * dQ) for g in range(3))
    rhs = 0.5 * p.L1**2 * lap - delta_dissipation_constant(p) * grad
    return IdentityReport("delta_dissipation_margin", lhs - rhs, lhs + abs(rhs))


# ----------------------------------------------------------------------------
# structural invariants

def structure_report(state: SimState) -> dict:
    """Trace and asymmetry of the reconstructed Q, and spectral divergence of u
    relative to ||u||."""
    m = ta.to_matrix(state.Q)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    asym = m - np.swapaxes(m, 0, 1)
    grid = state.grid
    unorm = math.sqrt(max(grid.spectral_inner(state.u_hat, state.u_hat), 0.0))
    div = grid.spectral_divergence_max(state.u_hat)
    return {
        "max_trace": float(np.max(np.abs(trace))),
        "max_asym": float(np.max(np.abs(asym))),
        "div_ratio": 0.0 if div == 0.0 else (div / unorm if unorm > 0 else math.inf),
    }
