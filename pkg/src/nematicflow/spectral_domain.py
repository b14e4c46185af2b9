"""Periodic box discretisation: transforms, spectral derivatives, projectors.

Fields are numpy arrays whose last three axes are the grid. Leading axes, if
any, are components (3 for vectors, 5 for Q-tensors in the storage of
:mod:`nematicflow.tensor_algebra`, (3, 3) for general matrices).

Spectral coefficients use the real-to-complex layout of ``scipy.fft.rfftn``
with ``norm="forward"``, so the k=0 coefficient is the grid mean and a single
sine mode ``sin(k.x)`` shows up as ``-i/2`` at ``+k``.
"""
from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from . import tensor_algebra as ta

WORKERS_ENV = "NEMATICFLOW_WORKERS"
_AXES = (-3, -2, -1)


def fft_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "")
    if not value:
        return -1
    workers = int(value)
    if workers == 0 or workers < -1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer or -1")
    return workers


class SpectralGrid:
    """Uniform periodic grid on the cube [0, L)^3 with n1 x n2 x n3 points.

    The 2/3-rule mask keeps the modes with ``3 |m_i| < n_i`` on every axis,
    where ``k_i = 2 pi m_i / L``; quadratic products of fields supported on
    the mask are alias-free after truncation back onto it.
    """

    def __init__(self, n, box_length: float = 2.0 * np.pi):
        if np.isscalar(n):
            n = (int(n),) * 3
        n = tuple(int(v) for v in n)
        if len(n) != 3:
            raise ValueError("grid needs three sizes")
        for v in n:
            if v < 8 or v % 2:
                raise ValueError(f"grid sizes must be even and >= 8, got {n}")
        if not box_length > 0:
            raise ValueError("box_length must be positive")
        self.n = n
        self.box_length = float(box_length)
        self.shape = n
        self.rshape = (n[0], n[1], n[2] // 2 + 1)
        self.volume = self.box_length**3
        self.npoints = n[0] * n[1] * n[2]
        self.workers = fft_workers()

        scale = 2.0 * np.pi / self.box_length
        m = [np.fft.fftfreq(n[0], 1.0 / n[0]), np.fft.fftfreq(n[1], 1.0 / n[1]),
             np.fft.rfftfreq(n[2], 1.0 / n[2])]
        self.modes = [
            m[0].reshape(-1, 1, 1),
            m[1].reshape(1, -1, 1),
            m[2].reshape(1, 1, -1),
        ]
        self.k = [scale * mi for mi in self.modes]
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self.kmag = np.sqrt(self.k2)
        # derivative multipliers with Nyquist modes removed
        self.ik = []
        for axis in range(3):
            kd = self.k[axis].copy()
            kd[np.abs(self.modes[axis]) == n[axis] // 2] = 0.0
            self.ik.append(1j * kd)
        self.k2_deriv = sum((d.imag) ** 2 for d in self.ik)
        self.ik_stack = np.stack([np.broadcast_to(d, self.rshape) for d in self.ik])
        self.dealias_mask = (
            (3 * np.abs(self.modes[0]) < n[0])
            & (3 * np.abs(self.modes[1]) < n[1])
            & (3 * np.abs(self.modes[2]) < n[2])
        )
        # multiplicity of each stored rfft coefficient in the full spectrum
        w = np.full(self.rshape[2], 2.0)
        w[0] = 1.0
        if n[2] % 2 == 0:
            w[-1] = 1.0
        self.weights = np.broadcast_to(w.reshape(1, 1, -1), self.rshape)
        self._kd = [d.imag for d in self.ik]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(self.k2_deriv > 0, 1.0 / self.k2_deriv, 0.0)
        self._inv_k2 = inv

    def __repr__(self) -> str:
        return f"SpectralGrid(n={self.n}, box_length={self.box_length!r})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, SpectralGrid) and self.n == other.n
                and self.box_length == other.box_length)

    def __hash__(self):
        return hash((self.n, self.box_length))

    # coordinates -----------------------------------------------------------
    @property
    def x(self) -> list[np.ndarray]:
        h = [self.box_length / v for v in self.n]
        return [
            (np.arange(self.n[0]) * h[0]).reshape(-1, 1, 1),
            (np.arange(self.n[1]) * h[1]).reshape(1, -1, 1),
            (np.arange(self.n[2]) * h[2]).reshape(1, 1, -1),
        ]

    def mesh(self) -> list[np.ndarray]:
        return [np.broadcast_to(xi, self.shape) for xi in self.x]

    # transforms ------------------------------------------------------------
    def _check(self, f, shape):
        if np.shape(f)[-3:] != shape:
            raise ValueError(f"field trailing shape {np.shape(f)[-3:]} does not match grid {shape}")

    def to_spectral(self, f: np.ndarray) -> np.ndarray:
        self._check(f, self.shape)
        return sfft.rfftn(f, axes=_AXES, norm="forward", workers=self.workers)

    def to_physical(self, fh: np.ndarray) -> np.ndarray:
        self._check(fh, self.rshape)
        return sfft.irfftn(fh, s=self.shape, axes=_AXES, norm="forward", workers=self.workers)

    def dealias(self, fh: np.ndarray) -> np.ndarray:
        return fh * self.dealias_mask

    # differential operators -------------------------------------------------
    def derivative_hat(self, fh: np.ndarray, axis: int) -> np.ndarray:
        return self.ik[axis] * fh

    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        return self.to_physical(self.derivative_hat(self.to_spectral(f), axis))

    def gradient_hat(self, fh: np.ndarray) -> np.ndarray:
        """Stack of the three derivatives along a new trailing component axis.

        Result shape is ``fh.shape[:-3] + (3,) + rshape``.
        """
        fh = np.asarray(fh)
        return fh[..., None, :, :, :] * self.ik_stack

    def laplacian_hat(self, fh: np.ndarray) -> np.ndarray:
        return -self.k2 * fh

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.to_physical(self.laplacian_hat(self.to_spectral(f)))

    def divergence_hat(self, vh: np.ndarray) -> np.ndarray:
        return self.ik[0] * vh[0] + self.ik[1] * vh[1] + self.ik[2] * vh[2]

    def matrix_divergence_hat(self, sh: np.ndarray) -> np.ndarray:
        """(div sigma)_i = d_j sigma_ij for a (3, 3, ...) spectral field."""
        return np.stack([self.divergence_hat(sh[i]) for i in range(3)])

    # projectors ---------------------------------------------------------------
    def leray_hat(self, vh: np.ndarray) -> np.ndarray:
        """Remove the component of each mode parallel to the derivative
        wavevector (Nyquist entries zeroed, matching :meth:`divergence_hat`);
        k=0 untouched."""
        kd = self._kd
        kdotv = (kd[0] * vh[0] + kd[1] * vh[1] + kd[2] * vh[2]) * self._inv_k2
        return np.stack([vh[i] - kd[i] * kdotv for i in range(3)])

    def leray_project(self, v: np.ndarray) -> np.ndarray:
        return self.to_physical(self.leray_hat(self.to_spectral(v)))

    def mollifier_mask(self, n: int) -> np.ndarray:
        """Indicator of 1/n <= |k| <= n (physical wavenumber units)."""
        if n < 1:
            raise ValueError("mollifier index must be >= 1")
        return (self.kmag >= 1.0 / n) & (self.kmag <= n)

    def mollify_hat(self, fh: np.ndarray, n: int) -> np.ndarray:
        return fh * self.mollifier_mask(n)

    def mollify(self, f: np.ndarray, n: int) -> np.ndarray:
        return self.to_physical(self.mollify_hat(self.to_spectral(f), n))

    # quadrature -------------------------------------------------------------
    def integrate(self, f: np.ndarray) -> float:
        """Grid quadrature of a scalar field (exact for trigonometric polynomials
        whose modes do not alias onto k=0)."""
        return float(np.mean(f) * self.volume)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """L2 inner product summed over any leading component axes."""
        return float(np.sum(f * g) / self.npoints * self.volume)

    def spectral_inner(self, fh: np.ndarray, gh: np.ndarray) -> float:
        """Parseval form of :meth:`inner` on spectral coefficients."""
        return float(np.sum(self.weights * (fh * np.conj(gh)).real) * self.volume)

    def q_inner_hat(self, ah: np.ndarray, bh: np.ndarray) -> float:
        """Integral of tr(A B) for two Q-tensor fields given spectrally."""
        prod = ta.frobenius(ah, np.conj(bh)).real
        return float(np.sum(self.weights * prod) * self.volume)

    def q_inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return self.integrate(ta.frobenius(a, b))

    def padded_physical(self, fh: np.ndarray, m) -> np.ndarray:
        """Evaluate a spectral field on a finer m^3 grid by zero padding.

        Products of padded fields integrate exactly as long as their total
        degree stays below m on every axis.
        """
        if np.isscalar(m):
            m = (int(m),) * 3
        if any(mi < ni for mi, ni in zip(m, self.n)):
            raise ValueError("padded grid must not be coarser")
        lead = fh.shape[:-3]
        out = np.zeros(lead + (m[0], m[1], m[2] // 2 + 1), dtype=complex)
        h0, h1 = self.n[0] // 2, self.n[1] // 2
        src0 = np.r_[0:h0, self.n[0] - h0 + 1:self.n[0]]
        dst0 = np.r_[0:h0, m[0] - h0 + 1:m[0]]
        src1 = np.r_[0:h1, self.n[1] - h1 + 1:self.n[1]]
        dst1 = np.r_[0:h1, m[1] - h1 + 1:m[1]]
        h2 = self.n[2] // 2
        out[..., dst0[:, None], dst1[None, :], :h2] = fh[..., src0[:, None], src1[None, :], :h2]
        return sfft.irfftn(out, s=m, axes=_AXES, norm="forward", workers=self.workers)

    def spectral_divergence_max(self, vh: np.ndarray) -> float:
        return float(np.max(np.abs(self.divergence_hat(vh))))


class Norms(NamedTuple):
    l2: float
    h1: float
    h2: float
    l4: float


def _as_components(f: np.ndarray) -> np.ndarray:
    """Flatten a field to (ncomp, ...) with Frobenius weighting for Q-tensors."""
    f = np.asarray(f)
    if f.ndim == 3:
        return f[None]
    if f.ndim == 4 and f.shape[0] == 5:
        return ta.to_matrix(f).reshape((9,) + f.shape[1:])
    if f.ndim == 5:
        return f.reshape((f.shape[0] * f.shape[1],) + f.shape[2:])
    return f


def discrete_norms(grid: SpectralGrid, f: np.ndarray) -> Norms:
    """L2 norm, H1 and H2 seminorms and L4 norm of a field.

    Five-component fields are read as Q-tensors and measured in the Frobenius
    norm, so the implied q33 entry and the symmetric partners are counted.
    """
    c = _as_components(f)
    ch = grid.to_spectral(c)
    l2sq = grid.spectral_inner(ch, ch)
    h1sq = float(np.sum(grid.weights * grid.k2_deriv * np.abs(ch) ** 2) * grid.volume)
    h2sq = float(np.sum(grid.weights * grid.k2 ** 2 * np.abs(ch) ** 2) * grid.volume)
    pointwise = np.sum(c**2, axis=0)
    l4 = grid.integrate(pointwise**2) ** 0.25
    return Norms(np.sqrt(max(l2sq, 0.0)), np.sqrt(h1sq), np.sqrt(h2sq), l4)


def random_band_limited(
    grid: SpectralGrid,
    kind: str = "scalar",
    spectrum_decay: float = 2.0,
    seed: int = 0,
    solenoidal: bool = False,
    amplitude: float | None = None,
    kmax: float | None = None,
) -> np.ndarray:
    """Deterministic random field supported on the dealiased, mean-free modes.

    Coefficient magnitudes scale as ``(1 + |k|)**(-spectrum_decay)``. ``kind`` is
    ``"scalar"``, ``"vector"`` or ``"qtensor"``; Q-tensor fields are drawn as
    general matrices and projected pointwise onto S0. ``amplitude`` rescales the
    result to that root-mean-square value; ``kmax`` further restricts |k|.
    """
    if not spectrum_decay > 0:
        raise ValueError("spectrum_decay must be positive")
    ncomp = {"scalar": 1, "vector": 3, "qtensor": 9}[kind]
    rng = np.random.default_rng(seed)
    shape = (ncomp,) + grid.rshape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    support = grid.dealias_mask & (grid.k2 > 0)
    if kmax is not None:
        support = support & (grid.kmag <= kmax)
    coeffs *= (1.0 + grid.kmag) ** (-spectrum_decay) * support
    f = grid.to_physical(coeffs)
    if kind == "qtensor":
        f = ta.sym_traceless_project(f.reshape((3, 3) + grid.shape))
    elif kind == "vector" and solenoidal:
        f = grid.to_physical(grid.leray_hat(grid.to_spectral(f)))
    elif kind == "scalar":
        f = f[0]
    if amplitude is not None:
        comps = _as_components(f)
        rms = np.sqrt(np.mean(np.sum(comps**2, axis=0)))
        if rms > 0:
            f = f * (amplitude / rms)
    return f
