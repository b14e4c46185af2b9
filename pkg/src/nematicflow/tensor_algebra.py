"""Pointwise algebra of symmetric traceless 3x3 tensors.

A Q-tensor is stored as its five independent entries ``(q11, q12, q13, q22, q23)``
along the leading axis of an array; ``q33 = -q11 - q22`` and symmetry are implied.
Every function here accepts either a single point (leading axis only) or whole
grid fields (leading axes followed by any number of spatial axes).

Full matrices carry two leading axes ``(3, 3, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# (row, col) of the five stored components
COMPONENTS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2))

# Levi-Civita symbol as explicit (i, j, k, sign) entries
LEVI_CIVITA = (
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (0, 2, 1, -1.0),
    (2, 1, 0, -1.0),
    (1, 0, 2, -1.0),
)


@dataclass(frozen=True)
class QTensor:
    """A single symmetric traceless tensor."""

    q11: float = 0.0
    q12: float = 0.0
    q13: float = 0.0
    q22: float = 0.0
    q23: float = 0.0

    @classmethod
    def from_components(cls, q) -> "QTensor":
        return cls(*(float(v) for v in np.asarray(q, dtype=float)))

    @property
    def components(self) -> np.ndarray:
        return np.array([self.q11, self.q12, self.q13, self.q22, self.q23])

    def matrix(self) -> np.ndarray:
        return to_matrix(self.components)

    def norm(self) -> float:
        return float(np.sqrt(frobenius(self.components, self.components)))


def levi_civita() -> np.ndarray:
    """Dense (3, 3, 3) Levi-Civita array; used only by reference codings."""
    e = np.zeros((3, 3, 3))
    for i, j, k, s in LEVI_CIVITA:
        e[i, j, k] = s
    return e


def to_matrix(q: np.ndarray) -> np.ndarray:
    """Reconstruct the full symmetric traceless matrix, shape (3, 3, ...)."""
    q = np.asarray(q)
    m = np.empty((3, 3) + q.shape[1:], dtype=q.dtype)
    m[0, 0] = q[0]
    m[0, 1] = m[1, 0] = q[1]
    m[0, 2] = m[2, 0] = q[2]
    m[1, 1] = q[3]
    m[1, 2] = m[2, 1] = q[4]
    m[2, 2] = -q[0] - q[3]
    return m


def sym_traceless_project(m: np.ndarray, check: bool = True) -> np.ndarray:
    """Project a general matrix (3, 3, ...) onto S0: sym part minus trace/3.

    Idempotent bit-for-bit on matrices already in S0. ``check=False`` skips the
    finiteness test (hot paths, where blow-up is detected by the integrator).
    """
    m = np.asarray(m)
    if m.shape[:2] != (3, 3):
        raise ValueError(f"expected a (3, 3, ...) array, got shape {m.shape}")
    if check and not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    tr3 = (m[0, 0] + m[1, 1] + m[2, 2]) / 3.0
    q = np.empty((5,) + m.shape[2:], dtype=m.dtype)
    q[0] = m[0, 0] - tr3
    q[1] = (m[0, 1] + m[1, 0]) / 2.0
    q[2] = (m[0, 2] + m[2, 0]) / 2.0
    q[3] = m[1, 1] - tr3
    q[4] = (m[1, 2] + m[2, 1]) / 2.0
    return q


def frobenius(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """tr(A B) for two Q-tensors given in 5-component storage."""
    return (
        a[0] * b[0]
        + a[3] * b[3]
        + (a[0] + a[3]) * (b[0] + b[3])
        + 2.0 * (a[1] * b[1] + a[2] * b[2] + a[4] * b[4])
    )


def trace_invariants(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (tr Q^2, tr Q^3)."""
    q11, q12, q13, q22, q23 = q[0], q[1], q[2], q[3], q[4]
    q33 = -q11 - q22
    tr2 = q11**2 + q22**2 + q33**2 + 2.0 * (q12**2 + q13**2 + q23**2)
    # tr(Q^3) = 3 det(Q) for traceless Q
    det = (
        q11 * (q22 * q33 - q23 * q23)
        - q12 * (q12 * q33 - q23 * q13)
        + q13 * (q12 * q23 - q22 * q13)
    )
    return tr2, 3.0 * det


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise product of two (3, 3, ...) matrix fields."""
    return np.einsum("ik...,kj...->ij...", a, b)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """AB - BA for (3, 3, ...) matrix fields."""
    return matmul(a, b) - matmul(b, a)


def strain_and_vorticity(grad_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split grad_u[i, j] = du_i/dx_j into D (symmetric) and Omega (antisymmetric)."""
    grad_u = np.asarray(grad_u)
    gt = np.swapaxes(grad_u, 0, 1)
    return (grad_u + gt) / 2.0, (grad_u - gt) / 2.0


def q_squared_traceless(q: np.ndarray) -> np.ndarray:
    """Q^2 - tr(Q^2) I / 3 in 5-component storage."""
    m = to_matrix(q)
    return sym_traceless_project(matmul(m, m), check=False)
