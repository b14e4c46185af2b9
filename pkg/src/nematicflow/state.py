from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectral_domain import SpectralGrid


@dataclass
class SimState:
    """Velocity and Q-tensor at time t, held as spectral coefficients.

    ``u_hat`` has shape (3,) + grid.rshape, ``Q_hat`` (5,) + grid.rshape.
    """

    grid: SpectralGrid
    u_hat: np.ndarray
    Q_hat: np.ndarray
    t: float = 0.0
    meta: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.u_hat.shape != (3,) + self.grid.rshape:
            raise ValueError(f"u_hat has shape {self.u_hat.shape}, grid expects {(3,) + self.grid.rshape}")
        if self.Q_hat.shape != (5,) + self.grid.rshape:
            raise ValueError(f"Q_hat has shape {self.Q_hat.shape}, grid expects {(5,) + self.grid.rshape}")

    @classmethod
    def from_physical(cls, grid: SpectralGrid, u, Q, t: float = 0.0, project: bool = True) -> "SimState":
        """Build a state from grid values; by default u is Leray-projected and
        both fields are truncated to the dealiased modes."""
        u = np.zeros((3,) + grid.shape) if u is None else np.asarray(u, dtype=float)
        Q = np.zeros((5,) + grid.shape) if Q is None else np.asarray(Q, dtype=float)
        u_hat = grid.to_spectral(u)
        Q_hat = grid.to_spectral(Q)
        if project:
            u_hat = grid.leray_hat(grid.dealias(u_hat))
            Q_hat = grid.dealias(Q_hat)
        return cls(grid, u_hat, Q_hat, float(t))

    @classmethod
    def zeros(cls, grid: SpectralGrid, t: float = 0.0) -> "SimState":
        return cls(grid, np.zeros((3,) + grid.rshape, complex), np.zeros((5,) + grid.rshape, complex), t)

    @property
    def u(self) -> np.ndarray:
        return self.grid.to_physical(self.u_hat)

    @property
    def Q(self) -> np.ndarray:
        return self.grid.to_physical(self.Q_hat)

    def copy(self) -> "SimState":
        return SimState(self.grid, self.u_hat.copy(), self.Q_hat.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u_hat)) and np.all(np.isfinite(self.Q_hat)))

    def components(self) -> np.ndarray:
        """Eight physical components (u1, u2, u3, q11, q12, q13, q22, q23)."""
        return np.concatenate([self.u, self.Q])
