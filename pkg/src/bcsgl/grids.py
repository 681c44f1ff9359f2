"""Discretization grids: the large box for the translation-invariant
problem and the unit torus for the BdG lattice."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PositionGrid:
    """Periodic box [-L, L)^d with N points per axis.

    Used for the translation-invariant spectral problem; momentum grid
    spacing is pi/L with |p| up to pi*N/(2L).
    """
    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.N % 2 != 0:
            raise DomainError("N must be even")
        if self.L <= 0:
            raise DomainError("L must be positive")
        if self.d not in (1, 2, 3):
            raise DomainError("d must be 1, 2 or 3")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def x1(self) -> np.ndarray:
        """One axis of position samples."""
        return -self.L + self.dx * np.arange(self.N)

    @property
    def p1(self) -> np.ndarray:
        """One axis of momentum samples (fftfreq order)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def dp(self) -> float:
        return np.pi / self.L

    def position_mesh(self):
        axes = [self.x1] * self.d
        return np.meshgrid(*axes, indexing="ij")

    def momentum_mesh(self):
        axes = [self.p1] * self.d
        return np.meshgrid(*axes, indexing="ij")

    def radius2_mesh(self) -> np.ndarray:
        xs = self.position_mesh()
        return sum(x * x for x in xs)

    def points(self) -> np.ndarray:
        """All positions, shape (N^d, d)."""
        xs = self.position_mesh()
        return np.stack([x.ravel() for x in xs], axis=-1)

    def resolves_width(self, width: float, points_across: int = 8) -> bool:
        return width / self.dx >= points_across


@dataclass(frozen=True)
class TorusGrid:
    """Unit torus [0,1)^d with N points per axis.

    Modes are p = 2*pi*n with n in fftfreq order, |p_i| <= pi*N. An
    optional micro-momentum cut keeps only modes with |h p_i| <= pcut;
    dropped modes carry no pairing weight and Fermi factors below 1e-200
    for the scales this grid is built for, so they cancel identically
    between a trial state and the normal state.
    """
    d: int
    N: int
    h: float
    pcut: float | None = None
    _modes: np.ndarray = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.N % 2 != 0:
            raise DomainError("N must be even")
        if self.d not in (1, 2):
            raise DomainError("lattice dimension must be 1 or 2")
        n1 = np.rint(np.fft.fftfreq(self.N) * self.N).astype(int)
        if self.pcut is not None:
            keep1 = np.abs(self.h * 2 * np.pi * n1) <= self.pcut
            n1 = n1[keep1]
        if self.d == 1:
            modes = n1[:, None]
        else:
            a, b = np.meshgrid(n1, n1, indexing="ij")
            modes = np.stack([a.ravel(), b.ravel()], axis=-1)
        object.__setattr__(self, "_modes", modes)

    @property
    def full(self) -> bool:
        return self.pcut is None

    @property
    def modes(self) -> np.ndarray:
        """Integer mode vectors, shape (n_modes, d)."""
        return self._modes

    @property
    def n_modes(self) -> int:
        return self._modes.shape[0]

    @property
    def x1(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    def momenta(self) -> np.ndarray:
        """Momentum vectors p = 2*pi*n, shape (n_modes, d)."""
        return 2.0 * np.pi * self._modes.astype(float)

    def momenta_odd(self) -> np.ndarray:
        """Momenta for odd (first-derivative) multipliers: the Nyquist
        mode -N/2 has no +N/2 partner, so odd multipliers vanish there."""
        p = 2.0 * np.pi * self._modes.astype(float)
        p[self._modes == -self.N // 2] = 0.0
        return p

    def micro_momenta(self) -> np.ndarray:
        return self.h * self.momenta()

    def position_points(self) -> np.ndarray:
        """All positions, shape (N^d, d)."""
        axes = [self.x1] * self.d
        xs = np.meshgrid(*axes, indexing="ij")
        return np.stack([x.ravel() for x in xs], axis=-1)

    def synthesis_matrix(self) -> np.ndarray:
        """S[j, i] = e^{i p_i . x_j} / N^{d/2}: mode -> position samples.

        For the full mode set S is unitary; for a cut set it is an
        isometry onto the retained band.
        """
        x = self.position_points()
        p = self.momenta()
        return np.exp(1j * (x @ p.T)) / self.N ** (self.d / 2.0)

    def mode_index(self) -> dict:
        return {tuple(m): i for i, m in enumerate(self._modes)}
