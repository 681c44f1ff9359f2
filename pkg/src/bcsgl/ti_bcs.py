"""Translation-invariant spectral problem: critical temperature, pairing
function alpha_*, momentum profile t_*, and the translation-invariant
free-energy functional with its one-parameter trial scan.

The linearized operator K_T(-i grad) + V acts on a periodic box
[-L, L)^d, restricted to reflection-symmetric functions. In d=1 the
restriction is realized exactly in a cosine mode basis (dense, fast);
in higher dimensions through a projected iterative eigensolve.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from . import specfun
from .backend import get_kernels
from .errors import DegenerateGroundState, DomainError, NoCriticalTemperature, SolverError
from .grids import PositionGrid
from .model import ModelConfig

DEFAULT_L = 40.0
DEFAULT_N = {1: 1024, 2: 128, 3: 48}


def default_position_grid(config: ModelConfig, scale: float = 1.0) -> PositionGrid:
    L = config.numerics.get("box_half_width", DEFAULT_L)
    N = config.numerics.get("box_points", DEFAULT_N[config.d])
    N = int(2 * round(N * scale / 2))
    grid = PositionGrid(config.d, L, N)
    width = config.V.width()
    if width is not None and not grid.resolves_width(width):
        raise DomainError(
            f"grid spacing {grid.dx:.4g} does not resolve potential width {width}")
    return grid


@dataclass
class SpectralSolution:
    eigenvalue: float
    eigenvector: np.ndarray        # position samples, L2-normalized
    residual_norm: float
    gap_to_next: float


@dataclass
class PairingData:
    Tc: float
    beta_c: float
    alpha_star: np.ndarray         # position samples on the box grid
    t_star_samples: np.ndarray     # on the box momentum mesh (fftfreq order)
    simplicity_gap: float
    grid: PositionGrid
    mu: float
    _weights: np.ndarray = None    # V*alpha_star*dx^d, flattened

    def t_star(self, q) -> np.ndarray:
        """t_*(q) = -2 (2 pi)^{-d/2} int V alpha_* e^{-iq.x} dx at arbitrary
        momenta; real and even by construction (cosine transform)."""
        q = np.asarray(q, dtype=float)
        pts = self.grid.points()
        if self.grid.d == 1:
            qs = q.reshape(-1)
            vals = get_kernels().cos_transform(self._weights, pts[:, 0], np.ascontiguousarray(qs))
        else:
            qs = q.reshape(-1, self.grid.d)
            vals = _cos_transform_nd(self._weights, pts, qs)
        vals = -2.0 * (2 * np.pi) ** (-self.grid.d / 2.0) * vals
        return vals.reshape(q.shape if self.grid.d == 1 else q.shape[:-1])

    def t_star_second_moment(self, q, j: int, k: int) -> np.ndarray:
        """d_j d_k t_*(q), the transform of 2 x_j x_k V alpha_* /(2 pi)^{d/2}."""
        q = np.asarray(q, dtype=float)
        pts = self.grid.points()
        w = self._weights * pts[:, j] * pts[:, k]
        if self.grid.d == 1:
            qs = q.reshape(-1)
            vals = get_kernels().cos_transform(w, pts[:, 0], np.ascontiguousarray(qs))
        else:
            qs = q.reshape(-1, self.grid.d)
            vals = _cos_transform_nd(w, pts, qs)
        vals = 2.0 * (2 * np.pi) ** (-self.grid.d / 2.0) * vals
        return vals.reshape(q.shape if self.grid.d == 1 else q.shape[:-1])

    def alpha_star_hat(self, q) -> np.ndarray:
        """Momentum profile of the pairing function, t_*/(2 K_Tc)."""
        q = np.asarray(q, dtype=float)
        q2 = q * q if self.grid.d == 1 else np.sum(q * q, axis=-1)
        return self.t_star(q) / (2.0 * specfun.kt(q2 - self.mu, self.Tc))


def _cos_transform_nd(weights, pts, qs):
    out = np.empty(qs.shape[0])
    chunk = max(1, int(4e6 / max(pts.shape[0], 1)))
    for start in range(0, qs.shape[0], chunk):
        block = qs[start:start + chunk] @ pts.T
        out[start:start + chunk] = np.cos(block) @ weights
    return out


# ---------------------------------------------------------------------------
# the reflection-symmetric operator

class _SymmetricOperator1D:
    """K_T(-i d/dx) + V on the cosine (reflection-symmetric) subspace.

    Basis: e_0 = |p=0>, e_k = (|p_k> + |-p_k>)/sqrt(2), e_K = |Nyquist>,
    with p_k = (pi/L) k, k = 0..N/2. V enters through the circulant
    coefficients of its position samples.
    """

    def __init__(self, config: ModelConfig, grid: PositionGrid):
        self.grid = grid
        self.mu = config.mu
        x = grid.x1
        Vx = config.V(x[:, None])
        phase = np.exp(-1j * grid.p1 * (-grid.L))
        c = np.real(np.fft.fft(Vx) / grid.N * phase)
        K = grid.N // 2
        idx = np.arange(K + 1)
        kk, ll = np.meshgrid(idx, idx, indexing="ij")
        M = c[np.abs(kk - ll) % grid.N] + c[(kk + ll) % grid.N]
        r = np.ones(K + 1)
        r[0] = r[K] = np.sqrt(2.0)
        self.Vsym = M / r[:, None] / r[None, :]
        self.pk = grid.dp * idx
        self.r = r
        self.Vx = Vx

    def matrix(self, T: float) -> np.ndarray:
        return self.Vsym + np.diag(specfun.kt(self.pk ** 2 - self.mu, T))

    def lowest(self, T: float, nev: int = 2):
        M = self.matrix(T)
        w, U = eigh(M, subset_by_index=(0, nev - 1))
        return w, U

    def to_position(self, vec: np.ndarray) -> np.ndarray:
        fac = np.full(len(self.pk), np.sqrt(2.0))
        fac[0] = fac[-1] = 1.0
        x = self.grid.x1
        vals = np.cos(np.outer(x, self.pk)) @ (vec * fac) / np.sqrt(2 * self.grid.L)
        return vals


class _SymmetricOperatorND:
    """FFT-multiplier apply with symmetric-subspace projection (d >= 2).

    The antisymmetric sector is shifted far above the spectrum of
    interest so a 'smallest algebraic' Lanczos solve lands in the
    symmetric subspace.
    """

    def __init__(self, config: ModelConfig, grid: PositionGrid):
        self.grid = grid
        self.mu = config.mu
        self.Vx = config.V(grid.points()).reshape((grid.N,) * grid.d)
        ps = grid.momentum_mesh()
        self.p2 = sum(p * p for p in ps)
        self.shift = 10.0 * (float(np.max(np.abs(self.Vx))) + abs(config.mu) + 1.0)

    def _sym(self, v):
        flip = v
        for ax in range(self.grid.d):
            flip = np.roll(np.flip(flip, axis=ax), 1, axis=ax)
        return 0.5 * (v + flip)

    def apply(self, v, T):
        v = v.reshape((self.grid.N,) * self.grid.d)
        vs = self._sym(v)
        kt_vals = specfun.kt((self.p2 - self.mu).ravel(), T).reshape(self.p2.shape)
        out = np.fft.ifftn(kt_vals * np.fft.fftn(vs)) + self.Vx * vs
        out = self._sym(out)
        out = out + self.shift * (v - vs) + self.shift * 0.0
        return out.ravel()

    def lowest(self, T: float, nev: int = 2):
        from scipy.sparse.linalg import LinearOperator, eigsh
        n = self.grid.N ** self.grid.d
        lo = LinearOperator((n, n), matvec=lambda v: self.apply(v, T), dtype=float)
        try:
            w, U = eigsh(lo, k=nev, which="SA", tol=1e-10, maxiter=5000)
        except Exception as exc:
            raise SolverError(f"iterative eigensolve failed: {exc}") from exc
        order = np.argsort(w)
        return w[order], U[:, order]


def _operator(config: ModelConfig, grid: PositionGrid):
    if config.d == 1:
        return _SymmetricOperator1D(config, grid)
    return _SymmetricOperatorND(config, grid)


def lowest_eigenvalue(T: float, config: ModelConfig, grid: PositionGrid,
                      op=None) -> SpectralSolution:
    """Lowest eigenpair of K_T(-i grad) + V on the symmetric subspace."""
    if T < 0:
        raise DomainError("temperature must be non-negative")
    op = op or _operator(config, grid)
    if config.d == 1:
        w, U = op.lowest(T)
        vec_pos = op.to_position(U[:, 0])
        Mv = op.matrix(T) @ U[:, 0]
        residual = float(np.linalg.norm(Mv - w[0] * U[:, 0]))
    else:
        w, U = op.lowest(T)
        vec_pos = U[:, 0].reshape((grid.N,) * grid.d)
        Av = op.apply(U[:, 0], T)
        residual = float(np.linalg.norm(Av - w[0] * U[:, 0]))
        vec_pos = vec_pos / np.sqrt(np.sum(np.abs(vec_pos) ** 2) * grid.dx ** grid.d)
    if config.d == 1:
        nrm = np.sqrt(np.sum(np.abs(vec_pos) ** 2) * grid.dx)
        vec_pos = vec_pos / nrm
    return SpectralSolution(
        eigenvalue=float(w[0]),
        eigenvector=vec_pos,
        residual_norm=residual,
        gap_to_next=float(w[1] - w[0]),
    )


def find_Tc(config: ModelConfig, grid: PositionGrid, tol: float = None) -> dict:
    """Bisection for the sign change of the lowest eigenvalue in T.

    Returns Tc within tol; Tc = 0 when the operator is already
    non-negative at T = 0.
    """
    if tol is None:
        tol = config.numerics.get("tc_tolerance", 1e-8 * max(abs(config.mu), 1.0))
    if tol <= 0:
        raise DomainError("tol must be positive")
    op = _operator(config, grid)

    def low(T):
        if config.d == 1:
            return float(op.lowest(T)[0][0])
        return float(op.lowest(T)[0][0])

    zero_tol = 1e-11 * max(abs(config.mu), 1.0)
    lam0 = low(0.0)
    evaluations = [(0.0, lam0)]
    if lam0 >= -zero_tol:
        return {"Tc": 0.0, "evaluations": evaluations, "bracket": (0.0, 0.0)}

    T_max = 1e3 * max(abs(config.mu), 1.0)
    hi = 0.1 * max(abs(config.mu), 1.0)
    lam_hi = low(hi)
    evaluations.append((hi, lam_hi))
    while lam_hi < 0:
        hi *= 2.0
        if hi > T_max:
            raise NoCriticalTemperature(
                f"lowest eigenvalue still negative at T = {hi/2:.3g}")
        lam_hi = low(hi)
        evaluations.append((hi, lam_hi))
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lam = low(mid)
        evaluations.append((mid, lam))
        if lam < 0:
            lo = mid
        else:
            hi = mid
    return {"Tc": 0.5 * (lo + hi), "evaluations": evaluations, "bracket": (lo, hi)}


def compute_pairing(config: ModelConfig, grid: PositionGrid, Tc: float = None,
                    gap_tol: float = None) -> PairingData:
    """Lowest eigenpair at T = Tc; asserts simplicity; builds t_*.

    Sign convention: alpha_* real with positive integral.
    """
    if Tc is None:
        Tc = find_Tc(config, grid)["Tc"]
    if not Tc > 0:
        raise DomainError("compute_pairing requires Tc > 0")
    if gap_tol is None:
        gap_tol = 1e-6 * max(abs(config.mu), 1.0)
    sol = lowest_eigenvalue(Tc, config, grid)
    if sol.gap_to_next <= gap_tol:
        raise DegenerateGroundState(
            f"gap to next eigenvalue {sol.gap_to_next:.3g} <= {gap_tol:.3g}")
    alpha = np.real(sol.eigenvector)
    if np.sum(alpha) * grid.dx ** grid.d < 0:
        alpha = -alpha
    pts = grid.points()
    Vx = config.V(pts)
    weights = Vx * alpha.ravel() * grid.dx ** grid.d
    pair = PairingData(
        Tc=Tc, beta_c=1.0 / Tc, alpha_star=alpha,
        t_star_samples=None, simplicity_gap=sol.gap_to_next,
        grid=grid, mu=config.mu, _weights=weights,
    )
    pmesh = grid.momentum_mesh()
    if grid.d == 1:
        pair.t_star_samples = pair.t_star(pmesh[0])
    else:
        pq = np.stack([p.ravel() for p in pmesh], axis=-1)
        pair.t_star_samples = pair.t_star(pq).reshape(pmesh[0].shape)
    return pair


# ---------------------------------------------------------------------------
# the translation-invariant functional

def _box_synthesize(f_hat: np.ndarray, grid: PositionGrid) -> np.ndarray:
    """(2 pi)^{-d/2} * sum_p f_hat(p) e^{ip.x} dp^d on the position grid."""
    g = f_hat
    N = grid.N
    k1 = np.rint(np.fft.fftfreq(N) * N).astype(int)
    sign1 = np.where(k1 % 2 == 0, 1.0, -1.0)
    for ax in range(grid.d):
        shape = [1] * grid.d
        shape[ax] = N
        g = g * sign1.reshape(shape)
    vals = np.fft.ifftn(g) * N ** grid.d
    return (2 * np.pi) ** (-grid.d / 2.0) * grid.dp ** grid.d * vals


def _entropy_2x2(gamma_hat, alpha_hat):
    dev = np.sqrt((gamma_hat - 0.5) ** 2 + np.abs(alpha_hat) ** 2)
    lam_p = np.clip(0.5 + dev, 0.0, 1.0)
    lam_m = np.clip(0.5 - dev, 0.0, 1.0)

    def xlnx(x):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    return -(xlnx(lam_p) + xlnx(lam_m))


def ti_free_energy(gamma_hat: np.ndarray, alpha_hat: np.ndarray, T: float,
                   config: ModelConfig, grid: PositionGrid,
                   constraint_slack: float = 1e-12):
    """Value of the translation-invariant functional on momentum samples,
    together with the normal reference value.

    gamma_hat, alpha_hat: arrays over the box momentum mesh (fftfreq
    order along each axis). Admissibility (0 <= gamma <= 1 and
    |alpha|^2 <= gamma(1-gamma)) is enforced pointwise.
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=complex)
    if gamma_hat.shape != (grid.N,) * grid.d:
        raise DomainError("gamma_hat has the wrong shape for the grid")
    bad = (gamma_hat < -constraint_slack) | (gamma_hat > 1 + constraint_slack)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise DomainError(f"gamma_hat out of [0,1] at mode index {tuple(idx)}")
    bad = np.abs(alpha_hat) ** 2 > gamma_hat * (1 - gamma_hat) + constraint_slack
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise DomainError(
            f"|alpha_hat|^2 > gamma(1-gamma) at mode index {tuple(idx)}")

    ps = grid.momentum_mesh()
    xi = sum(p * p for p in ps) - config.mu
    dpd = grid.dp ** grid.d
    kinetic = float(np.sum(xi * gamma_hat) * dpd)
    entropy = float(np.sum(_entropy_2x2(gamma_hat, alpha_hat)) * dpd)

    alpha_x = _box_synthesize(alpha_hat, grid)
    Vx = config.V(grid.points()).reshape((grid.N,) * grid.d)
    interaction = float(np.real(np.sum(Vx * np.abs(alpha_x) ** 2)) * grid.dx ** grid.d)

    value = kinetic - T * entropy + interaction
    beta = 1.0 / T
    normal = float(np.sum(specfun.f(beta * xi.ravel())) * dpd / beta)
    return value, normal


def fermi_dirac_gamma(T: float, config: ModelConfig, grid: PositionGrid):
    ps = grid.momentum_mesh()
    xi = sum(p * p for p in ps) - config.mu
    z = np.clip(xi / T, -700, 700)
    return 1.0 / (1.0 + np.exp(z))


def ti_trial_scan(T: float, config: ModelConfig, pairing: PairingData,
                  amplitudes) -> dict:
    """Scan the one-parameter trial family: per-mode 2x2 Gibbs states of
    the translation-invariant Hamiltonian with off-diagonal a*t_*(p)."""
    amplitudes = list(amplitudes)
    if not amplitudes:
        raise DomainError("empty amplitude list")
    grid = pairing.grid
    ps = grid.momentum_mesh()
    xi = sum(p * p for p in ps) - config.mu
    if grid.d == 1:
        tq = pairing.t_star_samples
    else:
        tq = pairing.t_star_samples
    beta = 1.0 / T
    results = []
    best = (None, np.inf)
    normal_value = None
    for a in amplitudes:
        delta = a * tq
        E = np.sqrt(xi * xi + delta * delta)
        Es = np.where(E > 0, E, 1.0)
        th = np.tanh(np.clip(beta * Es / 2.0, -700, 700))
        gamma = np.where(E > 0, 0.5 * (1.0 - th * xi / Es), 0.5)
        alpha = np.where(E > 0, -0.5 * th * delta / Es, 0.0)
        value, normal = ti_free_energy(gamma, alpha, T, config, grid)
        normal_value = normal
        results.append((a, value))
        if value < best[1]:
            best = (a, value)
    return {"best_amplitude": best[0], "best_value": best[1],
            "normal_value": normal_value, "scan": results}
