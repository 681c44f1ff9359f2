"""Discrete-torus Bogoliubov-de Gennes engine.

Operators are matrices over the torus Fourier modes (optionally cut to
|h p_i| <= pcut); the matrix trace equals the trace per unit volume.
Multiplication operators enter as mode-space convolutions, which on the
full mode set coincides with collocation on the N^d position grid.
"""

from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh


def _single_thread_blas():
    """Multithreaded BLAS loses badly on the small dense matrices the
    verification loops grind through; pin it inside those loops."""
    try:
        from threadpoolctl import threadpool_limits
        return threadpool_limits(limits=1)
    except ImportError:  # pragma: no cover
        return nullcontext()

from . import specfun
from .errors import AssemblyError, DomainError, ResolutionError, SolverError
from .gl import GLField, GLSpectralResult, GLCoefficients, MomentumQuadrature, \
    field_inner_products, minimize_gl_ray
from .grids import TorusGrid
from .model import ExternalFields, ModelConfig
from .ti_bcs import PairingData


def default_torus_grid(config: ModelConfig, h: float = None,
                       scale: float = 1.0, pcut: float = None) -> TorusGrid:
    """N per axis from the microscale rule 1/N <= h/8 (times scale)."""
    h = config.h if h is None else h
    N = int(np.ceil(8.0 / h * scale / 2) * 2)
    N = max(N, config.numerics.get("torus_points_min", 0))
    if pcut is None:
        pcut = config.numerics.get("torus_pcut")
    return TorusGrid(min(config.d, 2), N, h, pcut)


def momentum_support(pairing: PairingData, rel: float = 1e-10) -> float:
    """Momentum radius beyond which |t_*| < rel * max|t_*|."""
    probe = np.linspace(0, 25.0, 1001)
    if pairing.grid.d == 1:
        tv = np.abs(pairing.t_star(probe))
    else:
        pts = np.zeros((probe.size, pairing.grid.d))
        pts[:, 0] = probe
        tv = np.abs(pairing.t_star(pts))
    above = np.nonzero(tv > rel * tv.max())[0]
    return float(probe[above[-1]]) if len(above) else 10.0


# ---------------------------------------------------------------------------
# operators

@dataclass
class LatticeOperator:
    mat: np.ndarray
    basis: str = "mode"
    hermitian: bool = False
    grid: TorusGrid = None


def _mat(op):
    return op.mat if isinstance(op, LatticeOperator) else np.asarray(op)


def _neg_index(grid: TorusGrid) -> np.ndarray:
    """Permutation sending mode n to -n (mod N on the full set)."""
    index = grid.mode_index()
    out = np.empty(grid.n_modes, dtype=int)
    half = grid.N // 2
    for i, m in enumerate(grid.modes):
        neg = tuple(((-k + half) % grid.N) - half for k in m)
        j = index.get(neg)
        if j is None:
            raise AssemblyError("mode set not closed under negation")
        out[i] = j
    return out


def conjugate_in_position(A, grid: TorusGrid) -> np.ndarray:
    """Entrywise complex conjugate of the position-basis matrix, expressed
    back in the mode basis: conj + mode negation on both indices."""
    A = _mat(A)
    neg = _neg_index(grid)
    return np.conj(A)[np.ix_(neg, neg)]


def convolution_matrix(hat_map: dict, grid: TorusGrid) -> np.ndarray:
    """Matrix of multiplication by the function with the given sparse
    Fourier coefficients. Full grids wrap differences mod N (exact
    collocation); cut grids compress (couplings leaving the band drop)."""
    n = grid.n_modes
    out = np.zeros((n, n), dtype=complex)
    index = grid.mode_index()
    half = grid.N // 2
    for q, val in hat_map.items():
        if val == 0:
            continue
        for i, m in enumerate(grid.modes):
            if grid.full:
                tgt = tuple((((m[a] - q[a]) + half) % grid.N) - half
                            for a in range(grid.d))
            else:
                tgt = tuple(m[a] - q[a] for a in range(grid.d))
            j = index.get(tgt)
            if j is not None:
                out[i, j] += val
    return out


def _field_maps(fields: ExternalFields, grid: TorusGrid):
    if fields.d < grid.d:
        raise DomainError("field dimension below grid dimension")
    # project field modes onto the lattice dimension (extra axes must be 0)
    W = {}
    A = {}
    for nmode, v in fields.W_hat.items():
        if all(k == 0 for k in nmode[grid.d:]):
            W[nmode[:grid.d]] = W.get(nmode[:grid.d], 0.0) + v
    for nmode, vec in fields.A_hat.items():
        if all(k == 0 for k in nmode[grid.d:]):
            key = nmode[:grid.d]
            A.setdefault(key, np.zeros(grid.d, dtype=complex))
            A[key] += vec[:grid.d]
    return W, A


def assemble_h(h: float, mu: float, fields: ExternalFields,
               grid: TorusGrid) -> LatticeOperator:
    """One-particle Hamiltonian (-ih grad + hA)^2 + h^2 W - mu."""
    W, A = _field_maps(fields, grid)
    qmax = 0
    for nm in list(W) + list(A):
        qmax = max(qmax, max(abs(k) for k in nm))
    if grid.full and 2 * qmax >= grid.N // 2:
        raise AssemblyError(
            f"field modes up to {qmax} alias on N={grid.N}; enlarge the grid")
    hp = grid.h * grid.momenta()
    hp_odd = grid.h * grid.momenta_odd()
    n = grid.n_modes
    H = np.diag(np.sum(hp * hp, axis=1) - mu).astype(complex)
    if W:
        H += h * h * convolution_matrix(W, grid)
    if A:
        AA = {}
        for q1, v1 in A.items():
            for q2, v2 in A.items():
                key = tuple(a + b for a, b in zip(q1, q2))
                AA[key] = AA.get(key, 0.0) + complex(np.dot(v1, v2))
        H += h * h * convolution_matrix(AA, grid)
        for j in range(grid.d):
            Aj = {q: v[j] for q, v in A.items() if v[j] != 0}
            if not Aj:
                continue
            Cj = convolution_matrix(Aj, grid)
            Pj = np.diag(hp_odd[:, j])
            H += h * (Pj @ Cj + Cj @ Pj)
    defect = float(np.max(np.abs(H - H.conj().T)))
    if defect > 1e-11 * (float(np.max(np.abs(H))) + 1.0):
        raise AssemblyError(f"assembled h not Hermitian (defect {defect:.2e})")
    return LatticeOperator(0.5 * (H + H.conj().T), "mode", True, grid)


def psi_hat_map(psi: GLField) -> dict:
    out = {}
    M = psi.cutoff
    for idx, val in np.ndenumerate(psi.coeffs):
        if val != 0:
            out[tuple(k - M for k in idx)] = val
    return out


def make_symmetrized_pair(psi: GLField, g_vals: np.ndarray, h: float,
                          grid: TorusGrid) -> LatticeOperator:
    """(h/2)(psi(x) g(-ih grad) + g(-ih grad) psi(x)); the calling code
    supplies the sign (the gap operator carries a minus)."""
    g_vals = np.asarray(g_vals, dtype=float)
    if g_vals.shape != (grid.n_modes,):
        raise DomainError("g must be sampled on the grid modes")
    Psi = convolution_matrix(psi_hat_map(psi), grid)
    G = np.diag(g_vals).astype(complex)
    out = (h / 2.0) * (Psi @ G + G @ Psi)
    return LatticeOperator(out, "mode", False, grid)


def assemble_HDelta(h_op: LatticeOperator,
                    delta_op: LatticeOperator) -> LatticeOperator:
    grid = h_op.grid or delta_op.grid
    hmat = _mat(h_op)
    D = _mat(delta_op)
    if hmat.shape != D.shape:
        raise DomainError("h and Delta block shapes differ")
    hbar = conjugate_in_position(hmat, grid)
    Dbar = conjugate_in_position(D, grid)
    H = np.block([[hmat, D], [Dbar, -hbar]])
    defect = float(np.max(np.abs(H - H.conj().T)))
    if defect > 1e-10 * (float(np.max(np.abs(H))) + 1.0):
        raise AssemblyError(
            f"H_Delta not Hermitian (defect {defect:.2e}); Delta must satisfy "
            "conj(Delta) = Delta^*")
    return LatticeOperator(0.5 * (H + H.conj().T), "mode", True, grid)


def block_diagonal_H0(h_op: LatticeOperator) -> LatticeOperator:
    grid = h_op.grid
    hmat = _mat(h_op)
    z = np.zeros_like(hmat)
    hbar = conjugate_in_position(hmat, grid)
    return LatticeOperator(np.block([[hmat, z], [z, -hbar]]), "mode", True, grid)


# ---------------------------------------------------------------------------
# states

def _fermi(z):
    z = np.clip(z, -700, 700)
    return np.where(z > 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))


@dataclass
class BdGState:
    Gamma: np.ndarray
    beta: float
    source: str = "custom"
    grid: TorusGrid = None
    evals: np.ndarray = None       # eigenvalues of the generating H (Gibbs)
    evecs: np.ndarray = None

    @property
    def n(self) -> int:
        return self.Gamma.shape[0] // 2

    @property
    def gamma(self) -> np.ndarray:
        return self.Gamma[: self.n, : self.n]

    @property
    def alpha(self) -> np.ndarray:
        return self.Gamma[: self.n, self.n:]


def gibbs_state(H: LatticeOperator, beta: float) -> BdGState:
    if beta <= 0:
        raise DomainError("beta must be positive")
    Hm = _mat(H)
    try:
        lam, U = eigh(Hm)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    occ = _fermi(beta * lam)
    Gamma = (U * occ) @ U.conj().T
    return BdGState(Gamma, beta, "gibbs", getattr(H, "grid", None), lam, U)


def admissibility_defects(state: BdGState, grid: TorusGrid = None) -> dict:
    grid = grid or state.grid
    G = state.Gamma
    n = state.n
    w = np.linalg.eigvalsh(G)
    range_defect = max(float(-w.min()), float(w.max() - 1.0), 0.0)
    neg = _neg_index(grid)
    neg2 = np.concatenate([neg, neg + n])
    Gbar = np.conj(G)[np.ix_(neg2, neg2)]
    U = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    sym_defect = float(np.max(np.abs(U @ G @ U.conj().T - (np.eye(2 * n) - Gbar))))
    S = grid.synthesis_matrix()
    alpha_pos = S @ state.alpha @ S.conj().T
    alpha_sym = float(np.max(np.abs(alpha_pos - alpha_pos.T)))
    return {"range": range_defect, "particle_hole": sym_defect,
            "alpha_symmetry": alpha_sym}


# ---------------------------------------------------------------------------
# traces and norms

def trace_per_volume(op) -> complex:
    return complex(np.trace(_mat(op)))


def tr0(op) -> complex:
    """Sum of the traces of the two diagonal blocks (equals the full
    trace for any finite matrix; kept as the regularized form)."""
    A = _mat(op)
    n = A.shape[0] // 2
    return complex(np.trace(A[:n, :n]) + np.trace(A[n:, n:]))


def trace_norms(op, p: float) -> float:
    """Schatten p-norm with the unit-volume trace convention."""
    if p < 1:
        raise DomainError("p must be >= 1")
    sv = np.linalg.svd(_mat(op), compute_uv=False)
    if np.isinf(p):
        return float(sv.max())
    return float(np.sum(sv ** p) ** (1.0 / p))


def h1_norm(op, h: float, grid: TorusGrid) -> float:
    """(||A||_2^2 + h^2 ||grad A||_2^2)^{1/2}; the gradient acts on the
    left (x) index as the mode multiplier."""
    A = _mat(op)
    p2 = np.sum(grid.momenta() ** 2, axis=1)
    weights = 1.0 + h * h * p2
    return float(np.sqrt(np.sum(weights[:, None] * np.abs(A) ** 2)))


# ---------------------------------------------------------------------------
# free energy

@dataclass
class FreeEnergyBreakdown:
    kinetic: float
    entropy: float
    interaction: float
    total: float
    normal_reference: float
    T: float


def interaction_kernel(config: ModelConfig, grid: TorusGrid, h: float,
                       images: int = 5) -> np.ndarray:
    """Periodized V((x - y)/h) over all grid point pairs."""
    if grid.N < 8.0 / h:
        raise ResolutionError(
            f"grid N={grid.N} too coarse for microscale h={h} (need N >= 8/h)")
    x = grid.position_points()
    u = x[:, None, :] - x[None, :, :]
    out = np.zeros(u.shape[:2])
    shifts = range(-images, images + 1)
    if grid.d == 1:
        for m in shifts:
            out += config.V((u + m) / h)
    else:
        for m1 in shifts:
            for m2 in shifts:
                out += config.V((u + np.array([m1, m2])) / h)
    return out


def _entropy_from_occupations(occ: np.ndarray) -> float:
    occ = np.clip(occ, 0.0, 1.0)

    def xlnx(x):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)

    return float(-0.5 * np.sum(xlnx(occ) + xlnx(1.0 - occ)))


def state_entropy(state: BdGState) -> float:
    """S(Gamma) = -1/2 Tr[Gamma ln Gamma + (1-Gamma) ln(1-Gamma)]."""
    if state.evals is not None and state.source == "gibbs":
        occ = _fermi(state.beta * state.evals)
    else:
        occ = np.linalg.eigvalsh(state.Gamma)
    return _entropy_from_occupations(occ)


def normal_free_energy(h_op: LatticeOperator, T: float) -> float:
    """F^0 = -T Tr ln(1 + e^{-h/T})."""
    ee = np.linalg.eigvalsh(_mat(h_op))
    return float(T * np.sum(specfun.f(ee / T)))


def bcs_free_energy(state: BdGState, T: float, h: float, config: ModelConfig,
                    grid: TorusGrid, h_op: LatticeOperator = None,
                    vkernel: np.ndarray = None) -> FreeEnergyBreakdown:
    """Kinetic + entropy + interaction breakdown of the BCS functional,
    with the normal reference F^0 of the same one-particle Hamiltonian."""
    if h_op is None:
        h_op = assemble_h(h, config.mu, config.fields, grid)
    if vkernel is None:
        vkernel = interaction_kernel(config, grid, h)
    kinetic = float(np.real(np.trace(_mat(h_op) @ state.gamma)))
    entropy = state_entropy(state)
    S = grid.synthesis_matrix()
    alpha_pos = S @ state.alpha @ S.conj().T
    interaction = float(np.sum(vkernel * np.abs(alpha_pos) ** 2))
    total = kinetic - T * entropy + interaction
    return FreeEnergyBreakdown(kinetic, entropy, interaction, total,
                               normal_free_energy(h_op, T), T)


# ---------------------------------------------------------------------------
# relative entropy and Klein's inequality

def _xlnx_spectral(w):
    w = np.clip(w, 0.0, 1.0)
    return np.where(w > 0, w * np.log(np.where(w > 0, w, 1.0)), 0.0)


def relative_entropy(Gamma, GammaPrime) -> float:
    """H_0(Gamma, Gamma') = Tr[Gamma(ln Gamma - ln Gamma') +
    (1-Gamma)(ln(1-Gamma) - ln(1-Gamma'))]; +inf when Gamma' has an
    exact 0/1 eigenvalue whose eigenspace is not annihilated by the
    matching spectral part of Gamma."""
    G = _mat(Gamma) if not isinstance(Gamma, BdGState) else Gamma.Gamma
    Gp = _mat(GammaPrime) if not isinstance(GammaPrime, BdGState) else GammaPrime.Gamma
    w, V = eigh(G)
    wp, Vp = eigh(Gp)
    w = np.clip(w, 0.0, 1.0)
    tiny = 1e-14
    lo = wp <= tiny
    hi = wp >= 1.0 - tiny
    if np.any(lo) or np.any(hi):
        overlap = np.abs(Vp.conj().T @ G @ Vp)
        if np.any(overlap[lo, lo].real > 1e-12) or \
           np.any((1.0 - overlap[hi, hi].real) > 1e-12):
            return float("inf")
    own = float(np.sum(_xlnx_spectral(w) + _xlnx_spectral(1.0 - w)))
    lnp = (Vp * np.log(np.clip(wp, 1e-300, None))) @ Vp.conj().T
    ln1p = (Vp * np.log(np.clip(1.0 - wp, 1e-300, None))) @ Vp.conj().T
    cross = float(np.real(np.trace(G @ lnp) + np.trace((np.eye(len(w)) - G) @ ln1p)))
    return own - cross


def klein_gap(Gamma, H0) -> float:
    """LHS - RHS of the quantified Klein inequality for Gamma0 =
    (1 + e^{H0})^{-1}; H0 must commute with the block projector P0."""
    G = _mat(Gamma) if not isinstance(Gamma, BdGState) else Gamma.Gamma
    H = _mat(H0)
    n = H.shape[0] // 2
    off = max(float(np.max(np.abs(H[:n, n:]))), float(np.max(np.abs(H[n:, :n]))))
    if off > 1e-12 * (float(np.max(np.abs(H))) + 1.0):
        raise DomainError("H0 does not commute with the block projector P0")
    lam, U = eigh(H)
    occ0 = _fermi(lam)
    G0 = (U * occ0) @ U.conj().T
    rel = relative_entropy(G, G0)
    K = (U * specfun.kt(lam, 1.0)) @ U.conj().T
    D = G - G0
    term1 = float(np.real(np.trace(K @ D @ D)))
    Q = G @ (np.eye(2 * n) - G) - G0 @ (np.eye(2 * n) - G0)
    term2 = (4.0 / 3.0) * float(np.real(np.trace(Q @ Q)))
    return rel - term1 - term2


# ---------------------------------------------------------------------------
# the key identity

def key_identity_residual(Gamma: BdGState, delta_op: LatticeOperator, T: float,
                          config: ModelConfig, grid: TorusGrid, h: float,
                          tilde_alpha: np.ndarray = None,
                          h_op: LatticeOperator = None,
                          vkernel: np.ndarray = None) -> float:
    """Relative defect of the free-energy identity: both sides evaluated
    independently, |LHS - RHS| / (1 + |LHS| + |RHS|)."""
    if h_op is None:
        h_op = assemble_h(h, config.mu, config.fields, grid)
    if vkernel is None:
        vkernel = interaction_kernel(config, grid, h)
    beta = 1.0 / T
    S = grid.synthesis_matrix()
    D_pos = S @ _mat(delta_op) @ S.conj().T
    if tilde_alpha is None:
        if np.min(np.abs(vkernel)) < 1e-13:
            raise DomainError(
                "V vanishes on the grid; pass tilde_alpha explicitly")
        tilde_alpha = D_pos / (2.0 * vkernel)

    # LHS: F_T(Gamma) - F_T(Gamma_0)
    fe = bcs_free_energy(Gamma, T, h, config, grid, h_op, vkernel)
    # LHS normal reference computed the same way as fe, not via the F^0
    # shortcut: Gamma_0 has occupations {f(beta e), 1 - f(beta e)}.
    ee = np.linalg.eigvalsh(_mat(h_op))
    occ0 = _fermi(beta * ee)
    kin0 = float(np.sum(ee * occ0))
    ent0 = _entropy_from_occupations(np.concatenate([occ0, 1.0 - occ0]))
    lhs = fe.total - (kin0 - T * ent0)

    HD = assemble_HDelta(h_op, delta_op)
    lamD = np.linalg.eigvalsh(_mat(HD))
    lam0 = np.sort(np.concatenate([ee, -ee]))
    trace_term = (T / 2.0) * float(
        np.sum(specfun.f(beta * np.sort(lamD)) - specfun.f(beta * lam0)))
    GD = gibbs_state(HD, beta)
    rel = relative_entropy(Gamma.Gamma if isinstance(Gamma, BdGState) else Gamma, GD)
    alpha = Gamma.alpha if isinstance(Gamma, BdGState) else _mat(Gamma)[:grid.n_modes, grid.n_modes:]
    alpha_pos = S @ alpha @ S.conj().T
    I1 = float(np.sum(vkernel * np.abs(tilde_alpha) ** 2))
    I2 = float(np.sum(vkernel * np.abs(tilde_alpha - alpha_pos) ** 2))
    rhs = trace_term + (T / 2.0) * rel - I1 + I2
    return abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


# ---------------------------------------------------------------------------
# semiclassical expansion and the pair-wavefunction decomposition

def _micro_t_multiplier(pairing: PairingData, grid: TorusGrid) -> np.ndarray:
    hp = grid.micro_momenta()
    return pairing.t_star(hp[:, 0] if grid.d == 1 else hp)


def gap_operator(psi: GLField, pairing: PairingData, h: float,
                 grid: TorusGrid) -> LatticeOperator:
    """Delta = -(h/2)(psi t_*(-ih grad) + t_*(-ih grad) psi)."""
    tv = _micro_t_multiplier(pairing, grid)
    op = make_symmetrized_pair(psi, tv, h, grid)
    return LatticeOperator(-op.mat, "mode", False, grid)


def semiclassical_residual(psi: GLField, pairing: PairingData, h: float,
                           beta: float, fields: ExternalFields,
                           grid: TorusGrid,
                           quad: MomentumQuadrature = None) -> dict:
    """lhs = (h^d/beta) Tr0[f(beta H_Delta) - f(beta H_0)] against the
    two-term expansion h^2 E1 + h^4 E2."""
    quad = quad or MomentumQuadrature(pairing, pairing.mu, grid.d)
    cover = np.pi * grid.N * h if grid.full else grid.pcut
    if cover < quad.qmax:
        raise ResolutionError(
            f"momentum range {cover:.1f} below t_* support {quad.qmax:.1f}")
    h_op = assemble_h(h, pairing.mu, fields, grid)
    delta = gap_operator(psi, pairing, h, grid)
    HD = assemble_HDelta(h_op, delta)
    ee = np.linalg.eigvalsh(_mat(h_op))
    lamD = np.linalg.eigvalsh(_mat(HD))
    lam0 = np.sort(np.concatenate([ee, -ee]))
    lhs = (h ** grid.d / beta) * float(
        np.sum(specfun.f(beta * np.sort(lamD)) - specfun.f(beta * lam0)))

    ints = quad.integrals(beta)
    ips = field_inner_products(psi, fields)
    E1 = -(beta / 2.0) * ips["norm2_sq"] * ints["t2_g0"]
    E2 = (-(beta / 8.0) * float(np.real(np.sum(ips["grad_jk"][:grid.d, :grid.d]
                                               * ints["t_ddt_g0"])))
          + (beta ** 2 / 8.0) * float(np.real(np.sum(ips["cov_grad_jk"][:grid.d, :grid.d]
                                                     * ints["tensor_g1_g2"])))
          + (beta ** 2 / 2.0) * ips["psi_W_psi"] * ints["t2_g1"]
          + (beta ** 2 / 8.0) * ips["norm4_4"] * ints["t4_g1_over_xi"])
    record = {
        "lhs": lhs,
        "E1": float(E1), "E2": float(E2),
        "E1_term": float(h * h * E1), "E2_term": float(h ** 4 * E2),
        "residual": float(lhs - h * h * E1 - h ** 4 * E2),
    }
    return record


def alpha_delta_deviation(psi: GLField, pairing: PairingData, h: float,
                          beta: float, fields: ExternalFields,
                          grid: TorusGrid) -> dict:
    """H^1 distance of the Gibbs-state pairing block from its predicted
    leading form (h/2)(psi phi(-ih grad) + phi(-ih grad) psi)."""
    h_op = assemble_h(h, pairing.mu, fields, grid)
    delta = gap_operator(psi, pairing, h, grid)
    HD = assemble_HDelta(h_op, delta)
    state = gibbs_state(HD, beta)
    hp = grid.micro_momenta()
    q2 = np.sum(hp * hp, axis=1)
    tv = _micro_t_multiplier(pairing, grid)
    phi = (beta / 2.0) * specfun.g0(beta * (q2 - pairing.mu)) * tv
    lead = make_symmetrized_pair(psi, phi, h, grid)
    dev = state.alpha - lead.mat
    return {
        "h1_norm_dev": h1_norm(dev, h, grid),
        "h1_norm_lead": h1_norm(lead.mat, h, grid),
    }


def assemble_KTAW(T: float, h: float, mu: float, fields: ExternalFields,
                  grid: TorusGrid) -> LatticeOperator:
    """Matrix function h_op / tanh(h_op/(2T)) via eigendecomposition."""
    if T <= 0:
        raise DomainError("T must be positive")
    h_op = assemble_h(h, mu, fields, grid)
    lam, U = eigh(_mat(h_op))
    K = (U * specfun.kt(lam, T)) @ U.conj().T
    return LatticeOperator(0.5 * (K + K.conj().T), "mode", True, grid)


# ---------------------------------------------------------------------------
# trial-state witness for the shifted critical temperature

def trial_state_tc_witness(h: float, pairing: PairingData,
                           coeffs: GLCoefficients,
                           spectral: GLSpectralResult, config: ModelConfig,
                           grid: TorusGrid = None, n_theta: int = 41,
                           s_tol: float = 1e-4, probe_width: float = 0.25,
                           tol_scale: float = 1e-12) -> dict:
    """Largest temperature at which the Gibbs trial family built from
    theta * psi_* beats the normal state; reported as the normalized
    shift (Tc - T_witness)/(h^2 Tc), which tends to D_c."""
    Tc = pairing.Tc
    Dc = spectral.Dc
    if grid is None:
        pc = momentum_support(pairing) + 3.0
        pc = max(pc, np.sqrt(max(pairing.mu, 0.0) + 60.0 * Tc) + 1.0)
        grid = default_torus_grid(config, h=h, pcut=pc)
    h_op = assemble_h(h, config.mu, config.fields, grid)
    hmat = _mat(h_op)
    ee = np.linalg.eigvalsh(hmat)
    vkernel = interaction_kernel(config, grid, h)
    delta_base = gap_operator(spectral.psi_star, pairing, h, grid)
    S = grid.synthesis_matrix()
    n = grid.n_modes
    hbar = conjugate_in_position(hmat, grid)
    Dbar_base = conjugate_in_position(delta_base.mat, grid)
    HD_work = np.zeros((2 * n, 2 * n), dtype=complex)
    HD_work[:n, :n] = hmat
    HD_work[n:, n:] = -hbar

    def gain_best(s: float, thetas=None) -> float:
        T = Tc * (1.0 - s * h * h)
        beta = 1.0 / T
        F0 = float(T * np.sum(specfun.f(beta * ee)))
        tol = tol_scale * (1.0 + abs(F0))
        theta_ray, _ = minimize_gl_ray(max(s, Dc + probe_width), coeffs, spectral)
        if thetas is None:
            thetas = np.geomspace(1e-3, 10.0, n_theta) * theta_ray
        best = 0.0
        for th in thetas:
            HD_work[:n, n:] = th * delta_base.mat
            HD_work[n:, :n] = th * Dbar_base
            lam, U = eigh(HD_work)
            occ = _fermi(beta * lam)
            # only the gamma-trace and the alpha block of Gamma are needed
            U1 = U[:n, :]
            kin = float(np.real(np.einsum("ik,ik,k->", U1.conj(), hmat @ U1, occ)))
            ent = _entropy_from_occupations(occ)
            alpha = (U1 * occ) @ U[n:, :].conj().T
            al_pos = S @ alpha @ S.conj().T
            inter = float(np.sum(vkernel * np.abs(al_pos) ** 2))
            g = kin - T * ent + inter - F0
            if g < best:
                best = g
        return best, tol

    with _single_thread_blas():
        width = 1.0
        lo = Dc - width
        g_lo, tol = gain_best(lo)
        while g_lo < -tol:
            width *= 2.0
            lo = Dc - width
            if width > 64:
                raise SolverError("no normal bracket endpoint found")
            g_lo, tol = gain_best(lo)
        width_hi = 1.0
        hi = Dc + width_hi
        g_hi, tol = gain_best(hi)
        flag = "ok"
        while g_hi >= -tol:
            width_hi *= 2.0
            hi = Dc + width_hi
            if width_hi > 64:
                flag = "no_witness"
                break
            g_hi, tol = gain_best(hi)
        if flag == "no_witness":
            return {"T_witness": 0.0, "normalized_shift": float("nan"),
                    "h": h, "Tc": Tc, "Dc": Dc, "flag": flag}
        while hi - lo > s_tol:
            mid = 0.5 * (lo + hi)
            g, tol = gain_best(mid)
            if g < -tol:
                hi = mid
            else:
                lo = mid
        s_star = 0.5 * (lo + hi)
    return {
        "T_witness": Tc * (1.0 - s_star * h * h),
        "normalized_shift": s_star,
        "h": h, "Tc": Tc, "Dc": Dc, "flag": flag,
        "grid_N": grid.N, "n_modes": grid.n_modes,
    }
