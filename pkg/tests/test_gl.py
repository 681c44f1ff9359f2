import numpy as np
import pytest
from scipy.linalg import eigh

import bcsgl
from bcsgl import gl
from bcsgl.errors import AssemblyError, DomainError, OptimizationError
from bcsgl.gl import (GLCoefficients, GLField, MomentumQuadrature,
                      assemble_gl_operator, compute_Dc,
                      compute_gl_coefficients, eval_gl_functional,
                      field_inner_products, minimize_gl_full, minimize_gl_ray,
                      predict_critical_temperature)
from bcsgl.model import ExternalFields
from bcsgl.ti_bcs import PairingData

# frozen from the large-basis oracle (cutoff doubling M=32 -> 64 agrees
# to 5e-13): lowest eigenvalue of (2 pi n)^2 + cos(2 pi x) over plane waves
GOLDEN_MATHIEU = -0.012661594813
# frozen benchmark D_c (M=32; doubling delta 3e-13)
GOLDEN_DC = -0.00011225686341


def test_coefficients_positive(coeffs):
    assert coeffs.Lambda2 > 0
    assert coeffs.Lambda3 > 0
    assert np.all(np.linalg.eigvalsh(coeffs.Lambda0) > 0)


def test_quadrature_error_estimate(coeffs):
    assert coeffs.quadrature_error_estimate < 1e-6


def test_quadrature_doubling(benchmark_config, pairing):
    fine = MomentumQuadrature(pairing, benchmark_config.mu, 1, n_axis=4001)
    half = MomentumQuadrature(pairing, benchmark_config.mu, 1, n_axis=2001)
    a = compute_gl_coefficients(pairing, benchmark_config.mu, 1, quad=fine)
    b = compute_gl_coefficients(pairing, benchmark_config.mu, 1, quad=half)
    for x, y in ((a.Lambda1, b.Lambda1), (a.Lambda2, b.Lambda2),
                 (a.Lambda3, b.Lambda3),
                 (a.Lambda0[0, 0], b.Lambda0[0, 0])):
        assert x == pytest.approx(y, rel=1e-6)


def test_zero_profile_gives_zero_coefficients(benchmark_config, box_grid):
    fake = PairingData(Tc=0.5, beta_c=2.0,
                       alpha_star=np.zeros(box_grid.N),
                       t_star_samples=np.zeros(box_grid.N),
                       simplicity_gap=1.0, grid=box_grid, mu=1.0,
                       _weights=np.zeros(box_grid.N))
    out = compute_gl_coefficients(fake, 1.0, 1)
    assert out.Lambda1 == 0 and out.Lambda2 == 0 and out.Lambda3 == 0
    assert np.all(out.Lambda0 == 0)


# ---------------------------------------------------------------------------
# operator assembly

def _unit_coeffs():
    return GLCoefficients(np.array([[1.0]]), 1.0, 1.0, 1.0, 1.0, 0.0)


def test_free_operator_diagonal(coeffs):
    H, modes = assemble_gl_operator(coeffs, ExternalFields.none(1), 8)
    p = 2 * np.pi * modes[:, 0]
    np.testing.assert_allclose(H, np.diag(coeffs.Lambda0[0, 0] * p ** 2),
                               atol=1e-14)
    assert eigh(H, eigvals_only=True)[0] == pytest.approx(0.0, abs=1e-14)


def test_constant_potential_shift(coeffs):
    c = 0.83
    H0, _ = assemble_gl_operator(coeffs, ExternalFields.none(1), 8)
    Hc, _ = assemble_gl_operator(coeffs, ExternalFields(1, {(0,): c}, {}), 8)
    np.testing.assert_allclose(eigh(Hc, eigvals_only=True),
                               eigh(H0, eigvals_only=True) + coeffs.Lambda1 * c,
                               atol=1e-12)


def test_mathieu_golden():
    fields = ExternalFields(1, {(1,): 0.5, (-1,): 0.5}, {})
    H, _ = assemble_gl_operator(_unit_coeffs(), fields, 32)
    w0 = eigh(H, subset_by_index=(0, 0), eigvals_only=True)[0]
    assert w0 == pytest.approx(GOLDEN_MATHIEU, abs=1e-9)


def test_cutoff_too_small_rejected():
    fields = ExternalFields(1, {(3,): 0.5, (-3,): 0.5}, {})
    with pytest.raises(AssemblyError):
        assemble_gl_operator(_unit_coeffs(), fields, 5)


def test_operator_hermitian_random_fields(coeffs, rng):
    W = {}
    A = {}
    for n in (1, 2):
        c = rng.normal() + 1j * rng.normal()
        W[(n,)], W[(-n,)] = c, np.conj(c)
        a = rng.normal(size=1) + 1j * rng.normal(size=1)
        A[(n,)], A[(-n,)] = a, np.conj(a)
    H, _ = assemble_gl_operator(coeffs, ExternalFields(1, W, A), 12)
    assert np.max(np.abs(H - H.conj().T)) < 1e-13


# ---------------------------------------------------------------------------
# D_c

def test_dc_zero_fields(coeffs):
    sp = compute_Dc(coeffs, ExternalFields.none(1), 8)
    assert abs(sp.Dc) <= 1e-10
    M = sp.psi_star.cutoff
    assert abs(sp.psi_star.coeffs[M]) == pytest.approx(1.0, rel=1e-12)


def test_dc_constant_potential(coeffs):
    c = 0.37
    sp = compute_Dc(coeffs, ExternalFields(1, {(0,): c}, {}), 8)
    assert sp.Dc == pytest.approx(coeffs.Lambda1 * c / coeffs.Lambda2,
                                  abs=1e-10)


def test_dc_benchmark_golden(spectral):
    assert spectral.Dc == pytest.approx(GOLDEN_DC, abs=1e-9)
    assert spectral.cutoff_doubling_delta < 1e-10


def test_dc_diamagnetic_monotone(benchmark_config, coeffs, rng):
    base = compute_Dc(coeffs, benchmark_config.fields, 16,
                      check_convergence=False)
    for _ in range(10):
        re, im = rng.normal(size=2)
        A = {(1,): np.array([re + 1j * im]) * 0.4,
             (-1,): np.array([re - 1j * im]) * 0.4}
        sp = compute_Dc(coeffs, ExternalFields(
            1, dict(benchmark_config.fields.W_hat), A), 16,
            check_convergence=False)
        assert sp.Dc >= base.Dc - 1e-10


def test_dc_gauge_shift_invariance(benchmark_config, coeffs):
    # A -> A + a with 2a in (2 pi Z)^d shifts the minimizing mode only
    base = compute_Dc(coeffs, benchmark_config.fields, 16,
                      check_convergence=False)
    shifted_fields = ExternalFields(1, dict(benchmark_config.fields.W_hat),
                                    {(0,): np.array([np.pi + 0j])})
    sp = compute_Dc(coeffs, shifted_fields, 16, check_convergence=False)
    assert sp.Dc == pytest.approx(base.Dc, abs=1e-10)


# ---------------------------------------------------------------------------
# functional

def test_functional_zero_field_is_zero(coeffs, benchmark_config):
    psi = GLField(1, 8)
    for D in (-1.0, 0.0, 2.0):
        assert eval_gl_functional(psi, D, coeffs, benchmark_config.fields) == 0.0


def test_functional_constant_psi(coeffs):
    c = 0.8 - 0.3j
    psi = GLField.from_modes({(0,): c}, 8, 1)
    D = 1.3
    val = eval_gl_functional(psi, D, coeffs, ExternalFields.none(1))
    expect = -coeffs.Lambda2 * D * abs(c) ** 2 + coeffs.Lambda3 * abs(c) ** 4
    assert val == pytest.approx(expect, rel=1e-13)


def test_functional_ray_curve(benchmark_config, coeffs, spectral):
    # E_D(theta psi_*) = Lambda2 (Dc - D) theta^2 + Lambda3 ||psi*||_4^4 theta^4
    D = spectral.Dc + 0.7
    for theta in (0.3, 1.0, 2.2):
        psi = GLField(1, 32, theta * spectral.psi_star.coeffs)
        val = eval_gl_functional(psi, D, coeffs, benchmark_config.fields)
        expect = (coeffs.Lambda2 * (spectral.Dc - D) * theta ** 2
                  + coeffs.Lambda3 * spectral.psi_star_norm4_4 * theta ** 4)
        assert val == pytest.approx(expect, rel=1e-10)


def test_functional_gradient_check(benchmark_config, coeffs, rng):
    M = 8
    H, modes = assemble_gl_operator(coeffs, benchmark_config.fields, M)
    psi0 = rng.normal(size=2 * M + 1) + 1j * rng.normal(size=2 * M + 1)
    D = 0.7
    Ng = 64
    eps = 1e-6
    for _ in range(5):
        direction = rng.normal(size=2 * M + 1) + 1j * rng.normal(size=2 * M + 1)
        Ep = eval_gl_functional(GLField(1, M, psi0 + eps * direction), D,
                                coeffs, benchmark_config.fields)
        Em = eval_gl_functional(GLField(1, M, psi0 - eps * direction), D,
                                coeffs, benchmark_config.fields)
        fd = (Ep - Em) / (2 * eps)
        vals = GLField(1, M, psi0).synthesize(Ng)
        hat = np.fft.fftn(np.abs(vals) ** 2 * vals) / Ng
        proj = np.array([hat[k % Ng] for k in range(-M, M + 1)])
        grad = (H - coeffs.Lambda2 * D * np.eye(2 * M + 1)) @ psi0 \
            + 2 * coeffs.Lambda3 * proj
        analytic = 2 * np.real(np.vdot(direction, grad))
        assert fd == pytest.approx(analytic, rel=1e-6)


# ---------------------------------------------------------------------------
# minimization

def test_ray_at_critical_value(coeffs, spectral):
    assert minimize_gl_ray(spectral.Dc, coeffs, spectral) == (0.0, 0.0)
    assert minimize_gl_ray(spectral.Dc - 1.0, coeffs, spectral) == (0.0, 0.0)


def test_ray_closed_form(coeffs, spectral):
    theta, value = minimize_gl_ray(spectral.Dc + 1.0, coeffs, spectral)
    n44 = spectral.psi_star_norm4_4
    assert theta ** 2 == pytest.approx(
        coeffs.Lambda2 / (2 * coeffs.Lambda3 * n44), rel=1e-14)
    assert value == pytest.approx(
        -coeffs.Lambda2 ** 2 / (4 * coeffs.Lambda3 * n44), rel=1e-14)


def test_full_minimization_below_dc(benchmark_config, coeffs, spectral_m8):
    psi, val = minimize_gl_full(spectral_m8.Dc - 0.5, coeffs,
                                benchmark_config.fields, 8, spectral_m8)
    assert -1e-8 <= val <= 0.0


def test_full_minimization_above_dc(benchmark_config, coeffs, spectral_m8):
    D = spectral_m8.Dc + 0.5
    psi, val = minimize_gl_full(D, coeffs, benchmark_config.fields, 8,
                                spectral_m8)
    _, ray = minimize_gl_ray(D, coeffs, spectral_m8)
    assert val < -1e-8
    assert val <= ray + 1e-10


def test_full_minimization_zero_fields_analytic(coeffs):
    sp = compute_Dc(coeffs, ExternalFields.none(1), 8)
    psi, val = minimize_gl_full(1.0, coeffs, ExternalFields.none(1), 8, sp)
    assert val == pytest.approx(-(coeffs.Lambda2 * 1.0) ** 2
                                / (4 * coeffs.Lambda3), rel=1e-10)


def test_full_minimization_iteration_cap(benchmark_config, coeffs, spectral_m8):
    with pytest.raises(OptimizationError):
        minimize_gl_full(spectral_m8.Dc + 1.0, coeffs,
                         benchmark_config.fields, 8, spectral_m8, max_iters=3)


# ---------------------------------------------------------------------------
# prediction

def test_predict_no_shift():
    rec = predict_critical_temperature(0.2, 0.77, 0.0)
    assert rec["T_pred"] == 0.77


def test_predict_arithmetic():
    rec = predict_critical_temperature(0.1, 1.0, 2.0)
    assert rec["T_pred"] == pytest.approx(0.98, rel=1e-15)


def test_predict_negative_dc_raises_tc():
    rec = predict_critical_temperature(0.1, 1.0, -0.5)
    assert rec["T_pred"] > 1.0


def test_predict_error_orders():
    assert predict_critical_temperature(0.1, 1.0, 0.0, d=1)["error_order"] == \
        {"lower": "h", "upper": "h^{1/3}"}
    assert "ln" in predict_critical_temperature(0.1, 1.0, 0.0, d=2)["error_order"]["upper"]
    assert predict_critical_temperature(0.1, 1.0, 0.0, d=3)["error_order"]["upper"] == "h^{1/5}"
    with pytest.raises(DomainError):
        predict_critical_temperature(1.5, 1.0, 0.0)


def test_glfield_validation():
    with pytest.raises(DomainError):
        GLField.from_modes({(9,): 1.0}, 8, 1)
    with pytest.raises(DomainError):
        GLField(1, 8).synthesize(10)
