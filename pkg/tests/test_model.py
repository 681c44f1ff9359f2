import json

import numpy as np
import pytest

import bcsgl
from bcsgl import model
from bcsgl.errors import ConfigError, ResolutionError
from bcsgl.grids import TorusGrid
from bcsgl.model import (ExternalFields, InteractionPotential, ModelConfig,
                         analyze_field, config_from_dict, field_samples,
                         validate)


def _config_with_potential(pot, d=1, fields=None):
    return ModelConfig(d=d, mu=1.0, V=pot,
                       fields=fields or ExternalFields.none(d), h=0.1)


def test_gaussian_benchmark_passes(benchmark_config):
    report = validate(benchmark_config)
    assert report.passed
    names = {c.name for c in report.checks}
    assert {"reflection_symmetry", "lp_norm_finite",
            "field_conjugate_symmetry", "fourier_summability"} <= names


def test_odd_potential_fails_symmetry():
    odd = InteractionPotential.from_callable(
        lambda x: x[..., 0] * np.exp(-np.sum(x * x, axis=-1)))
    report = validate(_config_with_potential(odd))
    failing = {c.name for c in report.checks if not c.passed}
    assert "reflection_symmetry" in failing


def test_divergent_summability_flagged():
    W = {}
    for n in range(1, 65):
        W[(n,)] = (2 * np.pi * n) ** -0.5
        W[(-n,)] = (2 * np.pi * n) ** -0.5
    fields = ExternalFields(1, W, {})
    cfg = _config_with_potential(InteractionPotential.gaussian_well(), fields=fields)
    report = validate(cfg)
    checks = {c.name: c for c in report.checks}
    assert not checks["fourier_summability"].passed


def test_decaying_summability_passes():
    W = {}
    for n in range(1, 65):
        W[(n,)] = (2 * np.pi * n) ** -2.5
        W[(-n,)] = (2 * np.pi * n) ** -2.5
    fields = ExternalFields(1, W, {})
    cfg = _config_with_potential(InteractionPotential.gaussian_well(), fields=fields)
    report = validate(cfg)
    checks = {c.name: c for c in report.checks}
    assert checks["fourier_summability"].passed


def test_conjugate_symmetry_defect():
    fields = ExternalFields(1, {(1,): 0.5 + 0.1j}, {})  # no (-1,) partner
    cfg = _config_with_potential(InteractionPotential.gaussian_well(), fields=fields)
    report = validate(cfg)
    checks = {c.name: c for c in report.checks}
    assert not checks["field_conjugate_symmetry"].passed


def test_validate_idempotent(benchmark_config):
    r1 = validate(benchmark_config)
    r2 = validate(benchmark_config)
    for c1, c2 in zip(r1.checks, r2.checks):
        assert c1.measured == c2.measured and c1.passed == c2.passed


# ---------------------------------------------------------------------------
# field synthesis

def test_constant_field():
    grid = TorusGrid(1, 16, 0.1)
    fields = ExternalFields(1, {(0,): 0.37}, {})
    W, _ = field_samples(fields, grid)
    np.testing.assert_allclose(W.real, 0.37, atol=1e-14)
    assert np.max(np.abs(W.imag)) < 1e-14


def test_cosine_field():
    grid = TorusGrid(1, 32, 0.1)
    fields = ExternalFields(1, {(1,): 0.5, (-1,): 0.5}, {})
    W, _ = field_samples(fields, grid)
    np.testing.assert_allclose(W.real, np.cos(2 * np.pi * grid.x1), atol=1e-12)
    assert np.max(np.abs(W.imag)) < 1e-12


def test_round_trip(rng):
    grid = TorusGrid(1, 64, 0.1)
    coeffs = {}
    for n in range(1, 6):
        c = rng.normal() + 1j * rng.normal()
        coeffs[(n,)] = c
        coeffs[(-n,)] = np.conj(c)
    coeffs[(0,)] = rng.normal() + 0j
    fields = ExternalFields(1, coeffs, {})
    W, _ = field_samples(fields, grid)
    assert np.max(np.abs(W.imag)) < 1e-12
    recovered = analyze_field(W, grid)
    for n, c in coeffs.items():
        assert recovered[n] == pytest.approx(c, abs=1e-12)


def test_aliasing_rejected():
    grid = TorusGrid(1, 8, 0.1)
    fields = ExternalFields(1, {(4,): 1.0, (-4,): 1.0}, {})
    with pytest.raises(ResolutionError):
        field_samples(fields, grid)


def test_summability_exact_on_retained_set():
    fields = ExternalFields(1, {(1,): 0.5, (-1,): 0.5},
                            {(2,): np.array([0.25 + 0j]),
                             (-2,): np.array([0.25 + 0j])})
    sums = fields.summability_partial_sums()
    expect = 2 * 0.5 + 2 * (1 + 4 * np.pi) * 0.25
    assert sums[-1] == pytest.approx(expect, rel=1e-14)


# ---------------------------------------------------------------------------
# config files

def test_benchmark_config_parses(benchmark_config):
    assert benchmark_config.d == 1
    assert benchmark_config.mu == 1.0
    assert benchmark_config.h == 0.1
    assert benchmark_config.V.kind == "gaussian_well"
    assert benchmark_config.fields.W_hat[(1,)] == 0.5 + 0j


def test_missing_keys_rejected():
    with pytest.raises(ConfigError, match="schema|missing"):
        config_from_dict({"dimension": 1, "mu": 1.0})


def test_schema_violation_rejected():
    raw = {"dimension": 1, "mu": 1.0, "h": 2.0,
           "potential": {"kind": "gaussian_well", "params": {}}}
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_unknown_potential_kind_rejected():
    raw = {"dimension": 1, "mu": 1.0, "h": 0.1,
           "potential": {"kind": "lennard_jones", "params": {}}}
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_tabulated_potential_round_trip():
    pot = InteractionPotential.tabulated([0.0, 1.0, 2.0], [-2.0, -1.0, 0.0])
    x = np.array([[0.5], [-0.5], [3.0]])
    vals = pot(x)
    assert vals[0] == pytest.approx(-1.5)
    assert vals[0] == vals[1]  # radial, hence symmetric
    assert vals[2] == 0.0
