import json
from pathlib import Path

import numpy as np
import pytest

import bcsgl
from bcsgl import gl, ti_bcs

REPO = Path(__file__).resolve().parent.parent
BENCHMARK_JSON = REPO / "configs" / "benchmark.json"


@pytest.fixture(scope="session")
def benchmark_raw():
    return json.loads(BENCHMARK_JSON.read_text())


@pytest.fixture(scope="session")
def benchmark_config():
    return bcsgl.load_config(BENCHMARK_JSON)


@pytest.fixture(scope="session")
def box_grid(benchmark_config):
    return ti_bcs.default_position_grid(benchmark_config)


@pytest.fixture(scope="session")
def pairing(benchmark_config, box_grid):
    return ti_bcs.compute_pairing(benchmark_config, box_grid)


@pytest.fixture(scope="session")
def coeffs(benchmark_config, pairing):
    return gl.compute_gl_coefficients(pairing, benchmark_config.mu,
                                      benchmark_config.d)


@pytest.fixture(scope="session")
def spectral(benchmark_config, coeffs):
    return gl.compute_Dc(coeffs, benchmark_config.fields, 32)


@pytest.fixture(scope="session")
def spectral_m8(benchmark_config, coeffs):
    return gl.compute_Dc(coeffs, benchmark_config.fields, 8)


@pytest.fixture(scope="session")
def quadrature(benchmark_config, pairing):
    return gl.MomentumQuadrature(pairing, benchmark_config.mu, 1)


@pytest.fixture()
def rng():
    return np.random.default_rng(20140331)
