"""Scalar special functions of the theory.

All four g-functions have removable singularities at z=0; evaluation
switches to a fixed Taylor polynomial below a per-function threshold.
The polynomial coefficients are exact rationals (derived once from a
symbolic oracle) rounded to double precision:

    g0(z) = tanh(z/2)/z            g0(0) = 1/2, even
    g1(z) = -g0'(z)                g1(0) = 0,   odd
    g2(z) = g1'(z) + (2/z) g1(z)   g2(0) = 1/4, even
    g1(z)/z                        -> 1/12 at 0, even

Large |z| uses factored exponentials (e^{-|z|} only), overflow-safe far
beyond |z| = 700.
"""

from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from .errors import DomainError

# Taylor coefficients in powers of z^2 (exact rationals in double precision).
G0_COEFFS = np.array([
    1 / 2, -1 / 24, 1 / 240, -17 / 40320, 31 / 725760,
    -691 / 159667200, 5461 / 12454041600, -929569 / 20922789888000,
])
# g1(z)/z ; multiply by z for g1 itself.
G1Z_COEFFS = np.array([
    1 / 12, -1 / 60, 17 / 6720, -31 / 90720, 691 / 15966720,
    -5461 / 1037836800, 929569 / 1494484992000, -3202291 / 44460928512000,
])
G2_COEFFS = np.array([
    1 / 4, -1 / 12, 17 / 960, -31 / 10080, 691 / 1451520,
    -5461 / 79833600, 929569 / 99632332800, -3202291 / 2615348736000,
])


@dataclass(frozen=True)
class EvalPolicy:
    """Where to hand over from the closed form to the Taylor series.

    series_threshold: switch to the series for |z| below this value.
    series_order: highest retained power of z.
    """
    series_threshold: float
    series_order: int

    def __post_init__(self):
        if not (self.series_threshold > 0):
            raise DomainError("series_threshold must be positive")
        if self.series_order < 2:
            raise DomainError("series_order must be at least 2")


# g0 and g2 are cancellation-free in double precision, so the spec default
# (1e-2, degree 8) holds there. g1's closed form loses ~5 digits to
# cancellation near 0; its switch point moves out to 0.25 with a longer
# series so that series and closed form still agree to 1e-12 relative.
G0_POLICY = EvalPolicy(1e-2, 8)
G1_POLICY = EvalPolicy(0.25, 15)
G1Z_POLICY = EvalPolicy(0.25, 14)
G2_POLICY = EvalPolicy(1e-2, 8)


def _ncoef(policy, odd):
    if odd:
        return min((policy.series_order - 1) // 2 + 1, len(G1Z_COEFFS))
    return min(policy.series_order // 2 + 1, len(G0_COEFFS))


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite argument")


# Parallel-jit launch overhead dominates below this size; route small
# arrays to the numpy kernels regardless of the active backend.
_SMALL = 4096


def _kernels_for(z):
    if z.size < _SMALL:
        from . import _kernels_numpy
        return _kernels_numpy
    return get_kernels()


# ---------------------------------------------------------------------------
# array API (hot path)

def f(z):
    """-ln(1+e^{-z}), stable for large |z|."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    _check_finite(z)
    return _kernels_for(z).f_kernel(z)


def g0(z, policy=G0_POLICY):
    z = np.ascontiguousarray(z, dtype=np.float64)
    _check_finite(z)
    return _kernels_for(z).g0_kernel(z, G0_COEFFS[:_ncoef(policy, False)],
                                     policy.series_threshold)


def g1(z, policy=G1_POLICY):
    z = np.ascontiguousarray(z, dtype=np.float64)
    _check_finite(z)
    return _kernels_for(z).g1_kernel(z, G1Z_COEFFS[:_ncoef(policy, True)],
                                     policy.series_threshold)


def g1_over_z(z, policy=G1Z_POLICY):
    z = np.ascontiguousarray(z, dtype=np.float64)
    _check_finite(z)
    return _kernels_for(z).g1z_kernel(z, G1Z_COEFFS[:_ncoef(policy, False)],
                                      policy.series_threshold)


def g2(z, policy=G2_POLICY):
    z = np.ascontiguousarray(z, dtype=np.float64)
    _check_finite(z)
    return _kernels_for(z).g2_kernel(z, G2_COEFFS[:_ncoef(policy, False)],
                                     policy.series_threshold)


def kt(x, T):
    """K_T(x) = x/tanh(x/(2T)) for T>0; |x| for T=0; 2T at x=0."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    _check_finite(x)
    if T < 0:
        raise DomainError("temperature must be non-negative")
    if T == 0:
        return np.abs(x)
    return _kernels_for(x).kt_kernel(x, float(T))


# ---------------------------------------------------------------------------
# scalar API

def eval_f(z: float) -> float:
    return float(f(np.array([z]))[0])


def eval_g0(z: float, policy=G0_POLICY) -> float:
    return float(g0(np.array([z]), policy)[0])


def eval_g1(z: float, policy=G1_POLICY) -> float:
    return float(g1(np.array([z]), policy)[0])


def eval_g1_over_z(z: float, policy=G1Z_POLICY) -> float:
    return float(g1_over_z(np.array([z]), policy)[0])


def eval_g2(z: float, policy=G2_POLICY) -> float:
    return float(g2(np.array([z]), policy)[0])


def eval_KT(p2_minus_mu: float, T: float) -> float:
    return float(kt(np.array([p2_minus_mu]), T)[0])
