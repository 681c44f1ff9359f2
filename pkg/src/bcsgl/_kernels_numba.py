"""Numba-jitted kernels for the hot elementwise evaluations.

Formulas mirror ``_kernels_numpy`` exactly (no fastmath) so the two
backends agree to a few ulp. Kernels are single-threaded on purpose:
the eigensolver-heavy callers keep BLAS busy and spinning worker pools
thrash it on small machines.
"""

import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, fastmath=False)


@njit(**_OPTS)
def _poly_even_s(z2, coeffs):
    acc = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * z2 + coeffs[k]
    return acc


@njit(**_OPTS)
def f_kernel(z):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zi = z[i]
        a = abs(zi)
        base = zi if zi < 0.0 else 0.0
        out[i] = base - math.log1p(math.exp(-a))
    return out


@njit(**_OPTS)
def g0_kernel(z, coeffs, thr):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zi = z[i]
        if abs(zi) < thr:
            out[i] = _poly_even_s(zi * zi, coeffs)
        else:
            out[i] = math.tanh(zi / 2.0) / zi
    return out


@njit(**_OPTS)
def g1_kernel(z, coeffs_g1z, thr):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zi = z[i]
        a = abs(zi)
        if a < thr:
            out[i] = zi * _poly_even_s(zi * zi, coeffs_g1z)
        else:
            e = math.exp(-a)
            val = (1.0 - 2.0 * a * e - e * e) / (a * a * (1.0 + e) ** 2)
            out[i] = val if zi > 0.0 else -val
    return out


@njit(**_OPTS)
def g1z_kernel(z, coeffs_g1z, thr):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zi = z[i]
        a = abs(zi)
        if a < thr:
            out[i] = _poly_even_s(zi * zi, coeffs_g1z)
        else:
            e = math.exp(-a)
            out[i] = (1.0 - 2.0 * a * e - e * e) / (a * a * a * (1.0 + e) ** 2)
    return out


@njit(**_OPTS)
def g2_kernel(z, coeffs, thr):
    out = np.empty_like(z)
    for i in range(z.shape[0]):
        zi = z[i]
        a = abs(zi)
        if a < thr:
            out[i] = _poly_even_s(zi * zi, coeffs)
        else:
            e = math.exp(-a)
            out[i] = 2.0 * e * (-math.expm1(-a)) / (a * (1.0 + e) ** 3)
    return out


@njit(**_OPTS)
def kt_kernel(x, T):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        xi = x[i]
        w = xi / (2.0 * T)
        if w == 0.0:
            out[i] = 2.0 * T
        else:
            out[i] = xi / math.tanh(w)
    return out


@njit(**_OPTS)
def cos_transform(weights, x, q):
    out = np.empty(q.shape[0], dtype=np.float64)
    for i in range(q.shape[0]):
        qi = q[i]
        acc = 0.0
        for j in range(x.shape[0]):
            acc += weights[j] * math.cos(qi * x[j])
        out[i] = acc
    return out
