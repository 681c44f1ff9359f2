"""Pure-numpy kernels (fallback path; same contracts as the numba ones)."""

import numpy as np


def _poly_even(z2, coeffs):
    acc = np.zeros_like(z2)
    for c in coeffs[::-1]:
        acc = acc * z2 + c
    return acc


def f_kernel(z):
    z = np.asarray(z, dtype=np.float64)
    a = np.abs(z)
    # -ln(1+e^-z) for z>=0 ; z - ln(1+e^z) for z<0, both via e^{-|z|}
    return np.where(z >= 0.0, 0.0, z) - np.log1p(np.exp(-a))


def g0_kernel(z, coeffs, thr):
    z = np.asarray(z, dtype=np.float64)
    small = np.abs(z) < thr
    zs = np.where(small, 1.0, z)
    direct = np.tanh(zs / 2.0) / zs
    return np.where(small, _poly_even(z * z, coeffs), direct)


def g1_kernel(z, coeffs_g1z, thr):
    # odd function: z * poly(z^2) below thr, factored exponentials above
    z = np.asarray(z, dtype=np.float64)
    a = np.abs(z)
    small = a < thr
    az = np.where(small, 1.0, a)
    e = np.exp(-az)
    direct = np.sign(z) * (1.0 - 2.0 * az * e - e * e) / (az * az * (1.0 + e) ** 2)
    return np.where(small, z * _poly_even(z * z, coeffs_g1z), direct)


def g1z_kernel(z, coeffs_g1z, thr):
    # g1(z)/z, even, value 1/12 at z=0
    z = np.asarray(z, dtype=np.float64)
    a = np.abs(z)
    small = a < thr
    az = np.where(small, 1.0, a)
    e = np.exp(-az)
    direct = (1.0 - 2.0 * az * e - e * e) / (az ** 3 * (1.0 + e) ** 2)
    return np.where(small, _poly_even(z * z, coeffs_g1z), direct)


def g2_kernel(z, coeffs, thr):
    z = np.asarray(z, dtype=np.float64)
    a = np.abs(z)
    small = a < thr
    az = np.where(small, 1.0, a)
    e = np.exp(-az)
    direct = 2.0 * e * (-np.expm1(-az)) / (az * (1.0 + e) ** 3)
    return np.where(small, _poly_even(z * z, coeffs), direct)


def kt_kernel(x, T):
    # x/tanh(x/(2T)) for T>0, with the x=0 limit 2T
    x = np.asarray(x, dtype=np.float64)
    w = x / (2.0 * T)
    zero = w == 0.0
    ws = np.where(zero, 1.0, w)
    return np.where(zero, 2.0 * T, x / np.tanh(ws))


def cos_transform(weights, x, q):
    """sum_j weights[j] * cos(q_i x_j) for each q_i (dense, chunked)."""
    weights = np.asarray(weights, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    out = np.empty(q.shape[0], dtype=np.float64)
    chunk = max(1, int(4e6 / max(x.size, 1)))
    for start in range(0, q.size, chunk):
        qs = q[start:start + chunk]
        out[start:start + chunk] = np.cos(np.outer(qs, x)) @ weights
    return out
