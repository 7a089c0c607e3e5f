"""Numba-jitted gate and Pauli kernels for 1-D complex128 statevectors.

Every kernel assumes the little-endian bit order of :mod:`mblvqe.state`
(qubit q = bit q of the index) and mutates the state in place.  Loops follow
the insert-a-zero-bit index enumeration; fastmath only reassociates the
complex arithmetic, which is harmless at the library's tolerances.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_OPTS = dict(cache=True, fastmath=True)


@njit(**_OPTS)
def rx(psi, q, c, s):
    tk = 1 << q
    ks = -1j * s
    for g in range(psi.size >> 1):
        i0 = ((g >> q) << (q + 1)) | (g & (tk - 1))
        i1 = i0 | tk
        a, b = psi[i0], psi[i1]
        psi[i0] = c * a + ks * b
        psi[i1] = c * b + ks * a


@njit(**_OPTS)
def rz(psi, q, c, s):
    tk = 1 << q
    p0 = complex(c, -s)
    p1 = complex(c, s)
    for g in range(psi.size >> 1):
        i0 = ((g >> q) << (q + 1)) | (g & (tk - 1))
        psi[i0] *= p0
        psi[i0 | tk] *= p1


@njit(**_OPTS)
def u1(psi, q, u00, u01, u10, u11):
    tk = 1 << q
    for g in range(psi.size >> 1):
        i0 = ((g >> q) << (q + 1)) | (g & (tk - 1))
        i1 = i0 | tk
        a, b = psi[i0], psi[i1]
        psi[i0] = u00 * a + u01 * b
        psi[i1] = u10 * a + u11 * b


@njit(**_OPTS)
def rxx(psi, qa, qb, c, s):
    # requires qa < qb
    ta, tb = 1 << qa, 1 << qb
    ks = -1j * s
    for g in range(psi.size >> 2):
        i = ((g >> qa) << (qa + 1)) | (g & (ta - 1))
        i = ((i >> qb) << (qb + 1)) | (i & (tb - 1))
        i01, i10, i11 = i | ta, i | tb, i | ta | tb
        a, b, d, e = psi[i], psi[i01], psi[i10], psi[i11]
        psi[i] = c * a + ks * e
        psi[i11] = c * e + ks * a
        psi[i01] = c * b + ks * d
        psi[i10] = c * d + ks * b


@njit(**_OPTS)
def ryy(psi, qa, qb, c, s):
    ta, tb = 1 << qa, 1 << qb
    ks = -1j * s
    for g in range(psi.size >> 2):
        i = ((g >> qa) << (qa + 1)) | (g & (ta - 1))
        i = ((i >> qb) << (qb + 1)) | (i & (tb - 1))
        i01, i10, i11 = i | ta, i | tb, i | ta | tb
        a, b, d, e = psi[i], psi[i01], psi[i10], psi[i11]
        psi[i] = c * a - ks * e
        psi[i11] = c * e - ks * a
        psi[i01] = c * b + ks * d
        psi[i10] = c * d + ks * b


@njit(**_OPTS)
def rzz(psi, qa, qb, c, s):
    ta, tb = 1 << qa, 1 << qb
    p = complex(c, -s)
    pc = complex(c, s)
    for g in range(psi.size >> 2):
        i = ((g >> qa) << (qa + 1)) | (g & (ta - 1))
        i = ((i >> qb) << (qb + 1)) | (i & (tb - 1))
        psi[i] *= p
        psi[i | ta] *= pc
        psi[i | tb] *= pc
        psi[i | ta | tb] *= p


@njit(**_OPTS)
def u2(psi, qa, qb, u):
    # general 4x4 on (qa, qb); local index m = bit(qa) + 2*bit(qb); qa != qb
    lo, hi = (qa, qb) if qa < qb else (qb, qa)
    ta, tb = 1 << lo, 1 << hi
    ma = 1 << qa
    mb = 1 << qb
    for g in range(psi.size >> 2):
        i = ((g >> lo) << (lo + 1)) | (g & (ta - 1))
        i = ((i >> hi) << (hi + 1)) | (i & (tb - 1))
        idx0 = i
        idx1 = i | ma
        idx2 = i | mb
        idx3 = i | ma | mb
        a, b, d, e = psi[idx0], psi[idx1], psi[idx2], psi[idx3]
        psi[idx0] = u[0, 0] * a + u[0, 1] * b + u[0, 2] * d + u[0, 3] * e
        psi[idx1] = u[1, 0] * a + u[1, 1] * b + u[1, 2] * d + u[1, 3] * e
        psi[idx2] = u[2, 0] * a + u[2, 1] * b + u[2, 2] * d + u[2, 3] * e
        psi[idx3] = u[3, 0] * a + u[3, 1] * b + u[3, 2] * d + u[3, 3] * e


@njit(inline="always")
def _sign(i, mask):
    v = i & mask
    v ^= v >> 32
    v ^= v >> 16
    v ^= v >> 8
    v ^= v >> 4
    v ^= v >> 2
    v ^= v >> 1
    return 1.0 - 2.0 * (v & 1)


@njit(**_OPTS)
def pauli_accum(out, psi, flip, zymask, coeff):
    """out += coeff * P|psi> with P encoded by flip (X|Y) and zymask (Z|Y) masks.

    ``coeff`` must already include the string's (-1j)^(#Y) factor.
    """
    for i in range(psi.size):
        out[i] += coeff * _sign(i, zymask) * psi[i ^ flip]


@njit(**_OPTS)
def pauli_bracket(lam, psi, flip, zymask):
    """<lam| P' |psi> where P' is the mask-encoded string without its (-1j)^y factor."""
    acc = 0.0j
    for i in range(lam.size):
        acc += np.conj(lam[i]) * (_sign(i, zymask) * psi[i ^ flip])
    return acc


@njit(**_OPTS)
def diag_expectation(psi, diag):
    acc = 0.0
    for i in range(psi.size):
        a = psi[i]
        acc += diag[i] * (a.real * a.real + a.imag * a.imag)
    return acc
