# cython: language_level=3
"""Compiled P-256 scalar multiplication (see p256_core.c)."""

from libc.stdint cimport uint8_t

cdef extern from "p256_core.h":
    int p256_scalar_mult(const uint8_t *k, const uint8_t *x, const uint8_t *y,
                         uint8_t *ox, uint8_t *oy)

from scms._p256_py import GX, GY, N


def mul(k, x, y):
    """Return k*(x, y) as an affine tuple, or None for the identity."""
    cdef bytes kb = (k % N).to_bytes(32, "big")
    cdef bytes xb = x.to_bytes(32, "big")
    cdef bytes yb = y.to_bytes(32, "big")
    cdef uint8_t ox[32]
    cdef uint8_t oy[32]
    if not p256_scalar_mult(kb, xb, yb, ox, oy):
        return None
    return int.from_bytes(ox[:32], "big"), int.from_bytes(oy[:32], "big")


def mul_base(k):
    return mul(k, GX, GY)
