# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory walker. Must match ``_walk_py.walk_batch`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _next_state(const double[:, ::1] cum, Py_ssize_t s, double u) nogil:
    # First column j with cum[s, j] > u (bisect_right semantics).
    cdef Py_ssize_t lo = 0, hi = cum.shape[1], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if u < cum[s, mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def walk_batch(const double[:, ::1] cum,
               const unsigned char[::1] absorbing,
               cnp.int64_t[::1] states,
               const double[:, ::1] uniforms,
               cnp.int64_t[:, ::1] paths,
               cnp.int64_t[::1] lengths):
    """Advance each chain ``i`` from ``states[i]`` using ``uniforms[i]``.

    Stops at an absorbing state or when its uniforms run out. Visited states
    go to ``paths[i, :lengths[i]]``; ``states`` is updated in place.
    """
    cdef Py_ssize_t i, k, s
    cdef Py_ssize_t n_chains = uniforms.shape[0], block = uniforms.shape[1]
    with nogil:
        for i in range(n_chains):
            s = states[i]
            k = 0
            while k < block and not absorbing[s]:
                s = _next_state(cum, s, uniforms[i, k])
                paths[i, k] = s
                k += 1
            states[i] = s
            lengths[i] = k
