# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled SINR kernel: per-slot received-power tally at every BS.

Same contract as rachsim._core_py.slot_sinr; the fused loops avoid the
two (B, E) temporaries the NumPy path materializes.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

KERNEL_NAME = "cython"


def slot_sinr(
    double rho,
    double sigma2,
    double[:, ::1] ratio_pow,
    cnp.intp_t[::1] eligible,
    cnp.intp_t[::1] assoc_eligible,
    double[:, ::1] h,
):
    cdef Py_ssize_t n_bs = h.shape[0]
    cdef Py_ssize_t n_el = h.shape[1]
    out_arr = np.empty(n_el, dtype=np.float64)
    totals_arr = np.zeros(n_bs, dtype=np.float64)
    if n_el == 0:
        return out_arr
    cdef double[::1] out = out_arr
    cdef double[::1] totals = totals_arr
    cdef Py_ssize_t b, j
    cdef double acc, own

    for b in range(n_bs):
        acc = 0.0
        for j in range(n_el):
            acc += h[b, j] * ratio_pow[b, eligible[j]]
        totals[b] = rho * acc
    for j in range(n_el):
        b = assoc_eligible[j]
        own = rho * h[b, j] * ratio_pow[b, eligible[j]]
        out[j] = own / (totals[b] - own + sigma2)
    return out_arr
