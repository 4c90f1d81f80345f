# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LMS kernel: the per-symbol adaptive loop is sequential and
dominates training time, so it gets a C implementation."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def nlms_train(cnp.float64_t[:, ::1] streams, cnp.float64_t[:, ::1] targets,
               cnp.float64_t[:, :, ::1] weights, double mu, double eps):
    cdef Py_ssize_t n_out = weights.shape[0]
    cdef Py_ssize_t n_in = weights.shape[1]
    cdef Py_ssize_t n_taps = weights.shape[2]
    cdef Py_ssize_t n_train = targets.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] err_sq = np.empty(n_train)
    cdef double[:] err = err_sq
    cdef Py_ssize_t k, o, i, t
    cdef double power, y, e, g, acc
    for k in range(n_train):
        power = eps
        for i in range(n_in):
            for t in range(n_taps):
                power += streams[i, k + t] * streams[i, k + t]
        acc = 0.0
        for o in range(n_out):
            y = 0.0
            for i in range(n_in):
                for t in range(n_taps):
                    y += weights[o, i, t] * streams[i, k + t]
            e = targets[o, k] - y
            acc += e * e
            g = mu * e / power
            for i in range(n_in):
                for t in range(n_taps):
                    weights[o, i, t] += g * streams[i, k + t]
        err[k] = acc
    return err_sq


def fir_apply(cnp.float64_t[:, ::1] streams, cnp.float64_t[:, :, ::1] weights):
    cdef Py_ssize_t n_in = weights.shape[1]
    cdef Py_ssize_t n_taps = weights.shape[2]
    cdef Py_ssize_t n_out = weights.shape[0]
    cdef Py_ssize_t n = streams.shape[1] - n_taps + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_out, n))
    cdef double[:, :] ov = out
    cdef Py_ssize_t k, o, i, t
    cdef double y
    for k in range(n):
        for o in range(n_out):
            y = 0.0
            for i in range(n_in):
                for t in range(n_taps):
                    y += weights[o, i, t] * streams[i, k + t]
            ov[o, k] = y
    return out
