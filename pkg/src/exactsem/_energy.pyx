# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the permutation energy-distance test."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def permutation_labels(const uint64_t[::1] seeds, Py_ssize_t n, Py_ssize_t n_a):
    """One random relabelling per seed: row ``p`` marks ``n_a`` of ``n`` items with 1.

    Partial Fisher-Yates driven by the splitmix64 stream ``mix(seed + (i+1)*golden)``.
    """
    cdef Py_ssize_t P = seeds.shape[0]
    cdef Py_ssize_t p, i, j, t
    cdef uint64_t s
    cdef double u
    cdef cnp.ndarray[cnp.intp_t, ndim=1] perm_arr = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] perm = perm_arr
    cdef cnp.ndarray[signed char, ndim=2] result = np.zeros((P, n), dtype=np.int8)
    cdef signed char[:, ::1] out = result
    with nogil:
        for p in range(P):
            s = seeds[p]
            for i in range(n):
                perm[i] = i
            for i in range(n_a):
                u = <double>(_mix(s + <uint64_t>(i + 1) * GOLDEN) >> 11) * (1.0 / 9007199254740992.0)
                j = i + <Py_ssize_t>(u * <double>(n - i))
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
                out[p, perm[i]] = 1
    return result


def permutation_energy(const double[:, ::1] sorted_values,
                       const cnp.intp_t[:, ::1] order,
                       const signed char[:, ::1] labels,
                       Py_ssize_t n_a):
    """Energy statistic for every row of ``labels`` (1 = first sample).

    ``sorted_values[k]`` holds the pooled sample projected on direction ``k``
    in ascending order and ``order[k]`` the pooled indices producing it.
    """
    cdef Py_ssize_t K = sorted_values.shape[0]
    cdef Py_ssize_t N = sorted_values.shape[1]
    cdef Py_ssize_t P = labels.shape[0]
    cdef Py_ssize_t n_b = N - n_a
    cdef Py_ssize_t p, k, idx
    cdef double z, l, ca, sa, qa, qb, sb, wa, wb, cross, acc
    cdef double na = <double>n_a, nb = <double>n_b
    cdef const signed char* lab
    cdef cnp.ndarray[double, ndim=1] totals = np.empty(K)
    cdef cnp.ndarray[double, ndim=1] sums = np.empty(K)
    cdef double[::1] tot = totals
    cdef double[::1] zsum = sums
    cdef cnp.ndarray[double, ndim=1] result = np.empty(P)
    cdef double[::1] out = result

    if n_a < 1 or n_b < 1:
        raise ValueError("both samples must be non-empty")
    with nogil:
        for k in range(K):
            acc = 0.0
            z = 0.0
            for idx in range(N):
                acc = acc + sorted_values[k, idx] * (2.0 * idx - N + 1.0)
                z = z + sorted_values[k, idx]
            tot[k] = acc
            zsum[k] = z
        for p in range(P):
            lab = &labels[p, 0]
            acc = 0.0
            for k in range(K):
                # within-group pair sums via ranks: W = sum_g z * (2 * rank_before - n_g + 1)
                ca = 0.0; sa = 0.0; qa = 0.0; qb = 0.0
                for idx in range(N):
                    z = sorted_values[k, idx]
                    l = <double>lab[order[k, idx]]
                    qa = qa + l * z * ca
                    qb = qb + (1.0 - l) * z * (idx - ca)
                    sa = sa + l * z
                    ca = ca + l
                sb = zsum[k] - sa
                wa = 2.0 * qa - (na - 1.0) * sa
                wb = 2.0 * qb - (nb - 1.0) * sb
                cross = tot[k] - wa - wb
                acc = acc + 2.0 * cross / (na * nb) - 2.0 * wa / (na * na) - 2.0 * wb / (nb * nb)
            out[p] = acc / K * (na * nb / (na + nb))
    return result
