# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures and return values. The log-likelihood kernel does the Gram
assembly, the Cholesky factorization (LAPACK via scipy) and the gradient
contractions in one pass without numpy temporaries.
"""
import numpy as np
from numpy.linalg import LinAlgError

from libc.math cimport exp, log, M_PI
from scipy.linalg.cython_lapack cimport dpotrf, dpotri, dpotrs

NAME = "cython"


def product_gram(const double[:, ::1] FT1, const double[:, ::1] FT2,
                 const double[::1] lam2, const double[::1] r1, const double[::1] r2,
                 double sigma_f, double lengthscale):
    cdef Py_ssize_t n1 = FT1.shape[0], n2 = FT2.shape[0], P = FT1.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double s, dr
    cdef double sf2 = sigma_f * sigma_f
    cdef double half_inv_l2 = 0.5 / (lengthscale * lengthscale)
    K_arr = np.empty((n1, n2))
    Kf_arr = np.empty((n1, n2))
    Ks_arr = np.empty((n1, n2))
    G_arr = np.empty((n1, P))
    cdef double[:, ::1] K = K_arr, Kf = Kf_arr, Ks = Ks_arr, G = G_arr
    with nogil:
        for i in range(n1):
            for p in range(P):
                G[i, p] = lam2[p] * FT1[i, p]
        for i in range(n1):
            for j in range(n2):
                s = 0.0
                for p in range(P):
                    s = s + G[i, p] * FT2[j, p]
                dr = r1[i] - r2[j]
                Kf[i, j] = s
                Ks[i, j] = sf2 * exp(-dr * dr * half_inv_l2)
                K[i, j] = s * Ks[i, j]
    return K_arr, Kf_arr, Ks_arr


def loglik_grad(const double[:, ::1] FT, const double[::1] lam2, const double[::1] r,
                const double[::1] f, double sigma_f, double lengthscale,
                double noise_var, double rel_jitter):
    cdef int n = <int>FT.shape[0]
    cdef Py_ssize_t P = FT.shape[1]
    cdef Py_ssize_t i, j, p
    cdef int info = 0, one = 1
    cdef char uplo = b'U'
    cdef double s, dr, ks, kij, w, b, factor, trK = 0.0, trW = 0.0
    cdef double WK = 0.0, WKD = 0.0, logdet = 0.0, quad = 0.0, mean_diag, jit
    cdef double sf2 = sigma_f * sigma_f
    cdef double half_inv_l2 = 0.5 / (lengthscale * lengthscale)

    G_arr = np.empty((n, P))
    Ks_arr = np.empty((n, n))
    K_arr = np.empty((n, n))
    D2_arr = np.empty((n, n))
    S_arr = np.empty((n, n))
    alpha_arr = np.empty(n)
    g_arr = np.zeros(P)
    fsq_arr = np.zeros(P)
    cdef double[:, ::1] G = G_arr, Ks = Ks_arr, K = K_arr, D2 = D2_arr, S = S_arr
    cdef double[::1] alpha = alpha_arr, g = g_arr, fsq = fsq_arr

    with nogil:
        for i in range(n):
            for p in range(P):
                G[i, p] = lam2[p] * FT[i, p]
                fsq[p] += FT[i, p] * FT[i, p]
        # lower triangle (C order), mirrored
        for i in range(n):
            for j in range(i + 1):
                s = 0.0
                for p in range(P):
                    s = s + G[i, p] * FT[j, p]
                dr = r[i] - r[j]
                D2[i, j] = dr * dr
                ks = sf2 * exp(-dr * dr * half_inv_l2)
                Ks[i, j] = ks
                K[i, j] = s * ks
                S[i, j] = s * ks
                if i != j:
                    D2[j, i] = D2[i, j]
                    Ks[j, i] = ks
                    K[j, i] = K[i, j]
                    S[j, i] = S[i, j]
            trK += K[i, i]
        mean_diag = trK / n
        jit = rel_jitter * mean_diag
        for i in range(n):
            S[i, i] += jit + noise_var
            alpha[i] = f[i]
        # Fortran 'U' on a C-order symmetric array == C lower triangle
        dpotrf(&uplo, &n, &S[0, 0], &n, &info)
    if info != 0:
        raise LinAlgError(f"covariance not positive definite (dpotrf info={info})")
    with nogil:
        for i in range(n):
            logdet += 2.0 * log(S[i, i])
        dpotrs(&uplo, &n, &one, &S[0, 0], &n, &alpha[0], &n, &info)
        dpotri(&uplo, &n, &S[0, 0], &n, &info)
    if info != 0:
        raise LinAlgError(f"covariance inverse failed (dpotri info={info})")
    with nogil:
        for i in range(n):
            quad += f[i] * alpha[i]
        for i in range(n):
            for j in range(i + 1):
                w = alpha[i] * alpha[j] - S[i, j]
                if i == j:
                    factor = 1.0
                    trW += w
                else:
                    factor = 2.0
                kij = K[i, j]
                WK += factor * w * kij
                WKD += factor * w * kij * D2[i, j]
                b = factor * w * Ks[i, j]
                for p in range(P):
                    g[p] += b * FT[i, p] * FT[j, p]
        for p in range(P):
            g[p] = 0.5 * (g[p] + rel_jitter * sf2 * (fsq[p] / n) * trW)
    ll = -0.5 * quad - 0.5 * logdet - 0.5 * n * log(2.0 * M_PI)
    d_sigma_f = (WK + rel_jitter * mean_diag * trW) / sigma_f
    d_l = 0.5 * WKD / (lengthscale * lengthscale * lengthscale)
    return ll, g_arr, d_sigma_f, d_l, 0.5 * trW
