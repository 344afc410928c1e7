"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels_ext.pyx`` function for function; ``_backend`` picks one
at import time. Inputs use the transposed design matrix ``FT`` of shape
``(n, n_modes)``.
"""
import math

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

NAME = "python"


def product_gram(FT1, FT2, lam2, r1, r2, sigma_f, lengthscale):
    """Cross Gram of the Fourier x squared-exponential product kernel.

    Returns ``(K, Kf, Ks)`` with ``K = Kf * Ks`` elementwise.
    """
    Kf = (FT1 * lam2) @ FT2.T
    d = r1[:, None] - r2[None, :]
    Ks = sigma_f**2 * np.exp(-0.5 * d * d / lengthscale**2)
    return Kf * Ks, Kf, Ks


def loglik_grad(FT, lam2, r, f, sigma_f, lengthscale, noise_var, rel_jitter):
    """Gaussian log marginal likelihood and its gradient.

    The covariance is ``K + (j + noise_var) I`` with the jitter
    ``j = rel_jitter * mean(diag K)`` treated as part of the model, so the
    gradient is exact for the jittered density.

    Returns
    -------
    ll, d_lam2 (n_modes,), d_sigma_f, d_lengthscale, d_noise_var
    """
    n = f.shape[0]
    K, Kf, Ks = product_gram(FT, FT, lam2, r, r, sigma_f, lengthscale)
    d = r[:, None] - r[None, :]
    mean_diag = np.trace(K) / n
    S = K + (rel_jitter * mean_diag + noise_var) * np.eye(n)
    try:
        L = cholesky(S, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise LinAlgError(f"covariance not positive definite: {exc}") from None
    cf = (L, True)
    alpha = cho_solve(cf, f, check_finite=False)
    Sinv = cho_solve(cf, np.eye(n), check_finite=False)
    ll = -0.5 * f @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)

    W = np.outer(alpha, alpha) - Sinv
    trW = np.trace(W)
    B = W * Ks
    d_lam2 = 0.5 * (((B @ FT) * FT).sum(axis=0)
                    + rel_jitter * sigma_f**2 * (FT**2).mean(axis=0) * trW)
    WK = (W * K).sum()
    d_sigma_f = (WK + rel_jitter * mean_diag * trW) / sigma_f
    d_l = 0.5 * (W * K * d * d).sum() / lengthscale**3
    d_noise = 0.5 * trW
    return float(ll), d_lam2, float(d_sigma_f), float(d_l), float(d_noise)
