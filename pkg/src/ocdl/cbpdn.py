"""Convolutional sparse coding for a single signal and a fixed dictionary.

Solves

.. math::
    \\min_x \\; \\tfrac{1}{2} \\Big\\| \\sum_m d_m * x_m - s \\Big\\|_2^2
    + \\lambda \\sum_m \\| x_m \\|_1

with circular convolution, by ADMM on the splitting ``x = y`` where the
``x``-update is solved exactly in the frequency domain.  At each frequency the
normal matrix is a rank-one perturbation of ``rho * I``, so the linear solve
costs ``O(M)`` per frequency (Sherman-Morrison).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericalFailureError
from .transforms import dict_apply, fft2, ifft2

__all__ = [
    "CbpdnConfig",
    "SolveStats",
    "cbpdn_objective",
    "cbpdn_solve",
    "soft_threshold",
    "solve_freq_diagonal_system",
]


@dataclass(frozen=True)
class CbpdnConfig:
    """Sparse coding parameters.

    ``rho`` is the ADMM penalty; the default ``None`` resolves to ``10 * lmbda``,
    fixed for the whole solve (no adaptive penalty, for reproducibility).
    """

    lmbda: float
    rho: float = None
    max_iter: int = 200
    rel_tol: float = 1e-4
    abs_tol: float = 1e-6

    def __post_init__(self):
        if not self.lmbda > 0:
            raise InvalidInputError(f"lmbda must be positive, got {self.lmbda}")
        if self.rho is not None and not self.rho > 0:
            raise InvalidInputError(f"rho must be positive, got {self.rho}")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InvalidInputError("tolerances must be positive")

    @property
    def effective_rho(self):
        return 10.0 * self.lmbda if self.rho is None else self.rho


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool


def soft_threshold(values, kappa):
    """Elementwise ``sign(v) * max(|v| - kappa, 0)``."""
    if kappa < 0:
        raise InvalidInputError(f"kappa must be nonnegative, got {kappa}")
    values = np.asarray(values)
    return np.sign(values) * np.maximum(np.abs(values) - kappa, 0.0)


def solve_freq_diagonal_system(d_hat, rho, rhs):
    """Solve ``(d_n^H d_n + rho I) z_n = r_n`` at every frequency ``n``.

    ``d_hat`` and ``rhs`` are ``(M, F1, F2)`` spectrum sets; ``d_n`` is the
    length-``M`` row of filter spectra at one frequency.
    """
    d_hat = np.asarray(d_hat)
    rhs = np.asarray(rhs)
    if d_hat.shape != rhs.shape or d_hat.ndim != 3:
        raise InvalidInputError(
            f"spectrum sets must share shape (M, F1, F2); got {d_hat.shape} and {rhs.shape}"
        )
    if not rho > 0:
        raise InvalidInputError(f"rho must be positive, got {rho}")
    m = d_hat.shape[0]
    flat = kernels.rank1_solve(
        np.ascontiguousarray(d_hat.reshape(m, -1), dtype=np.complex128),
        np.ascontiguousarray(rhs.reshape(m, -1), dtype=np.complex128),
        float(rho),
    )
    return flat.reshape(d_hat.shape)


def _check_pair(signal, dictionary):
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 2:
        raise InvalidInputError(f"signal must be 2-D, got shape {signal.shape}")
    l1, l2 = dictionary.filter_shape
    if l1 > signal.shape[0] or l2 > signal.shape[1]:
        raise InvalidInputError(
            f"filters {l1}x{l2} do not fit inside signal {signal.shape}"
        )
    return signal


def cbpdn_objective(signal, dictionary, maps, lmbda):
    """Exact sparse coding objective at ``maps`` (circular convolution)."""
    signal = _check_pair(signal, dictionary)
    maps = np.asarray(maps, dtype=np.float64)
    if maps.shape != (dictionary.count,) + signal.shape:
        raise InvalidInputError(
            f"maps shape {maps.shape} does not match {dictionary.count} filters "
            f"over signal {signal.shape}"
        )
    if not lmbda > 0:
        raise InvalidInputError(f"lmbda must be positive, got {lmbda}")
    d_hat = fft2(dictionary.padded(signal.shape))
    recon = ifft2(dict_apply(d_hat, fft2(maps)), signal.shape)
    data_term = 0.5 * float(np.sum((recon - signal) ** 2))
    return data_term + lmbda * float(np.sum(np.abs(maps)))


def cbpdn_solve(signal, dictionary, cfg):
    """Sparse-code one signal against a fixed dictionary.

    Parameters
    ----------
    signal : ndarray
        Real 2-D array of shape ``(N1, N2)``.
    dictionary : Dictionary
        ``M`` filters, each fitting inside the signal.
    cfg : CbpdnConfig

    Returns
    -------
    maps : ndarray
        ``(M, N1, N2)`` coefficient maps (the thresholded ADMM variable, so
        exact zeros are preserved).
    stats : SolveStats

    The solve is deterministic: identical inputs give bit-identical maps.
    """
    signal = _check_pair(signal, dictionary)
    if not np.all(np.isfinite(signal)):
        raise InvalidInputError("signal contains non-finite values")
    dims = signal.shape
    m = dictionary.count
    rho = cfg.effective_rho
    kappa = cfg.lmbda / rho

    d_hat = np.ascontiguousarray(fft2(dictionary.padded(dims)).reshape(m, -1))
    s_hat = fft2(signal).reshape(-1)
    dh_s = d_hat.conj() * s_hat

    y = np.zeros((m,) + dims)
    u = np.zeros_like(y)
    n_total = y.size
    sqrt_n = np.sqrt(n_total)

    iterations = 0
    r_norm = s_norm = np.inf
    converged = False
    for k in range(1, cfg.max_iter + 1):
        iterations = k
        w_hat = fft2(y - u).reshape(m, -1)
        x_hat = kernels.rank1_solve(d_hat, dh_s + rho * w_hat, rho)
        x = ifft2(x_hat.reshape((m,) + (dims[0], dims[1] // 2 + 1)), dims)
        if not np.all(np.isfinite(x)):
            raise NumericalFailureError(
                f"non-finite sparse coding iterate at iteration {k}", iteration=k
            )
        y_new = soft_threshold(x + u, kappa)
        u += x - y_new

        r_norm = float(np.linalg.norm(x - y_new))
        s_norm = rho * float(np.linalg.norm(y_new - y))
        y = y_new
        eps_pri = sqrt_n * cfg.abs_tol + cfg.rel_tol * max(
            float(np.linalg.norm(x)), float(np.linalg.norm(y))
        )
        eps_dual = sqrt_n * cfg.abs_tol + cfg.rel_tol * rho * float(np.linalg.norm(u))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break

    objective = cbpdn_objective(signal, dictionary, y, cfg.lmbda)
    stats = SolveStats(
        iterations=iterations,
        primal_residual=r_norm,
        dual_residual=s_norm,
        objective=objective,
        converged=converged,
    )
    return y, stats
