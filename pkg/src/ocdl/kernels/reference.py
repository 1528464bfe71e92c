"""Pure-NumPy implementations of the per-frequency kernels.

Array conventions match :mod:`ocdl.kernels`: spectra are ``(M, F)`` complex128
with ``F`` flattened frequencies, Hermitian blocks are ``(F, M, M)``.  All
einsum contractions run unoptimized so the reduction order is fixed and the
results are reproducible bit for bit.
"""

import numpy as np


def rank1_solve(d_hat, rhs, rho):
    """Solve ``(d^H d + rho*I) z = r`` per frequency via Sherman-Morrison."""
    cross = np.einsum("mf,mf->f", d_hat, rhs)
    gram = np.einsum("mf,mf->f", d_hat.conj(), d_hat).real
    return (rhs - d_hat.conj() * (cross / (rho + gram))) / rho


def accumulate(a_blocks, b_vecs, x_hat, s_hat, alpha):
    """Decay the accumulator by ``alpha`` and add one sample's outer products."""
    a_blocks *= alpha
    a_blocks += np.einsum("if,jf->fij", x_hat.conj(), x_hat)
    b_vecs *= alpha
    b_vecs += (x_hat.conj() * s_hat).T


def block_matvec(a_blocks, v):
    """Per-frequency product ``a_blocks[f] @ v[:, f]``."""
    return np.einsum("fij,jf->if", a_blocks, v)


def quad_terms(a_blocks, b_vecs, g_hat):
    """Per-frequency ``Re(g^H A g) - 2 Re(g^H b)``, returned as a real ``(F,)`` array."""
    av = block_matvec(a_blocks, g_hat)
    quad = np.einsum("if,if->f", g_hat.conj(), av).real
    lin = np.einsum("if,fi->f", g_hat.conj(), b_vecs).real
    return quad - 2.0 * lin
