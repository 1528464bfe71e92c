"""Hot per-frequency kernels with a compiled core and a NumPy fallback.

The compiled extension (:mod:`ocdl.kernels._fastkern`, Cython + OpenMP) is
preferred when it imported successfully; otherwise the pure-NumPy reference
implementation is used.  Selection happens once, at import time, and can be
forced with the ``OCDL_BACKEND`` environment variable (``auto``, ``compiled``
or ``python``).

``OCDL_THREADS`` caps the OpenMP thread count of the compiled kernels.  It
affects speed only: every output element is computed by a single thread with
a fixed reduction order, so results are bit-identical for any thread count.

Public array conventions (all complex128, C-contiguous):

* ``d_hat``, ``rhs``, ``x_hat``, ``g_hat``, ``v`` -- ``(M, F)`` spectra with
  ``F`` flattened frequencies;
* ``s_hat`` -- ``(F,)``;
* ``a_blocks`` -- ``(F, M, M)`` Hermitian blocks; ``b_vecs`` -- ``(F, M)``.
"""

import os

import numpy as np

from ..errors import InvalidInputError
from . import reference

try:
    from . import _fastkern
except ImportError:
    _fastkern = None

__all__ = [
    "accumulate",
    "available_backends",
    "backend_name",
    "block_matvec",
    "quad_terms",
    "rank1_solve",
    "set_backend",
    "thread_count",
]


def thread_count():
    """Worker count for the compiled kernels, from ``OCDL_THREADS``."""
    raw = os.environ.get("OCDL_THREADS", "")
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise InvalidInputError(f"OCDL_THREADS must be a positive integer, got {raw!r}")
    return n


def available_backends():
    names = ["python"]
    if _fastkern is not None:
        names.insert(0, "compiled")
    return tuple(names)


def _freq_major(arr):
    return np.ascontiguousarray(arr.T)


class _CompiledBackend:
    name = "compiled"

    @staticmethod
    def rank1_solve(d_hat, rhs, rho):
        out = np.empty((d_hat.shape[1], d_hat.shape[0]), dtype=np.complex128)
        _fastkern.rank1_solve(_freq_major(d_hat), _freq_major(rhs), rho, out,
                              thread_count())
        return np.ascontiguousarray(out.T)

    @staticmethod
    def accumulate(a_blocks, b_vecs, x_hat, s_hat, alpha):
        _fastkern.accumulate(a_blocks, b_vecs, _freq_major(x_hat),
                             np.ascontiguousarray(s_hat), alpha, thread_count())

    @staticmethod
    def block_matvec(a_blocks, v):
        out = np.empty((v.shape[1], v.shape[0]), dtype=np.complex128)
        _fastkern.block_matvec(a_blocks, _freq_major(v), out, thread_count())
        return np.ascontiguousarray(out.T)

    @staticmethod
    def quad_terms(a_blocks, b_vecs, g_hat):
        out = np.empty(a_blocks.shape[0])
        _fastkern.quad_terms(a_blocks, b_vecs, _freq_major(g_hat), out,
                             thread_count())
        return out


class _PythonBackend:
    name = "python"
    rank1_solve = staticmethod(reference.rank1_solve)
    accumulate = staticmethod(reference.accumulate)
    block_matvec = staticmethod(reference.block_matvec)
    quad_terms = staticmethod(reference.quad_terms)


def _resolve(name):
    if name == "python":
        return _PythonBackend
    if name == "compiled":
        if _fastkern is None:
            raise InvalidInputError(
                "OCDL_BACKEND=compiled but the compiled extension is not available"
            )
        return _CompiledBackend
    if name == "auto":
        return _CompiledBackend if _fastkern is not None else _PythonBackend
    raise InvalidInputError(f"unknown backend {name!r}")


_active = _resolve(os.environ.get("OCDL_BACKEND", "auto").lower())


def set_backend(name):
    """Switch the active backend (used by tests and benchmarks)."""
    global _active
    _active = _resolve(name)


def backend_name():
    return _active.name


def rank1_solve(d_hat, rhs, rho):
    return _active.rank1_solve(d_hat, rhs, rho)


def accumulate(a_blocks, b_vecs, x_hat, s_hat, alpha):
    _active.accumulate(a_blocks, b_vecs, x_hat, s_hat, alpha)


def block_matvec(a_blocks, v):
    return _active.block_matvec(a_blocks, v)


def quad_terms(a_blocks, b_vecs, g_hat):
    return _active.quad_terms(a_blocks, b_vecs, g_hat)
