"""Streaming dictionary learning state and the projected FISTA update.

The learner never stores past samples.  Each sample's frequency-domain
contribution is folded into an :class:`Accumulator` holding one ``M x M``
Hermitian block and one length-``M`` vector per stored frequency, decayed by a
forgetting factor ``(1 - 1/t)**p`` before each addition.  The dictionary is
then updated by accelerated projected gradient descent driven entirely by the
accumulator, with the iterate projected onto the set of filters with fixed
support and unit Euclidean norm.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError, InvalidStateError, NumericalFailureError
from .transforms import fft2, halfplane_col_weights, hermitian_normsq, ifft2, pad_filters

__all__ = [
    "Accumulator",
    "Dictionary",
    "FistaConfig",
    "FistaStats",
    "accumulate",
    "estimate_step_size",
    "fista_d_update",
    "forgetting_factor",
    "proj_cpn",
    "surrogate_gradient",
    "surrogate_value",
]

#: Window norms below this are treated as degenerate in :func:`proj_cpn`;
#: norms within this distance of 1 are left unscaled (makes the projection
#: exactly idempotent while staying well inside the unit-norm tolerance).
NORM_TOL = 1e-12


@dataclass
class Dictionary:
    """A set of ``M`` spatial filters of common shape ``(L1, L2)``.

    Every filter has unit Euclidean norm; a filter that collapsed to zero
    during projection is replaced by the canonical unit impulse and flagged
    in ``degenerate``.
    """

    filters: np.ndarray
    degenerate: np.ndarray = None

    def __post_init__(self):
        self.filters = np.asarray(self.filters, dtype=np.float64)
        if self.filters.ndim != 3:
            raise InvalidInputError(
                f"filters must have shape (M, L1, L2), got {self.filters.shape}"
            )
        if self.degenerate is None:
            self.degenerate = np.zeros(self.filters.shape[0], dtype=bool)
        else:
            self.degenerate = np.asarray(self.degenerate, dtype=bool)

    @property
    def count(self):
        return self.filters.shape[0]

    @property
    def filter_shape(self):
        return self.filters.shape[1:]

    def norms(self):
        return np.sqrt(np.sum(self.filters**2, axis=(1, 2)))

    def validate(self, tol=NORM_TOL):
        if not np.all(np.isfinite(self.filters)):
            raise InvalidStateError("dictionary contains non-finite values")
        errs = np.abs(self.norms() - 1.0)
        if np.any(errs > tol):
            raise InvalidStateError(
                f"filter norms deviate from 1 by up to {errs.max():.3e} (tol {tol})"
            )

    def padded(self, dims):
        """Filters zero-padded to ``dims``, ready for :func:`~ocdl.transforms.fft2`."""
        return pad_filters(self.filters, dims)

    def copy(self):
        return Dictionary(self.filters.copy(), self.degenerate.copy())

    @classmethod
    def random(cls, count, filter_shape, rng):
        """Seeded random dictionary: i.i.d. standard normal, then projected."""
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        raw = rng.standard_normal((count,) + tuple(filter_shape))
        return proj_cpn(raw, filter_shape)


def forgetting_factor(t, p):
    """Weight ``(1 - 1/t)**p`` applied to past information at step ``t``.

    ``p = 0`` keeps all history with equal weight (returns 1, including at
    ``t = 1``); ``p = inf`` discards history entirely (returns 0), which is
    the naive fit-the-current-sample update.
    """
    if t < 1:
        raise InvalidInputError(f"t must be a positive integer, got {t}")
    if p < 0:
        raise InvalidInputError(f"forgetting exponent must be nonnegative, got {p}")
    if math.isinf(p):
        return 0.0
    if p == 0:
        return 1.0
    return (1.0 - 1.0 / t) ** p


@dataclass
class Accumulator:
    """Forgetting-weighted frequency-domain history of past sparse codes.

    Per stored frequency ``n`` this keeps the Hermitian PSD block
    ``sum_tau w_tau x_hat_n^H x_hat_n`` (``a_blocks``, shape ``(F, M, M)``)
    and the vector ``sum_tau w_tau x_hat_n^H s_hat_n`` (``b_vecs``, shape
    ``(F, M)``), plus the matching weighted signal energy.  Storage is
    ``F * (M**2 + M)`` complex values regardless of how many samples were
    absorbed -- the constant-memory core of the whole method.
    """

    m: int
    n1: int
    n2: int
    a_blocks: np.ndarray
    b_vecs: np.ndarray
    s_energy: float = 0.0
    t: int = 0

    @classmethod
    def zeros(cls, m, n1, n2):
        if m < 1 or n1 < 1 or n2 < 1:
            raise InvalidInputError("accumulator dimensions must be positive")
        f = n1 * (n2 // 2 + 1)
        return cls(
            m=m,
            n1=n1,
            n2=n2,
            a_blocks=np.zeros((f, m, m), dtype=np.complex128),
            b_vecs=np.zeros((f, m), dtype=np.complex128),
        )

    @property
    def freq_count(self):
        return self.n1 * (self.n2 // 2 + 1)

    @property
    def spectrum_shape(self):
        return (self.m, self.n1, self.n2 // 2 + 1)

    @property
    def nbytes(self):
        return self.a_blocks.nbytes + self.b_vecs.nbytes

    def is_zero(self):
        return not (np.any(self.a_blocks) or np.any(self.b_vecs))

    def copy(self):
        return Accumulator(
            self.m, self.n1, self.n2,
            self.a_blocks.copy(), self.b_vecs.copy(), self.s_energy, self.t,
        )


def accumulator_nbytes(m, n1, n2):
    """Byte footprint of the accumulator arrays for a given problem size."""
    f = n1 * (n2 // 2 + 1)
    return f * m * m * 16 + f * m * 16


def _check_spectrum(acc, arr, name):
    arr = np.asarray(arr)
    if arr.shape != acc.spectrum_shape:
        raise InvalidInputError(
            f"{name} shape {arr.shape} does not match accumulator grid "
            f"{acc.spectrum_shape}"
        )
    return np.ascontiguousarray(arr.reshape(acc.m, -1), dtype=np.complex128)


def accumulate(acc, x_hat, s_hat, alpha):
    """Fold one sample into the accumulator, decaying history by ``alpha``.

    ``x_hat`` is the ``(M, N1, N2//2+1)`` spectrum set of the sample's
    coefficient maps and ``s_hat`` the signal spectrum.  Mutates ``acc`` in
    place (constant memory) and returns it.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    x_flat = _check_spectrum(acc, x_hat, "x_hat")
    s_hat = np.asarray(s_hat)
    if s_hat.shape != acc.spectrum_shape[1:]:
        raise InvalidInputError(
            f"s_hat shape {s_hat.shape} does not match accumulator grid "
            f"{acc.spectrum_shape[1:]}"
        )
    s_flat = np.ascontiguousarray(s_hat.reshape(-1), dtype=np.complex128)
    kernels.accumulate(acc.a_blocks, acc.b_vecs, x_flat, s_flat, float(alpha))
    acc.s_energy = alpha * acc.s_energy + hermitian_normsq(s_hat, acc.n2)
    acc.t += 1
    return acc


def surrogate_gradient(acc, g_hat):
    """Frequency-domain gradient ``a_blocks @ g - b_vecs`` of the surrogate."""
    g_flat = _check_spectrum(acc, g_hat, "g_hat")
    grad = kernels.block_matvec(acc.a_blocks, g_flat) - acc.b_vecs.T
    return grad.reshape(acc.spectrum_shape)


def surrogate_value(acc, g_hat):
    """Forgetting-weighted sum of frequency-domain data-fit losses at ``g_hat``.

    Counts every frequency of the full plane once (stored off-axis columns
    are weighted twice), so the value is ``N1*N2`` times the weighted sum of
    spatial losses.
    """
    g_flat = _check_spectrum(acc, g_hat, "g_hat")
    terms = kernels.quad_terms(acc.a_blocks, acc.b_vecs, g_flat)
    weights = halfplane_col_weights(acc.n2)
    weighted = float(np.sum(terms.reshape(acc.n1, -1) * weights))
    return 0.5 * (weighted + acc.s_energy)


def proj_cpn(raw, support):
    """Project onto the constraint set: fixed support, unit Euclidean norm.

    Keeps the top-left ``support`` window of each raw array, zeroes the rest,
    and rescales the window to unit norm.  A window whose norm is below
    ``NORM_TOL`` has no well-defined direction; it becomes the canonical unit
    impulse and is flagged degenerate.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3:
        raise InvalidInputError(f"raw arrays must have shape (M, *, *), got {raw.shape}")
    l1, l2 = int(support[0]), int(support[1])
    if l1 > raw.shape[1] or l2 > raw.shape[2]:
        raise InvalidInputError(
            f"support {l1}x{l2} exceeds raw array shape {raw.shape[1:]}"
        )
    window = raw[:, :l1, :l2].copy()
    norms = np.sqrt(np.sum(window**2, axis=(1, 2)))
    degenerate = norms < NORM_TOL
    if np.any(degenerate):
        window[degenerate] = 0.0
        window[degenerate, 0, 0] = 1.0
    # Skip the division when the norm is already 1 to within NORM_TOL: exact
    # idempotence, and renormalizing a unit vector would only churn bits.
    scale = ~degenerate & (np.abs(norms - 1.0) > NORM_TOL)
    if np.any(scale):
        window[scale] /= norms[scale, None, None]
    return Dictionary(window, degenerate)


@dataclass(frozen=True)
class FistaConfig:
    """Dictionary update parameters.

    ``step_size=None`` selects the automatic choice ``1 / (1.01 * L)`` with
    ``L`` the largest per-frequency block eigenvalue, estimated by
    ``power_iters`` rounds of power iteration.
    """

    max_iter: int = 50
    rel_tol: float = 1e-4
    step_size: float = None
    power_iters: int = 20

    def __post_init__(self):
        if self.max_iter < 1 or self.power_iters < 1:
            raise InvalidInputError("iteration counts must be positive")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be positive")
        if self.step_size is not None and not self.step_size > 0:
            raise InvalidInputError("step_size must be positive")


@dataclass(frozen=True)
class FistaStats:
    iterations: int
    rel_change: float
    value: float
    restarts: int = 0


def estimate_step_size(acc, cfg):
    """Step size ``1 / (1.01 * L_hat)`` from per-frequency power iteration.

    ``L_hat`` upper-bounds (after the 1.01 safety factor) the largest
    eigenvalue over all accumulator blocks.  Deterministic: the start vectors
    come from a fixed-seed generator.
    """
    if acc.t < 1:
        raise InvalidStateError("step size undefined for an accumulator with t = 0")
    if cfg.step_size is not None:
        return cfg.step_size
    rng = np.random.default_rng(0)
    f = acc.freq_count
    v = rng.standard_normal((acc.m, f)) + 1j * rng.standard_normal((acc.m, f))
    for _ in range(cfg.power_iters):
        norms = np.sqrt(np.einsum("if,if->f", v.conj(), v).real)
        np.divide(v, norms, out=v, where=norms > 0)
        v = kernels.block_matvec(acc.a_blocks, v)
    lam = float(np.max(np.sqrt(np.einsum("if,if->f", v.conj(), v).real)))
    if not lam > 0:
        raise InvalidStateError("cannot estimate a step size for an all-zero accumulator")
    return 1.0 / (1.01 * lam)


def _fista_loop(d_init, dims, eta, grad_fn, value_fn, cfg):
    """Projected FISTA on the filter set, shared by the production update and
    by test drivers that supply their own gradient/value callables.

    ``grad_fn`` and ``value_fn`` act on ``(M, F)`` flattened spectra.  The
    iterate sequence follows the accelerated recursion with gamma reset to 1
    whenever the value increases (restart); if the final iterate still ends
    above the starting value, the best iterate seen is returned so the update
    never degrades the surrogate.
    """
    m = d_init.count
    l_shape = d_init.filter_shape
    half = (dims[0], dims[1] // 2 + 1)

    def spectrum(padded):
        return np.ascontiguousarray(fft2(padded).reshape(m, -1))

    cur = d_init
    cur_pad = d_init.padded(dims)
    aux_pad = cur_pad
    v_init = v_cur = value_fn(spectrum(cur_pad))
    best_val, best = v_init, d_init
    gamma = 1.0
    restarts = 0
    iterations = 0
    rel_change = np.inf

    for j in range(cfg.max_iter):
        aux_hat = spectrum(aux_pad)
        stepped = ifft2((aux_hat - eta * grad_fn(aux_hat)).reshape((m,) + half), dims)
        if not np.all(np.isfinite(stepped)):
            raise NumericalFailureError(
                f"non-finite dictionary iterate at inner iteration {j}", iteration=j
            )
        new = proj_cpn(stepped, l_shape)
        if __debug__:
            new.validate()
        new_pad = new.padded(dims)
        v_new = value_fn(spectrum(new_pad))
        iterations = j + 1
        rel_change = float(
            np.linalg.norm(new.filters - cur.filters) / np.linalg.norm(cur.filters)
        )

        gamma_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * gamma * gamma))
        if v_new > v_cur:
            restarts += 1
            gamma = 1.0
            aux_pad = new_pad
        else:
            aux_pad = new_pad + ((gamma - 1.0) / gamma_next) * (new_pad - cur_pad)
            gamma = gamma_next

        cur, cur_pad, v_cur = new, new_pad, v_new
        if v_new < best_val:
            best_val, best = v_new, new
        if rel_change < cfg.rel_tol:
            break

    if v_cur > v_init:
        cur, v_cur = best, best_val
    return cur, FistaStats(iterations, rel_change, v_cur, restarts)


def fista_d_update(acc, d_prev, signal_dims, cfg):
    """One dictionary update: minimize the accumulated surrogate over the
    constraint set by frequency-domain projected FISTA.

    Parameters
    ----------
    acc : Accumulator
        Must hold at least one sample and not be identically zero.
    d_prev : Dictionary
        Starting point (and fallback direction of the Nesterov sequence).
    signal_dims : tuple
        Working grid ``(N1, N2)``; must match the accumulator's grid.
    cfg : FistaConfig

    Returns
    -------
    (Dictionary, FistaStats)
        The updated dictionary satisfies the support and unit-norm
        constraints, and its surrogate value never exceeds ``d_prev``'s.
    """
    if acc.t < 1:
        raise InvalidStateError("dictionary update requires at least one sample")
    if acc.is_zero():
        raise InvalidStateError("dictionary update on an all-zero accumulator")
    dims = (int(signal_dims[0]), int(signal_dims[1]))
    if dims != (acc.n1, acc.n2):
        raise InvalidInputError(
            f"signal dims {dims} do not match accumulator grid ({acc.n1}, {acc.n2})"
        )
    l1, l2 = d_prev.filter_shape
    if d_prev.count != acc.m or l1 > acc.n1 or l2 > acc.n2:
        raise InvalidInputError("dictionary does not match the accumulator layout")

    eta = estimate_step_size(acc, cfg)
    b_t = acc.b_vecs.T

    def grad_fn(g_flat):
        return kernels.block_matvec(acc.a_blocks, g_flat) - b_t

    weights = halfplane_col_weights(acc.n2)

    def value_fn(g_flat):
        terms = kernels.quad_terms(acc.a_blocks, acc.b_vecs, g_flat)
        return 0.5 * (float(np.sum(terms.reshape(acc.n1, -1) * weights)) + acc.s_energy)

    return _fista_loop(d_prev, dims, eta, grad_fn, value_fn, cfg)
