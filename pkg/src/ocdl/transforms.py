"""Real 2-D Fourier transforms and FFT-domain convolutional dictionary application.

Conventions used throughout the package:

* forward transforms are unnormalized, the inverse carries the ``1/(N1*N2)``
  factor (the default of :mod:`numpy.fft`);
* spectra of real arrays are stored on the non-redundant half plane with
  shape ``(..., N1, N2//2 + 1)``;
* all floating point is 64-bit.

Because only the half plane is stored, sums over "all frequencies" weight the
columns that drop their conjugate mirror twice; :func:`halfplane_col_weights`
returns those weights.
"""

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "fft2",
    "ifft2",
    "dict_apply",
    "halfplane_col_weights",
    "hermitian_normsq",
    "pad_filters",
]


def fft2(values):
    """Forward 2-D DFT of a real array, half-plane output.

    Parameters
    ----------
    values : ndarray
        Real array of shape ``(..., N1, N2)``; leading axes are transformed
        independently (e.g. a stack of coefficient maps).

    Returns
    -------
    ndarray
        Complex spectrum of shape ``(..., N1, N2//2 + 1)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim < 2:
        raise InvalidInputError("fft2 expects at least a 2-D array")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("fft2 input contains non-finite values")
    return np.fft.rfft2(values, axes=(-2, -1))


def ifft2(spectrum, dims):
    """Inverse of :func:`fft2`, scaled by ``1/(N1*N2)``.

    ``dims`` is the spatial shape ``(N1, N2)``; it cannot be inferred from the
    half-plane spectrum because ``N2`` and ``N2 + 1`` share a spectrum width.
    """
    spectrum = np.asarray(spectrum)
    n1, n2 = int(dims[0]), int(dims[1])
    if spectrum.ndim < 2 or spectrum.shape[-2] != n1 or spectrum.shape[-1] != n2 // 2 + 1:
        raise InvalidInputError(
            f"spectrum shape {spectrum.shape} inconsistent with dims ({n1}, {n2})"
        )
    return np.fft.irfft2(spectrum, s=(n1, n2), axes=(-2, -1))


def dict_apply(d_hat, x_hat):
    """Apply a dictionary to coefficient maps in the frequency domain.

    Computes ``sum_m d_hat[m] * x_hat[m]`` pointwise, the spectrum of the sum
    of circular convolutions of each filter with its map.
    """
    d_hat = np.asarray(d_hat)
    x_hat = np.asarray(x_hat)
    if d_hat.shape != x_hat.shape or d_hat.ndim != 3:
        raise InvalidInputError(
            f"spectrum sets must share shape (M, F1, F2); got {d_hat.shape} and {x_hat.shape}"
        )
    return np.sum(d_hat * x_hat, axis=0)


def halfplane_col_weights(n2):
    """Multiplicity of each stored spectrum column in the full frequency plane.

    Column 0 (and the Nyquist column for even ``n2``) appear once; every other
    stored column stands for itself and its dropped conjugate mirror.
    """
    cols = n2 // 2 + 1
    weights = np.full(cols, 2.0)
    weights[0] = 1.0
    if n2 % 2 == 0:
        weights[-1] = 1.0
    return weights


def hermitian_normsq(spectrum, n2):
    """Squared norm of a half-plane spectrum over the full (expanded) plane.

    Equals ``N1*N2`` times the squared spatial norm (Parseval).
    """
    spectrum = np.asarray(spectrum)
    weights = halfplane_col_weights(n2)
    return float(np.sum(np.abs(spectrum) ** 2 * weights))


def pad_filters(filters, dims):
    """Zero-pad small filters into the top-left corner of ``dims``-sized arrays."""
    filters = np.asarray(filters, dtype=np.float64)
    m, l1, l2 = filters.shape
    n1, n2 = int(dims[0]), int(dims[1])
    if l1 > n1 or l2 > n2:
        raise InvalidInputError(f"filters {l1}x{l2} do not fit inside {n1}x{n2}")
    padded = np.zeros((m, n1, n2))
    padded[:, :l1, :l2] = filters
    return padded
