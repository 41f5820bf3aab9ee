"""Circulant / Fourier algebra shared by the solver and the tracker.

Grids are numpy arrays. A single-channel grid has shape ``(M, N)``; a
multi-channel grid has shape ``(M, N, D)`` with the channel axis last.
The forward DFT is unnormalized and the inverse carries the ``1/(M*N)``
factor, so ``idft2(dft2(g)) == g``.
"""
import numpy as np
import scipy.fft as sfft

DENSE_LIMIT = 256


def _as_multichannel(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        return x[:, :, None]
    if x.ndim != 3:
        raise ValueError(f"expected a 2-D or 3-D grid, got shape {x.shape}")
    return x


def dft2(g):
    """Forward 2-D DFT over the two leading axes."""
    return sfft.fft2(g, axes=(0, 1))


def idft2(s, real=True):
    """Inverse of :func:`dft2`. Returns the real part unless ``real=False``."""
    out = sfft.ifft2(s, axes=(0, 1))
    return out.real if real else out


def circ_shift(g, dm, dn):
    """Cyclic translation by ``dm`` rows and ``dn`` columns."""
    return np.roll(g, (dm, dn), axis=(0, 1))


def linear_kernel_spectrum(x, z):
    """Spectrum of the linear cross-correlation ``k[s] = <shift_s(x), z>``.

    Summed over channels: ``sum_c conj(x_c^) * z_c^``.
    """
    x = _as_multichannel(x)
    z = _as_multichannel(z)
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {z.shape}")
    return np.sum(np.conj(dft2(x)) * dft2(z), axis=2)


def gaussian_kernel_map(x, z, sigma, xf=None, zf=None):
    """Spatial Gaussian kernel correlation map over all cyclic shifts.

    ``k[s] = exp(-||x - shift_{-s}(z)||^2 / (sigma^2 * numel))`` where
    ``numel = M*N*D``. Precomputed spectra may be passed to skip FFTs.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = _as_multichannel(x)
    z = _as_multichannel(z)
    if x.shape != z.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {z.shape}")
    if xf is None:
        xf = dft2(x)
    if zf is None:
        zf = dft2(z)
    cross = idft2(np.sum(np.conj(xf) * zf, axis=2))
    dist = np.sum(x * x) + np.sum(z * z) - 2.0 * cross
    # round-off can push tiny distances negative
    np.maximum(dist, 0.0, out=dist)
    return np.exp(-dist / (sigma * sigma * x.size))


def gaussian_kernel_spectrum(x, z, sigma, xf=None, zf=None):
    return dft2(gaussian_kernel_map(x, z, sigma, xf=xf, zf=zf))


def kernel_spectrum(x, z, kernel="gaussian", sigma=0.5, xf=None, zf=None):
    """Dispatch to the linear or Gaussian kernel correlation spectrum."""
    if kernel == "linear":
        if xf is None or zf is None:
            return linear_kernel_spectrum(x, z)
        return np.sum(np.conj(xf) * zf, axis=2)
    if kernel == "gaussian":
        return gaussian_kernel_spectrum(x, z, sigma, xf=xf, zf=zf)
    raise ValueError(f"unknown kernel {kernel!r}")


def dense_circulant(x):
    """Explicit circulant matrix ``C`` with ``C @ v == idft2(dft2(x) * dft2(v))``.

    Row ``i`` holds ``x`` reversed and cyclically shifted so that ``C``
    implements 2-D circular convolution on raveled grids. Oracle use only.
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    m, n = x.shape
    size = m * n
    if size > DENSE_LIMIT:
        raise ValueError(f"grid of {size} cells exceeds dense limit {DENSE_LIMIT}")
    ii, jj = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    # C[(i1,j1),(i2,j2)] = x[(i1-i2) mod m, (j1-j2) mod n]
    return x[(ii[:, None] - ii[None, :]) % m, (jj[:, None] - jj[None, :]) % n]


def shift_matrix(x):
    """Data matrix whose row ``s`` is ``shift_s(x)`` raveled (all channels).

    Rows enumerate shifts ``(dm, dn)`` in C order. Oracle use only.
    """
    x = _as_multichannel(x)
    m, n, _ = x.shape
    if m * n > DENSE_LIMIT:
        raise ValueError(f"grid of {m * n} cells exceeds dense limit {DENSE_LIMIT}")
    return np.stack([circ_shift(x, dm, dn).ravel() for dm in range(m) for dn in range(n)])
