"""Linear building blocks shared by the forward transforms and their adjoints.

Every forward op here has an ``*_adjoint`` partner satisfying
``<A u, v> = <u, A* v>`` for the real inner product ``Re sum(conj(a) * b)``.
"""
import numpy as np
import scipy.fft as sfft


def pad_index(n, n_fft, mode="reflect"):
    """Source index for each sample of a length-``n_fft`` periodic buffer.

    The signal occupies ``[0, n)``; the remainder holds a symmetric extension
    that mirrors the end of the signal, then the start, so that the periodic
    wrap-around meets mirrored samples on both sides.
    """
    if mode == "periodic":
        if n_fft != n:
            raise ValueError(f"periodic padding needs n_fft == n, got {n_fft} != {n}")
        return np.arange(n)
    if mode != "reflect":
        raise ValueError(f"unknown padding mode {mode!r}")
    if n_fft < n:
        raise ValueError(f"n_fft={n_fft} shorter than signal length {n}")
    extra = n_fft - n
    left = extra // 2
    if n == 1:
        return np.zeros(n_fft, dtype=int)
    idx = np.pad(np.arange(n), (left, extra - left), mode="reflect")
    return np.roll(idx, -left)


def gather(x, idx, axis=0):
    return np.take(x, idx, axis=axis)


def gather_adjoint(g, idx, n, axis=0):
    g = np.moveaxis(g, axis, 0)
    out = np.zeros((n,) + g.shape[1:], dtype=g.dtype)
    np.add.at(out, idx, g)
    return np.moveaxis(out, 0, axis)


def _expand(h, ndim):
    return h.reshape(h.shape + (1,) * (ndim - h.ndim))


def fft(x, axis=0):
    return sfft.fft(x, axis=axis)


def conv_subsample(x_hat, h_hat, stride=1, axis=0):
    """``ifft(x_hat * h_hat)`` keeping every ``stride``-th sample along ``axis``.

    ``x_hat`` is already in the Fourier domain along ``axis``; ``h_hat`` is
    indexed by frequency on its first dimension and broadcast over the rest.
    Subsampling is carried out by periodizing the spectrum, so only the
    retained samples are synthesized.
    """
    x_hat = np.moveaxis(x_hat, axis, 0)
    if h_hat.ndim > x_hat.ndim:
        x_hat = x_hat.reshape(x_hat.shape + (1,) * (h_hat.ndim - x_hat.ndim))
    n = x_hat.shape[0]
    z = x_hat * _expand(h_hat, x_hat.ndim)
    if stride > 1:
        z = z.reshape((stride, n // stride) + z.shape[1:]).sum(axis=0) / stride
    return np.moveaxis(sfft.ifft(z, axis=0), 0, axis)


def conv_subsample_adjoint(g, h_hat, stride=1, axis=0):
    """Adjoint of :func:`conv_subsample` composed with the forward FFT.

    Returns ``ifft(conj(h_hat) * fft(upsample(g)))``: correlation with the
    complex-conjugate filter after zero-insertion upsampling.
    """
    g = np.moveaxis(g, axis, 0)
    G = sfft.fft(g, axis=0)
    if stride > 1:
        G = np.concatenate([G] * stride, axis=0)
    out = sfft.ifft(G * np.conj(_expand(h_hat, G.ndim)), axis=0)
    return np.moveaxis(out, 0, axis)


def lowpass_decimate(a, h_hat, stride, axis=0):
    """Real ``a`` filtered by ``h_hat`` and kept every ``stride``-th sample.

    Equals ``conv_subsample(fft(a), h_hat, stride).real`` when ``h_hat`` is
    real, even and zero at and above the Nyquist frequency of the output grid,
    but only transforms the retained band.
    """
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    m = n // stride
    R = sfft.rfft(a, axis=0)[: m // 2 + 1]
    out = sfft.irfft(R * _expand(h_hat[: m // 2 + 1], R.ndim), n=m, axis=0) / stride
    return np.moveaxis(out, 0, axis)


def lowpass_decimate_adjoint(g, h_hat, stride, axis=0):
    """Adjoint of :func:`lowpass_decimate` (real in, real out)."""
    g = np.moveaxis(g, axis, 0)
    m = g.shape[0]
    n = m * stride
    G = sfft.rfft(g, axis=0) * _expand(h_hat[: m // 2 + 1], g.ndim)
    full = np.zeros((n // 2 + 1,) + g.shape[1:], dtype=complex)
    full[: m // 2 + 1] = G
    out = sfft.irfft(full, n=n, axis=0)
    return np.moveaxis(out, 0, axis)


def modulus(z):
    return np.abs(z)


def modulus_backward(g, z, u):
    """Backpropagate ``u = |z|``: ``g * z / |z|``, with 0 where ``|z| = 0``."""
    # z vanishes wherever u does, so dividing by 1 there yields 0
    return g * (z / np.where(u > 0, u, 1.0))


def crop(x, n, axis=0):
    return np.take(x, np.arange(n), axis=axis)


def crop_adjoint(g, n_full, axis=0):
    g = np.moveaxis(g, axis, 0)
    out = np.zeros((n_full,) + g.shape[1:], dtype=g.dtype)
    out[: g.shape[0]] = g
    return np.moveaxis(out, 0, axis)
