"""Orthonormal 2D FFT over the spatial axes.

Both directions scale by 1/sqrt(h*w), so the transform is unitary and its
adjoint is its inverse; the backward rules below rely on that.
"""

import logging

import numpy as np

from swformer.tensor import ops
from swformer.tensor.core import ComplexTensor, Tensor, record

logger = logging.getLogger(__name__)

IMAG_RESIDUE_TOL = 1e-4


def fft2(x: Tensor) -> ComplexTensor:
    """Full-spectrum transform of every (sample, channel) plane."""
    dtype = x.dtype
    spectrum = np.fft.fft2(x.data, axes=(-2, -1), norm="ortho")

    def _backward_real(g):
        return (np.fft.ifft2(g, axes=(-2, -1), norm="ortho").real.astype(dtype),)

    def _backward_imag(g):
        return (np.fft.ifft2(1j * g, axes=(-2, -1), norm="ortho").real.astype(dtype),)

    real = record(np.ascontiguousarray(spectrum.real, dtype=dtype), (x,), _backward_real, "fft2.real")
    imag = record(np.ascontiguousarray(spectrum.imag, dtype=dtype), (x,), _backward_imag, "fft2.imag")
    return ComplexTensor(real, imag)


def ifft2(X: ComplexTensor, conjugate_symmetric: bool = False) -> Tensor:
    """Real part of the inverse transform.

    With ``conjugate_symmetric`` the caller asserts the spectrum came from a
    real signal; a discarded imaginary part above 1e-4 is then logged.
    """
    dtype = X.real.dtype
    signal = np.fft.ifft2(X.real.data + 1j * X.imag.data, axes=(-2, -1), norm="ortho")
    if conjugate_symmetric:
        residue = float(np.max(np.abs(signal.imag), initial=0.0))
        if residue > IMAG_RESIDUE_TOL:
            logger.warning("ifft2: imaginary residue %.3e on a conjugate-symmetric input", residue)

    def _backward(g):
        spectrum = np.fft.fft2(g, axes=(-2, -1), norm="ortho")
        return spectrum.real.astype(dtype), spectrum.imag.astype(dtype)

    return record(np.ascontiguousarray(signal.real, dtype=dtype), (X.real, X.imag), _backward, "ifft2")


def ifft2_parts(X: ComplexTensor) -> ComplexTensor:
    """Real and imaginary parts of the inverse transform.

    Im(ifft2(Z)) equals Re(ifft2(-iZ)), and -i(a + ib) = b - ia.
    """
    real = ifft2(X)
    imag = ifft2(ComplexTensor(X.imag, ops.scale(X.real, -1.0)))
    return ComplexTensor(real, imag)


def log_magnitude(x: np.ndarray, centered: bool = True) -> np.ndarray:
    """log(1 + |F(x)|) of a 2D array for display, DC moved to the centre."""
    spectrum = np.abs(np.fft.fft2(x, norm="ortho"))
    if centered:
        spectrum = np.fft.fftshift(spectrum)
    return np.log1p(spectrum)
