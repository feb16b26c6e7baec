"""SWFormer: spatial-wavelet-Fourier image restoration on a small numpy autodiff core."""

__version__ = "0.1.0"
