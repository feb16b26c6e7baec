"""Residual spectra and cross-image sub-band swapping."""
