"""Domain-changing primitives: FFT, Haar-initialised wavelets, pixel shuffle."""
