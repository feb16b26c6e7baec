"""Layers, SWFormer blocks and the multi-scale restoration network."""
