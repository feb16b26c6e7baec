"""Prometheus metrics for training, evaluation and inference runs."""
