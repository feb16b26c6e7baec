"""Per-image fan-out over a thread pool."""
