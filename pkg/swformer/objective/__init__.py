"""Multi-domain training loss and image quality metrics."""
