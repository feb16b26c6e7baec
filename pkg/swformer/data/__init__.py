"""Synthetic degradations, paired corpora and PNG I/O."""
