"""AdamW, cosine schedule, training loop and checkpoints."""
