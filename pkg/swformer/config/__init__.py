"""Configuration: runtime settings, experiment YAML and logging setup."""
