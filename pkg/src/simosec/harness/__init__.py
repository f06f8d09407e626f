"""Experiment configuration, sweeps and result emission."""
