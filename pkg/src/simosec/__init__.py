"""Secure SIMO link simulation with RF impairments and a wiretap autoencoder."""
__version__ = "0.1.0"
