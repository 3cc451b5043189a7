"""Uplink C-RAN with hybrid RF/FSO fronthaul: channel models, achievable
rates, fronthaul-aware sum-rate optimization and reference oracles."""

__version__ = "0.1.0"
