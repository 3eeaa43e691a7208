"""Utility max-min fair link adaptation for multi-user downlink OFDM WLANs."""

__version__ = "0.1.0"
