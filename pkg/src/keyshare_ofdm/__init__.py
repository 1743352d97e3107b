"""Secret-key-assisted secure uplink for multi-antenna OFDM: link-level
simulation, outage analysis and key-queue steady state."""

__version__ = "0.1.0"
