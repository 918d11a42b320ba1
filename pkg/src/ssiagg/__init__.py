"""Identity-backed decentralized data aggregation, simulated end to end."""

__version__ = "0.1.0"
