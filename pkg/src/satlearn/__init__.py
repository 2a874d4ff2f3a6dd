"""Desk-scale simulator of decentralized spiking-network training over LEO constellations."""

__version__ = "0.1.0"
