"""Memristive STDP synapse model and spiking-network experiments."""
__version__ = "0.1.0"
