"""Cell-free massive MIMO simulation with fronthaul quantization and
joint fronthaul routing / cluster-processor placement."""

__version__ = "0.1.0"
