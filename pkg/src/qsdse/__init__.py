"""Accuracy/energy design-space exploration for a scalable, quantized KWS CNN on FPGA."""

__version__ = "0.1.0"
