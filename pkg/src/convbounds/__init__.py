"""Active-distance spectra and BER bounds for recursive systematic convolutional codes."""

__version__ = "0.1.0"
