"""egressaudit: detect and monitor HTTP requests to non-EEA third-party domains."""

__version__ = "0.1.0"
