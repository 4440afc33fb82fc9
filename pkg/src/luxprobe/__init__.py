"""HDR environment-map toolkit: representation, tonemapping, probe rendering, metrics."""

__version__ = "0.1.0"
