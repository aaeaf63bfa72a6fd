"""Neural point-field radio coverage prediction with a ray-tracing oracle."""

__version__ = "0.1.0"
