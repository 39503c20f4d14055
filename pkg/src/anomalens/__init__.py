"""anomalens - Explainable video anomaly detection over frozen vision-language models."""

__version__ = "0.1.0"
