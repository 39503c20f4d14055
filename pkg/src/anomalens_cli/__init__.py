"""anomalens CLI - Run, sweep and inspect anomaly detection pipelines."""

__version__ = "0.1.0"
