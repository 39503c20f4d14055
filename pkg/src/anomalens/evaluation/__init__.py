"""Evaluation: frame tracks, detection metrics, annotations and the category judge."""
