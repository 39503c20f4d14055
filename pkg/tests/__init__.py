"""Tests for PoundCake."""
