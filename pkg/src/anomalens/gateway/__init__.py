"""Model gateway: endpoints, prompts and backends for every model role.

Import the gateway itself from ``anomalens.gateway.client``; this package root
stays light because the configuration module depends on ``gateway.models``.
"""

from anomalens.gateway.models import ModelEndpoint, Role, SegmentVerdict

__all__ = ["ModelEndpoint", "Role", "SegmentVerdict"]
