"""Workflow management for public-service delivery.

Process definitions written in a small text language drive an enactment
engine whose human tasks flow through worklists with expiration, escalation,
delegation, and renewal.  Everything the engine does lands in an append-only
event log that powers tracking, notifications, replay, and metrics; mock
billing and staff-directory systems stand in for the external government
estate.
"""

from civicflow.runtime import Runtime, RuntimeConfig

__version__ = "0.1.0"

__all__ = ["Runtime", "RuntimeConfig", "__version__"]
