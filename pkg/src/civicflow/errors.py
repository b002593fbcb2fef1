"""Error hierarchy shared by all services.

Every error carries a stable ``code`` string (the class name) which the HTTP
facade and CLI expose verbatim, so callers can match on codes instead of
messages.
"""

from __future__ import annotations


class WorkflowError(Exception):
    """Base for all domain errors; ``code`` is the stable machine-readable name."""

    code = "WorkflowError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


def _error(name: str, base: type = WorkflowError) -> type:
    cls = type(name, (base,), {"code": name})
    cls.__module__ = __name__
    return cls


# process-model
ParseError = _error("ParseError")
UnboundVariable = _error("UnboundVariable")
GuardTypeError = _error("GuardTypeError")

# enactment-engine
UnknownDefinition = _error("UnknownDefinition")
DuplicateDefinition = _error("DuplicateDefinition")
InvalidDefinition = _error("InvalidDefinition")
InvalidVariables = _error("InvalidVariables")
ActivityNotActive = _error("ActivityNotActive")
NoTransitionSatisfied = _error("NoTransitionSatisfied")
ClockRegression = _error("ClockRegression")
NotRunning = _error("NotRunning")
UnknownInstance = _error("UnknownInstance")

# task-service
UnknownTask = _error("UnknownTask")
NotPending = _error("NotPending")
NotClaimed = _error("NotClaimed")
NotAssignee = _error("NotAssignee")
RoleMismatch = _error("RoleMismatch")
InvalidOutput = _error("InvalidOutput")
IneligibleDelegate = _error("IneligibleDelegate")
TerminalState = _error("TerminalState")
RenewalsExhausted = _error("RenewalsExhausted")

# tracking-service
MalformedEvent = _error("MalformedEvent")

# notification-service
UnknownChannel = _error("UnknownChannel")
DuplicateChannel = _error("DuplicateChannel")
EmptyFilter = _error("EmptyFilter")
UnknownSubscription = _error("UnknownSubscription")

# identity-service
Unauthenticated = _error("Unauthenticated")
BadCredentials = _error("BadCredentials")
ExpiredToken = _error("ExpiredToken")
UnknownToken = _error("UnknownToken")
PrivilegeDenied = _error("PrivilegeDenied")
DuplicateId = _error("DuplicateId")
UnknownPrincipal = _error("UnknownPrincipal")
UnknownRole = _error("UnknownRole")
DuplicateRole = _error("DuplicateRole")

# integration-gateway
DuplicateConnector = _error("DuplicateConnector")
UnknownConnector = _error("UnknownConnector")
ConnectorFailure = _error("ConnectorFailure")
UnknownOfficer = _error("UnknownOfficer")
