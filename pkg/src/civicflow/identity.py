"""Principals, roles, privileges, and token-based sessions.

Secrets are stored only as salted PBKDF2 hashes; authentication failures are
indistinguishable between unknown id and wrong secret.  Tokens are random
128-bit strings with a TTL read from the injected clock.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass, field
from enum import Enum

from civicflow.clock import Clock
from civicflow.errors import (
    BadCredentials,
    DuplicateId,
    DuplicateRole,
    ExpiredToken,
    PrivilegeDenied,
    UnknownPrincipal,
    UnknownRole,
    UnknownToken,
)

DEFAULT_TOKEN_TTL = 8 * 3600


class Privilege(str, Enum):
    CLAIM_TASK = "claim-task"
    SUPERVISE = "supervise"
    DEPLOY_DEFINITION = "deploy-definition"
    MANAGE_USERS = "manage-users"
    VIEW_ALL_TRACKING = "view-all-tracking"


class PrincipalKind(str, Enum):
    CITIZEN = "citizen"
    OFFICER = "officer"
    SYSTEM = "system"


BUILTIN_ROLES: dict[str, frozenset[Privilege]] = {
    "admin": frozenset(Privilege),
    "supervisor": frozenset(
        {Privilege.CLAIM_TASK, Privilege.SUPERVISE, Privilege.VIEW_ALL_TRACKING}
    ),
    "manager": frozenset({Privilege.CLAIM_TASK, Privilege.VIEW_ALL_TRACKING}),
    "citizen": frozenset({Privilege.CLAIM_TASK}),
}


@dataclass
class Principal:
    id: str
    name: str
    kind: PrincipalKind
    salt: bytes
    secret_hash: bytes
    properties: dict[str, str] = field(default_factory=dict)
    roles: set[str] = field(default_factory=set)

    def public_view(self) -> dict:
        """Everything about a principal that is safe to show or serialize."""
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind.value,
            "properties": dict(self.properties),
            "roles": sorted(self.roles),
        }


@dataclass(frozen=True)
class Role:
    name: str
    privileges: frozenset[Privilege]


@dataclass(frozen=True)
class SessionToken:
    token: str
    principal_id: str
    issued_at: float
    expires_at: float


class IdentityService:
    def __init__(
        self,
        clock: Clock,
        token_ttl: float = DEFAULT_TOKEN_TTL,
        hash_iterations: int = 100_000,
    ):
        self._clock = clock
        self._ttl = token_ttl
        self._iterations = hash_iterations
        self._lock = threading.RLock()
        self._principals: dict[str, Principal] = {}
        self._roles: dict[str, Role] = {}
        self._sessions: dict[str, SessionToken] = {}
        for name, privileges in BUILTIN_ROLES.items():
            self._roles[name] = Role(name, privileges)

    # -- bootstrap ---------------------------------------------------------

    def bootstrap_admin(self, principal_id: str, secret: str, name: str = "Administrator") -> Principal:
        """Create the initial admin account from configuration; idempotent."""
        with self._lock:
            if principal_id in self._principals:
                return self._principals[principal_id]
            principal = self._make_principal(principal_id, name, PrincipalKind.OFFICER, secret)
            principal.roles.add("admin")
            self._principals[principal_id] = principal
            return principal

    # -- principals and roles ----------------------------------------------

    def register(
        self,
        caller: str,
        principal_id: str,
        name: str,
        kind: PrincipalKind,
        secret: str,
        properties: dict[str, str] | None = None,
    ) -> Principal:
        self.require_privilege(caller, Privilege.MANAGE_USERS)
        with self._lock:
            if principal_id in self._principals:
                raise DuplicateId(f"principal {principal_id!r} already exists")
            principal = self._make_principal(principal_id, name, kind, secret, properties)
            self._principals[principal_id] = principal
            return principal

    def create_role(self, caller: str, name: str, privileges: set[Privilege]) -> Role:
        self.require_privilege(caller, Privilege.MANAGE_USERS)
        with self._lock:
            if name in self._roles:
                raise DuplicateRole(f"role {name!r} already exists")
            role = Role(name, frozenset(privileges))
            self._roles[name] = role
            return role

    def ensure_role(self, name: str, privileges: set[Privilege] | None = None) -> Role:
        """Register a role if absent (used when deploying definitions)."""
        with self._lock:
            if name not in self._roles:
                self._roles[name] = Role(
                    name, frozenset(privileges or {Privilege.CLAIM_TASK})
                )
            return self._roles[name]

    def assign_role(self, caller: str, principal_id: str, role: str) -> set[str]:
        self.require_privilege(caller, Privilege.MANAGE_USERS)
        with self._lock:
            principal = self._get_principal(principal_id)
            if role not in self._roles:
                raise UnknownRole(f"role {role!r} is not registered")
            principal.roles.add(role)
            return set(principal.roles)

    def revoke_role(self, caller: str, principal_id: str, role: str) -> set[str]:
        self.require_privilege(caller, Privilege.MANAGE_USERS)
        with self._lock:
            principal = self._get_principal(principal_id)
            if role not in self._roles:
                raise UnknownRole(f"role {role!r} is not registered")
            principal.roles.discard(role)
            return set(principal.roles)

    def principal(self, principal_id: str) -> Principal:
        with self._lock:
            return self._get_principal(principal_id)

    def principal_exists(self, principal_id: str) -> bool:
        with self._lock:
            return principal_id in self._principals

    def roles_of(self, principal_id: str) -> set[str]:
        with self._lock:
            principal = self._principals.get(principal_id)
            return set(principal.roles) if principal else set()

    def role_names(self) -> set[str]:
        with self._lock:
            return set(self._roles)

    # -- authentication and authorization ------------------------------------

    def authenticate(self, principal_id: str, secret: str) -> SessionToken:
        """Issue a session token; unknown id and wrong secret fail identically."""
        with self._lock:
            principal = self._principals.get(principal_id)
        candidate = self._hash(secret, principal.salt if principal else b"\x00" * 16)
        if principal is None or not hmac.compare_digest(candidate, principal.secret_hash):
            raise BadCredentials("invalid credentials")
        now = self._clock.now()
        token = SessionToken(
            token=secrets.token_hex(16),
            principal_id=principal_id,
            issued_at=now,
            expires_at=now + self._ttl,
        )
        with self._lock:
            self._sessions[token.token] = token
        return token

    def resolve(self, token: str) -> str:
        """Token -> principal id; expired or unknown tokens never authorize."""
        with self._lock:
            session = self._sessions.get(token)
        if session is None:
            raise UnknownToken("token not recognized")
        if self._clock.now() >= session.expires_at:
            raise ExpiredToken("token expired")
        return session.principal_id

    def authorize(self, token: str, privilege: Privilege) -> str:
        principal_id = self.resolve(token)
        self.require_privilege(principal_id, privilege)
        return principal_id

    def has_privilege(self, principal_id: str, privilege: Privilege) -> bool:
        with self._lock:
            principal = self._principals.get(principal_id)
            if principal is None:
                return False
            for role_name in principal.roles:
                role = self._roles.get(role_name)
                if role and privilege in role.privileges:
                    return True
            return False

    def require_privilege(self, principal_id: str, privilege: Privilege) -> None:
        if not self.has_privilege(principal_id, privilege):
            raise PrivilegeDenied(f"{principal_id!r} lacks privilege {privilege.value}")

    # -- internals -----------------------------------------------------------

    def _get_principal(self, principal_id: str) -> Principal:
        principal = self._principals.get(principal_id)
        if principal is None:
            raise UnknownPrincipal(f"principal {principal_id!r} not found")
        return principal

    def _make_principal(
        self,
        principal_id: str,
        name: str,
        kind: PrincipalKind,
        secret: str,
        properties: dict[str, str] | None = None,
    ) -> Principal:
        salt = secrets.token_bytes(16)
        return Principal(
            id=principal_id,
            name=name,
            kind=kind,
            salt=salt,
            secret_hash=self._hash(secret, salt),
            properties=dict(properties or {}),
        )

    def _hash(self, secret: str, salt: bytes) -> bytes:
        return hashlib.pbkdf2_hmac("sha256", secret.encode("utf-8"), salt, self._iterations)
