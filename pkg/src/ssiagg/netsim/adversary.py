"""Scripted adversarial behaviour attached to simulation actors."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

ACTIONS = (
    "tamper-vc",
    "forge-claim",
    "replay-omega",
    "impersonate-did",
    "drop-message",
    "corrupt-partition",
    "skip-authorization",
)

# Step at which each action takes effect when the script names none.
DEFAULT_TRIGGERS = {
    "tamper-vc": 9,
    "forge-claim": 7,
    "replay-omega": 5,
    "impersonate-did": 9,
    "drop-message": 8,
    "corrupt-partition": 7,
    "skip-authorization": 3,
}


@dataclass(frozen=True)
class AdversaryScript:
    """One misbehaviour of one actor.

    ``tamper-vc`` edits the ownership credential after issuance;
    ``forge-claim`` delivers data other than what was endorsed;
    ``replay-omega`` presents an approval bound to a stale nonce;
    ``impersonate-did`` signs as the source without its secret key;
    ``drop-message`` loses the actor's messages at ``trigger``;
    ``corrupt-partition`` flips a bit in the actor's stored data;
    ``skip-authorization`` delivers without asking the authority.
    """

    actor: str
    action: str
    trigger: int | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    expect: str | Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if self.action not in ACTIONS:
            raise ValueError(f"unknown adversary action {self.action!r}")
        if self.trigger is None:
            object.__setattr__(self, "trigger", DEFAULT_TRIGGERS[self.action])

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"actor": self.actor, "action": self.action, "trigger": self.trigger}
        if self.params:
            out["params"] = dict(self.params)
        if self.expect is not None:
            out["expect"] = self.expect if isinstance(self.expect, str) else dict(self.expect)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> AdversaryScript:
        return cls(
            actor=data["actor"],
            action=data["action"],
            trigger=data.get("trigger"),
            params=data.get("params") or {},
            expect=data.get("expect"),
        )
