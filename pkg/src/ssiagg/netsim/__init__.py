"""Deterministic multi-actor simulation harness.

Scenario loading lives in :mod:`ssiagg.netsim.scenario`, which depends on the
aggregator and is therefore not imported here.
"""

from .actors import AuthorityActor, ConsumerActor, EntityActor, Role, SourceActor
from .adversary import ACTIONS, DEFAULT_TRIGGERS, AdversaryScript
from .router import DropRule, MessageEnvelope, NoMessage, PortClosed, RoutedNode, Router, RoutingError
from .scheduler import Scheduler
from .world import World

__all__ = [
    "ACTIONS",
    "DEFAULT_TRIGGERS",
    "AdversaryScript",
    "AuthorityActor",
    "ConsumerActor",
    "DropRule",
    "EntityActor",
    "MessageEnvelope",
    "NoMessage",
    "PortClosed",
    "Role",
    "RoutedNode",
    "Router",
    "RoutingError",
    "Scheduler",
    "SourceActor",
    "World",
]
