from __future__ import annotations

from fractions import Fraction

import pytest

from ssiagg.crypto import DeterministicProvider
from ssiagg.identity import Registry
from ssiagg.ledger import Ledger, LedgerConfig
from ssiagg.netsim import AuthorityActor, ConsumerActor, SourceActor, World

PERSON = {"firstName": "string", "lastName": "string", "age": "number"}


@pytest.fixture
def provider():
    return DeterministicProvider(7)


@pytest.fixture
def ledger():
    return Ledger(LedgerConfig(5, Fraction(2, 3)))


@pytest.fixture
def registry(ledger, provider):
    return Registry(ledger, provider)


@pytest.fixture
def make_actor(provider, registry):
    """Create an actor of ``cls`` and propagate its DID document."""

    def make(name: str, cls=ConsumerActor, **kwargs):
        actor = cls.create(provider, name, **kwargs)
        registry.propagate(actor.document(), submitter=actor.wallet(provider))
        return actor

    return make


@pytest.fixture
def world(provider):
    """A world with one authority, two sources (one per backend) and a consumer."""
    w = World(provider, Ledger(LedgerConfig(5, Fraction(2, 3))), seed=11)
    for i in range(4):
        w.add_location(f"loc-{i}")
    w.add_host("datacenter")
    authority = w.add(AuthorityActor.create(provider, "authority"))
    w.add(ConsumerActor.create(provider, "consumer"))
    w.add(SourceActor.create(provider, "s1", authority=authority.did, gamma=0.25))
    w.add(SourceActor.create(provider, "s2", authority=authority.did, backend="self-hosted", host="datacenter"))
    for actor in list(w.actors.values()):
        assert w.propagate(actor).finalized
    return w


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; the lines are echoed in the terminal summary."""

    def record(number: int, title: str, ok: bool, elapsed: float, limit: float | None, detail: str = "") -> None:
        timing = f"{elapsed:.2f}s" + (f" (limit {limit:g}s)" if limit is not None else "")
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}; {timing}" + (f"; {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
