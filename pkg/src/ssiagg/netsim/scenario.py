"""Scenario configs: build a world, run its phases, check expectations.

A scenario is a JSON document naming the ledger, crypto provider, storage
setup, role entities, the aggregation request and optional adversary
scripts. Entity keys are seeded by actor name, so DIDs and honest outputs do
not depend on the run seed; the seed drives the scheduler interleaving and
the fresh keys drawn during the run.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

from ..aggregator.arbitrator import Mode
from ..aggregator.protocol import (
    AggregationRequest,
    ProtocolError,
    RunResult,
    endorse_data,
    run_protocol,
)
from ..aggregator.transform import TransformSpec
from ..crypto import get_provider
from ..ledger import Ledger, LedgerConfig, LedgerRejection
from ..storage import POLICIES, InvalidSpecification, SchemaViolation, make_envelope
from .actors import AuthorityActor, ConsumerActor, SourceActor
from .adversary import ACTIONS, AdversaryScript
from .world import World

MODES = ("onchain", "offchain", "both")
BACKENDS = ("decentralized", "self-hosted")
DEFAULT_PHASES = ("initialization", "persistence", "acquisition")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ScenarioOutcome:
    name: str
    seed: int
    world: World
    results: dict[str, RunResult] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    ledger_before_acquisition: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def trace(self):
        return self.world.trace

    def output(self, mode: str) -> bytes | None:
        result = self.results.get(mode)
        return result.output_bytes if result is not None else None

    def status(self, mode: str, source: str) -> tuple[str, str | None]:
        """``(status, first reason)`` of source ``source`` (an actor name) in ``mode``."""
        state = self.results[mode].run.sources[self.world.actor(source).did]
        return state.status.value, state.reason

    def report(self) -> dict[str, Any]:
        return {
            "scenario": self.name,
            "seed": self.seed,
            "ok": self.ok,
            "failures": list(self.failures),
            "errors": dict(self.errors),
            "runs": {mode: result.report(self.world) for mode, result in self.results.items()},
            "ledger_length": len(self.world.ledger),
            "trace_digest": self.world.trace.digest(),
        }


def bundled_names() -> list[str]:
    root = resources.files("ssiagg") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source: str | Path | Mapping[str, Any]) -> dict[str, Any]:
    """Read a scenario from a mapping, a file path or a bundled scenario name."""
    if isinstance(source, Mapping):
        return json.loads(json.dumps(source))
    path = Path(source)
    if not path.exists():
        bundled = resources.files("ssiagg") / "scenarios" / f"{source}.json"
        if not bundled.is_file():
            raise ConfigError("<scenario>", f"no such file or bundled scenario: {source}")
        return json.loads(bundled.read_text())
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<scenario>", f"not valid JSON: {exc}") from exc


# validation helpers


def _need(cfg: Mapping[str, Any], key: str, path: str, kind: type | tuple[type, ...]) -> Any:
    where = f"{path}.{key}" if path else key
    if key not in cfg:
        raise ConfigError(where, "missing")
    value = cfg[key]
    if not isinstance(value, kind) or (isinstance(value, bool) and bool not in _tuple(kind)):
        raise ConfigError(where, f"expected {_names(kind)}")
    return value


def _opt(cfg: Mapping[str, Any], key: str, path: str, kind: type | tuple[type, ...], default: Any) -> Any:
    return _need(cfg, key, path, kind) if key in cfg else default


def _tuple(kind: type | tuple[type, ...]) -> tuple[type, ...]:
    return kind if isinstance(kind, tuple) else (kind,)


def _names(kind: type | tuple[type, ...]) -> str:
    return " or ".join(k.__name__ for k in _tuple(kind))


def _ledger(cfg: Mapping[str, Any], seed: int) -> Ledger:
    node_count = _opt(cfg, "node_count", "ledger", int, 4)
    try:
        delta = Fraction(str(_opt(cfg, "delta", "ledger", (str, int, float), "2/3")))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("ledger.delta", "not a rational number") from exc
    byz = _opt(cfg, "byzantine", "ledger", dict, {})
    try:
        config = LedgerConfig.byzantine(
            node_count, delta, _opt(byz, "k", "ledger.byzantine", int, 0), _opt(byz, "mode", "ledger.byzantine", str, "reject"), seed
        )
    except ValueError as exc:
        raise ConfigError("ledger", str(exc)) from exc
    return Ledger(config)


def _names_in(items: Sequence[Mapping[str, Any]], path: str) -> list[str]:
    names = []
    for i, item in enumerate(items):
        if not isinstance(item, Mapping):
            raise ConfigError(f"{path}[{i}]", "expected object")
        names.append(_need(item, "name", f"{path}[{i}]", str))
    if len(set(names)) != len(names):
        raise ConfigError(path, "duplicate names")
    return names


class _Builder:
    def __init__(self, config: Mapping[str, Any], seed: int, mode: str | None, strict: bool | None) -> None:
        self.cfg = config
        self.seed = seed
        self.name = _opt(config, "name", "", str, "scenario")
        self.mode = mode or _opt(config, "mode", "", str, "both")
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
        self.strict = _opt(config, "strict_termination", "", bool, False) if strict is None else strict
        self.phases = tuple(_opt(config, "phases", "", list, list(DEFAULT_PHASES)))
        if len(self.phases) != 3:
            raise ConfigError("phases", "expected three phase names")
        self.storage = _opt(config, "storage", "", dict, {})

    def world(self) -> World:
        crypto = _opt(self.cfg, "crypto", "", str, None)
        if crypto not in (None, "real", "deterministic"):
            raise ConfigError("crypto", "must be 'real' or 'deterministic'")
        provider = get_provider(crypto, self.seed)
        policy_name = _opt(self.storage, "policy", "storage", str, "round-robin")
        if policy_name not in POLICIES:
            raise ConfigError("storage.policy", f"unknown policy {policy_name!r}")
        world = World(
            provider,
            _ledger(_opt(self.cfg, "ledger", "", dict, {}), self.seed),
            seed=self.seed,
            policy=POLICIES[policy_name],
        )
        locations = _opt(self.storage, "locations", "storage", (int, list), 5)
        if isinstance(locations, int):
            locations = [{"id": f"loc-{i}"} for i in range(locations)]
        for i, loc in enumerate(locations):
            world.add_location(
                _need(loc, "id", f"storage.locations[{i}]", str),
                float(_opt(loc, "reputation", f"storage.locations[{i}]", (int, float), 1.0)),
                float(_opt(loc, "cost", f"storage.locations[{i}]", (int, float), 1.0)),
            )
        for host in _opt(self.storage, "hosts", "storage", list, ["datacenter"]):
            world.add_host(str(host))
        return world

    def populate(self, world: World) -> dict[str, Any]:
        cfg = self.cfg
        authorities = _need(cfg, "authorities", "", list)
        sources = _need(cfg, "sources", "", list)
        consumers = _need(cfg, "consumers", "", list)
        names = _names_in(authorities, "authorities") + _names_in(sources, "sources") + _names_in(consumers, "consumers")
        if len(set(names)) != len(names):
            raise ConfigError("<actors>", "actor names must be unique across roles")
        p = world.provider
        for i, a in enumerate(authorities):
            world.add(AuthorityActor.create(p, a["name"], a.get("key_seed")))
        for i, c in enumerate(consumers):
            world.add(ConsumerActor.create(p, c["name"], c.get("key_seed")))
        default_backend = _opt(self.storage, "backend", "storage", str, "decentralized")
        default_gamma = _opt(self.storage, "gamma", "storage", (int, float), 0.0)
        hosts = list(world.host_nodes)
        envelopes = {}
        for i, s in enumerate(sources):
            path = f"sources[{i}]"
            authority = _need(s, "authority", path, str)
            if authority not in world.actors or not isinstance(world.actor(authority), AuthorityActor):
                raise ConfigError(f"{path}.authority", f"{authority!r} is not an authority")
            backend = _opt(s, "backend", path, str, default_backend)
            if backend not in BACKENDS:
                raise ConfigError(f"{path}.backend", f"must be one of {', '.join(BACKENDS)}")
            gamma = float(_opt(s, "gamma", path, (int, float), default_gamma))
            if not 0 <= gamma < 1:
                raise ConfigError(f"{path}.gamma", "scatter degree must be in [0, 1)")
            host = _opt(s, "host", path, str, hosts[0] if hosts else "")
            if backend == "self-hosted" and host not in world.host_nodes:
                raise ConfigError(f"{path}.host", f"unknown host {host!r}")
            actor = world.add(
                SourceActor.create(
                    p, s["name"], s.get("key_seed"), authority=world.actor(authority).did, backend=backend, host=host, gamma=gamma
                )
            )
            try:
                envelopes[actor.name] = make_envelope(_need(s, "records", path, (list, dict)), _need(s, "spec", path, dict))
            except (InvalidSpecification, SchemaViolation) as exc:
                raise ConfigError(f"{path}.records", str(exc)) from exc
        for i, a in enumerate(authorities):
            actor = world.actor(a["name"])
            for key in ("reject_sources", "deny_access", "reject_consumers"):
                for name in _opt(a, key, f"authorities[{i}]", list, []):
                    if name not in world.actors:
                        raise ConfigError(f"authorities[{i}].{key}", f"unknown actor {name!r}")
                    getattr(actor, key).add(world.actor(name).did)
        return envelopes

    def request(self, world: World) -> AggregationRequest:
        req = _need(self.cfg, "request", "", dict)
        consumer = _need(req, "consumer", "request", str)
        if consumer not in world.actors or not isinstance(world.actor(consumer), ConsumerActor):
            raise ConfigError("request.consumer", f"{consumer!r} is not a consumer")
        names = _need(req, "sources", "request", list)
        for i, name in enumerate(names):
            if name not in world.actors or not isinstance(world.actor(name), SourceActor):
                raise ConfigError(f"request.sources[{i}]", f"{name!r} is not a source")
        if len(names) < 2:
            raise ConfigError("request.sources", "an aggregation needs more than one source")
        dids = {name: world.actor(name).did for name in names}
        try:
            psi = TransformSpec.from_dict(_opt(req, "psi", "request", dict, {}), dids)
        except (InvalidSpecification, KeyError, TypeError) as exc:
            raise ConfigError("request.psi", str(exc)) from exc
        nonce = _opt(req, "nonce", "request", int, None)
        return AggregationRequest(world.actor(consumer).did, tuple(dids.values()), psi, nonce)

    def adversaries(self, world: World, extra: Sequence[AdversaryScript]) -> list[AdversaryScript]:
        scripts = []
        for i, raw in enumerate(_opt(self.cfg, "adversaries", "", list, [])):
            path = f"adversaries[{i}]"
            if _need(raw, "action", path, str) not in ACTIONS:
                raise ConfigError(f"{path}.action", f"unknown action {raw['action']!r}")
            if _need(raw, "actor", path, str) not in world.actors:
                raise ConfigError(f"{path}.actor", f"unknown actor {raw['actor']!r}")
            scripts.append(AdversaryScript.from_dict(raw))
        for script in extra:
            if script.actor not in world.actors:
                raise ConfigError("adversaries", f"unknown actor {script.actor!r}")
        return scripts + list(extra)


def run_scenario(
    config: str | Path | Mapping[str, Any],
    seed: int = 0,
    mode: str | None = None,
    strict: bool | None = None,
    extra_scripts: Sequence[AdversaryScript] = (),
) -> ScenarioOutcome:
    """Build the world, run initialization, persistence and acquisition, then check ``expect``."""
    cfg = load_config(config)
    expect = _expectations(cfg)
    builder = _Builder(cfg, seed, mode, strict)
    world = builder.world()
    envelopes = builder.populate(world)
    outcome = ScenarioOutcome(builder.name, seed, world)

    init, persist, acquire = builder.phases
    world.set_phase(init)
    for actor in world.actors.values():
        result = world.propagate(actor)
        if not result.finalized:
            raise LedgerRejection(f"propagation of {actor.name} was not finalized", result)

    world.set_phase(persist)
    encrypt_at_rest = _opt(builder.storage, "encrypt_at_rest", "storage", bool, True)
    for name, envelope in envelopes.items():
        source = world.actor(name)
        data = envelope.to_bytes()
        endorse_data(world, source, world.by_did(source.authority), data)
        world.persist(source, data, encrypt_at_rest=encrypt_at_rest)

    request = builder.request(world)
    for script in builder.adversaries(world, extra_scripts):
        world.attach(script)

    world.set_phase(acquire)
    outcome.ledger_before_acquisition = len(world.ledger)
    modes = ("onchain", "offchain") if builder.mode == "both" else (builder.mode,)
    for run_mode in modes:
        try:
            outcome.results[run_mode] = run_protocol(world, request, Mode(run_mode), builder.strict)
        except ProtocolError as exc:
            outcome.errors[run_mode] = f"{type(exc).__name__}: {exc}"
            if exc.result is not None:
                outcome.results[run_mode] = exc.result
    _check(outcome, expect, modes)
    return outcome


def inject_fault(
    config: str | Path | Mapping[str, Any], script: AdversaryScript, seed: int = 0, mode: str | None = None
) -> ScenarioOutcome:
    """Re-run ``config`` with ``script`` attached; the outcome is the observation."""
    return run_scenario(config, seed, mode=mode, extra_scripts=[script])


_EXPECT_MODES = {"onchain", "offchain", "all"}
_EXPECT_KEYS = {"verified", "reasons", "output_sha256", "ledger_growth"}


def _expectations(cfg: Mapping[str, Any]) -> dict[str, Any]:
    expect = _opt(cfg, "expect", "", dict, {})
    for run_mode, spec in expect.items():
        if run_mode not in _EXPECT_MODES:
            raise ConfigError(f"expect.{run_mode}", f"unknown mode, expected one of {sorted(_EXPECT_MODES)}")
        if not isinstance(spec, dict):
            raise ConfigError(f"expect.{run_mode}", "expected an object")
        for key in spec:
            if key not in _EXPECT_KEYS:
                raise ConfigError(f"expect.{run_mode}.{key}", f"unknown key, expected one of {sorted(_EXPECT_KEYS)}")
    return expect


def _check(outcome: ScenarioOutcome, expect: Mapping[str, Any], modes: Sequence[str]) -> None:
    world = outcome.world
    for run_mode in modes:
        spec = expect.get(run_mode, expect.get("all"))
        if spec is None:
            if run_mode in outcome.errors:
                outcome.failures.append(f"{run_mode}: {outcome.errors[run_mode]}")
            continue
        result = outcome.results.get(run_mode)
        if result is None:
            outcome.failures.append(f"{run_mode}: run did not start ({outcome.errors.get(run_mode)})")
            continue
        states = {world.by_did(did).name: state for did, state in result.run.sources.items()}
        if "verified" in spec:
            got = sorted(n for n, s in states.items() if s.status.value == "verified")
            if got != sorted(spec["verified"]):
                outcome.failures.append(f"{run_mode}: verified {got}, expected {sorted(spec['verified'])}")
        for name, reason in (spec.get("reasons") or {}).items():
            state = states.get(name)
            if state is None or reason not in state.reasons:
                got = list(state.reasons) if state else None
                outcome.failures.append(f"{run_mode}: {name} reasons {got}, expected {reason}")
        if "output_sha256" in spec:
            data = result.output_bytes
            digest = world.provider.hash(data).hex() if data is not None else None
            if digest != spec["output_sha256"]:
                outcome.failures.append(f"{run_mode}: output digest {digest}, expected {spec['output_sha256']}")
        if "ledger_growth" in spec and result.ledger_growth != spec["ledger_growth"]:
            outcome.failures.append(f"{run_mode}: ledger grew by {result.ledger_growth}, expected {spec['ledger_growth']}")
    for script in world.actors.values():
        for adv in script.scripts:
            if adv.expect is None:
                continue
            for run_mode in modes:
                if run_mode not in outcome.results:
                    continue
                state = outcome.results[run_mode].run.sources.get(script.did)
                if state is None:
                    continue
                wanted = adv.expect.get(run_mode) if isinstance(adv.expect, Mapping) else adv.expect
                if wanted is None:
                    continue
                allowed = wanted.split("|")
                if not any(code in state.reasons for code in allowed):
                    outcome.failures.append(
                        f"{run_mode}: {adv.action} on {script.name} gave {list(state.reasons)}, expected {adv.expect}"
                    )
