from __future__ import annotations

import copy
import random

import pytest

from ssiagg.aggregator import (
    AllSourcesRejected,
    AggregationRequest,
    EndorsementRejected,
    FieldMapping,
    InvalidRequest,
    TransformSpec,
    VerificationFailure,
    endorse_data,
    run_protocol,
)
from ssiagg.aggregator.protocol import AUTHORITY_REJECTED, TERMINATED, Status
from ssiagg.ledger import TxKind
from ssiagg.netsim import AdversaryScript, World
from ssiagg.netsim.scenario import inject_fault, run_scenario
from ssiagg.storage import DataSpecification, make_envelope

from conftest import PERSON
from oracles import random_scenario, scenario_oracle


def ledger_kinds(world, start=0):
    return [tx.kind for tx in world.ledger.snapshot()[start:]]


@pytest.fixture
def config():
    return random_scenario(random.Random(3), 0)


def prepared(world: World, threaded=False):
    """Endorse and persist one record per source of the shared fixture world."""
    world.threaded = threaded
    authority = world.actor("authority")
    for name in ("s1", "s2"):
        data = make_envelope([{"firstName": name, "lastName": "X", "age": 1}], PERSON).to_bytes()
        source = world.actor(name)
        endorse_data(world, source, authority, data)
        world.persist(source, data)
    consumer = world.actor("consumer")
    return AggregationRequest(consumer.did, (world.actor("s1").did, world.actor("s2").did), TransformSpec(), 42)


class TestHonest:
    @pytest.mark.parametrize("mode", ["onchain", "offchain"])
    def test_output_matches_oracle(self, config, mode):
        outcome = run_scenario(config, seed=5, mode=mode)
        assert outcome.ok and not outcome.errors
        assert outcome.output(mode) == scenario_oracle(config)

    def test_modes_agree(self, config):
        outcome = run_scenario(config, seed=1)
        assert outcome.output("onchain") == outcome.output("offchain")

    def test_ledger_growth(self, config):
        outcome = run_scenario(config, seed=2)
        n = len(config["sources"])
        assert outcome.results["onchain"].ledger_growth == 1 + 2 * n
        assert outcome.results["offchain"].ledger_growth == 0
        kinds = ledger_kinds(outcome.world, outcome.ledger_before_acquisition)
        assert kinds.count(TxKind.COLLECTION) == 1
        assert kinds.count(TxKind.ENDORSEMENT) == n and kinds.count(TxKind.STORAGE) == n

    @pytest.mark.parametrize("mode", ["onchain", "offchain"])
    def test_threaded(self, world, mode):
        request = prepared(world, threaded=True)
        result = run_protocol(world, request, mode)
        assert [r["firstName"] for r in result.output.payload] == ["s1", "s2"]

    def test_all_sources_verified(self, world):
        result = run_protocol(world, prepared(world), "offchain")
        assert all(s.status is Status.VERIFIED for s in result.run.sources.values())

    def test_transform_applied(self, world):
        request = prepared(world)
        renamed = {"given": "string", "lastName": "string", "age": "number"}
        psi = TransformSpec(FieldMapping(rename={"firstName": "given"}), output_spec=DataSpecification(renamed))
        result = run_protocol(world, AggregationRequest(request.consumer, request.sources, psi), "onchain")
        assert [r["given"] for r in result.output.payload] == ["s1", "s2"]


class TestRequestValidation:
    def test_single_source(self, world):
        request = prepared(world)
        with pytest.raises(InvalidRequest):
            run_protocol(world, AggregationRequest(request.consumer, request.sources[:1], TransformSpec()), "onchain")

    def test_duplicate_source(self, world):
        request = prepared(world)
        dup = (request.sources[0], request.sources[0])
        with pytest.raises(InvalidRequest):
            run_protocol(world, AggregationRequest(request.consumer, dup, TransformSpec()), "offchain")

    def test_unendorsed_source(self, world):
        s1, s2 = world.actor("s1"), world.actor("s2")
        with pytest.raises(InvalidRequest):
            run_protocol(world, AggregationRequest(world.actor("consumer").did, (s1.did, s2.did), TransformSpec()), "onchain")


class TestEndorsement:
    def test_approved_binds_claim(self, world):
        source = world.actor("s1")
        record = endorse_data(world, source, world.actor("authority"), b"data")
        assert source.did in world.actor("authority").endorsed
        assert record.vc.credential_subject.id == source.did

    def test_rejected(self, world):
        authority = world.actor("authority")
        authority.reject_sources.add(world.actor("s1").did)
        with pytest.raises(EndorsementRejected):
            endorse_data(world, world.actor("s1"), authority, b"data")


class TestExclusion:
    def deny_first(self, config):
        cfg = copy.deepcopy(config)
        first = cfg["sources"][0]
        auth = next(a for a in cfg["authorities"] if a["name"] == first["authority"])
        auth["deny_access"] = [first["name"]]
        return cfg, first["name"]

    def test_authority_denial_no_endorsement_tx(self, config):
        cfg, name = self.deny_first(config)
        outcome = run_scenario(cfg, seed=0, mode="onchain")
        assert outcome.status("onchain", name) == ("rejected", AUTHORITY_REJECTED)
        kinds = ledger_kinds(outcome.world, outcome.ledger_before_acquisition)
        assert kinds.count(TxKind.ENDORSEMENT) == len(cfg["sources"]) - 1

    def test_others_unaffected(self, config):
        cfg, name = self.deny_first(config)
        outcome = run_scenario(cfg, seed=0, mode="offchain")
        for s in cfg["sources"][1:]:
            assert outcome.status("offchain", s["name"])[0] == "verified"
        rest = copy.deepcopy(cfg)
        rest["request"]["sources"] = rest["request"]["sources"][1:]
        assert outcome.output("offchain") == scenario_oracle(rest)

    def test_strict_termination(self, config):
        cfg, name = self.deny_first(config)
        outcome = run_scenario(cfg, seed=0, mode="onchain", strict=True)
        assert "VerificationFailure" in outcome.errors["onchain"]
        run = outcome.results["onchain"].run
        assert run.terminated and outcome.output("onchain") is None
        reasons = {s.reason for did, s in run.sources.items() if did != outcome.world.actor(name).did}
        assert reasons <= {TERMINATED, None}

    def test_all_rejected(self, world):
        request = prepared(world)
        world.actor("authority").deny_access.update(request.sources)
        with pytest.raises(AllSourcesRejected) as info:
            run_protocol(world, request, "onchain")
        assert info.value.result.output is None

    def test_strict_raises_verification_failure(self, world):
        request = prepared(world)
        world.actor("authority").deny_access.add(request.sources[0])
        with pytest.raises(VerificationFailure):
            run_protocol(world, request, "offchain", strict=True)


class TestFaults:
    @pytest.mark.parametrize(
        "action,expected",
        [
            ("tamper-vc", {"onchain": "OWN_PROOF_INVALID", "offchain": "OWN_PROOF_INVALID"}),
            ("forge-claim", {"onchain": "OWN_CLAIM_MISMATCH", "offchain": "OWN_CLAIM_MISMATCH"}),
            ("impersonate-did", {"onchain": "AUTH_FAIL", "offchain": "AUTH_FAIL"}),
            ("skip-authorization", {"onchain": "APPROVAL_FAIL", "offchain": "APPROVAL_FAIL"}),
            ("corrupt-partition", {"onchain": "SOURCE_DATA_UNAVAILABLE", "offchain": "SOURCE_DATA_UNAVAILABLE"}),
            ("drop-message", {"onchain": "STAGING_UNREACHABLE", "offchain": "PORT_CLOSED"}),
            ("replay-omega", {"offchain": "NONCE_MISMATCH"}),
        ],
    )
    def test_fault_excludes_only_faulty_source(self, config, action, expected):
        name = config["sources"][0]["name"]
        outcome = inject_fault(config, AdversaryScript(name, action, expect=expected))
        assert outcome.ok, outcome.failures
        for mode in ("onchain", "offchain"):
            for s in config["sources"][1:]:
                assert outcome.status(mode, s["name"])[0] == "verified"

    def test_replay_omega_no_onchain_effect(self, config):
        name = config["sources"][0]["name"]
        outcome = inject_fault(config, AdversaryScript(name, "replay-omega"), mode="onchain")
        assert outcome.output("onchain") == scenario_oracle(config)
