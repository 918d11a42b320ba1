from __future__ import annotations

import json
import random

import pytest

from ssiagg.cli import main

from oracles import random_scenario


@pytest.fixture
def ran(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "onchain-basic", "--out", str(out)]) == 0
    return out


@pytest.mark.parametrize("name", ["onchain-basic", "neuroscience", "adversary-suite"])
def test_bundled_scenarios_pass(tmp_path, name, capsys):
    assert main(["run", name, "--out", str(tmp_path), "--pretty"]) == 0
    assert {"report.json", "trace.jsonl", "output.json"} <= {p.name for p in tmp_path.iterdir()}
    assert json.loads((tmp_path / "report.json").read_text())["ok"] is True
    assert capsys.readouterr().out.strip()


def test_config_error_exit(tmp_path, capsys):
    bad = random_scenario(random.Random(0), 0)
    bad["sources"][0]["authority"] = "nobody"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "sources[0].authority" in capsys.readouterr().err


def test_assertion_failure_exit(tmp_path, capsys):
    cfg = random_scenario(random.Random(0), 0)
    cfg["expect"] = {"onchain": {"ledger_growth": 999}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "ASSERTION FAILED" in capsys.readouterr().err


def test_unknown_expect_key(tmp_path, capsys):
    cfg = random_scenario(random.Random(0), 0)
    cfg["expect"] = {"ledger_growth": {"onchain": 999}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "expect.ledger_growth" in capsys.readouterr().err


def test_strict_suite_fails(tmp_path):
    assert main(["run", "adversary-suite", "--strict-termination", "--out", str(tmp_path)]) == 1


def test_output_written(ran):
    outputs = json.loads((ran / "output.json").read_text())
    assert outputs["onchain"]["payload"]


class TestInspect:
    def lines(self, capsys, *args):
        capsys.readouterr()
        code = main(["inspect", *args])
        return code, [line for line in capsys.readouterr().out.splitlines() if line]

    @pytest.mark.parametrize("alias", ["tau_e", "τ_e", "tx_e", "endorsement"])
    def test_endorsement_alias(self, ran, capsys, alias):
        code, lines = self.lines(capsys, str(ran / "trace.jsonl"), "--kind", alias)
        report = json.loads((ran / "report.json").read_text())
        approved = len(report["runs"]["onchain"]["sources"])
        assert code == 0 and len(lines) == approved

    def test_plaintext_carries_no_records(self, ran, capsys):
        _, lines = self.lines(capsys, str(ran / "trace.jsonl"), "--payload-class", "plaintext-metadata")
        assert lines and not any("Lovelace" in line for line in lines)

    def test_step_filter(self, ran, capsys):
        _, lines = self.lines(capsys, str(ran / "trace.jsonl"), "--step", "2")
        assert lines and all("step= 2" in line for line in lines)

    def test_unknown_kind(self, ran, capsys):
        code, _ = self.lines(capsys, str(ran / "trace.jsonl"), "--kind", "bogus")
        assert code == 2

    def test_empty_trace(self, tmp_path, capsys):
        (tmp_path / "t.jsonl").write_text("")
        assert self.lines(capsys, str(tmp_path / "t.jsonl")) == (0, [])

    def test_unreadable_trace(self, tmp_path, capsys):
        (tmp_path / "t.jsonl").write_text("{not json\n")
        assert self.lines(capsys, str(tmp_path / "t.jsonl"))[0] == 2
        assert self.lines(capsys, str(tmp_path / "missing.jsonl"))[0] == 2
