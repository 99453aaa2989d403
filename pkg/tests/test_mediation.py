from __future__ import annotations

import copy
import json

import pytest

from conftest import SCENARIO_DIR
from mobihost import Query
from mobihost.cli import main
from mobihost.context import ClientContext, ContextProfile
from mobihost.errors import ConfigInvalid, MalformedDocument, PublisherUnreachable, RankOutOfRange
from mobihost.mediation import Simulation, restore_caches, run_scenario, select_and_invoke, snapshot_caches
from mobihost.scenario import load_scenario

MINIMAL = json.loads((SCENARIO_DIR / "minimal.json").read_text())


def minimal(**changes) -> dict:
    doc = copy.deepcopy(MINIMAL)
    doc.update(changes)
    return doc


class TestRunScenario:
    def test_minimal_end_to_end(self):
        res = run_scenario(minimal())
        (trace,) = res.traces
        kw, ams, final = trace.stage_counts
        assert kw >= 1 and final >= 1
        assert trace.final[0].degree.label == "Exact"
        assert res.invocations[0]["status"] == "ok"
        assert res.metrics["publishes"] == 3

    def test_seed_only_feeds_churn(self):
        a = run_scenario(minimal(seed=1))
        b = run_scenario(minimal(seed=999))
        assert a.trace_lines() == b.trace_lines()

    def test_query_after_expiry_without_republish(self):
        doc = minimal(ticks=200)
        doc["params"] = {**doc["params"], "republish_period": None}
        doc["queries"][0]["tick"] = 150
        doc["invocations"] = []
        (trace,) = run_scenario(doc).traces
        assert trace.stage_counts == (0, 0, 0)

    def test_latency_bound(self):
        for path in sorted(SCENARIO_DIR.glob("*.json")):
            for t in run_scenario(path).traces:
                assert t.latency_ticks <= 2 * t.hop_budget

    def test_offline_origin_records_error(self):
        doc = minimal()
        doc["events"] = [{"tick": 2, "event": "leave", "peer": "phone-b"}]
        (trace,) = run_scenario(doc).traces
        assert trace.error == "OriginOffline" and trace.stage_counts == (0, 0, 0)


class TestConfigInvalid:
    @pytest.mark.parametrize(
        "mutate,path",
        [
            (lambda d: d["services"][0].update(host="nobody"), "services[0].host"),
            (lambda d: d["queries"][0].update(origin="ghost"), "queries[0].origin"),
            (lambda d: d["params"].update(republish_period=0), "params.republish_period"),
            (lambda d: d.pop("topology"), "topology"),
            (lambda d: d["services"][0].update(groups=["no.such"]), "services[0].groups"),
            (lambda d: d["services"][0]["wsdl"]["operations"][0].update(outputs=["snow"]), "services[0].wsdl"),
        ],
    )
    def test_paths(self, mutate, path):
        doc = minimal()
        mutate(doc)
        with pytest.raises(ConfigInvalid) as info:
            load_scenario(doc)
        assert info.value.path.startswith(path)
        assert info.value.to_record()["path"] == info.value.path

    def test_not_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigInvalid):
            load_scenario(bad)


class TestInvoke:
    @pytest.fixture
    def sim(self):
        doc = minimal()
        doc["queries"], doc["invocations"] = [], []
        s = Simulation(load_scenario(doc))
        s.run_until(5)
        s.housekeeping()
        return s

    def trace(self, sim):
        client = ClientContext(ContextProfile())
        return sim.execute_query("phone-b", Query("q", ["weather"]), client)

    def test_round_trip(self, sim):
        t = self.trace(sim)
        ack = select_and_invoke(t, 1, sim.overlay)
        # phone-b -> BTS-1 -> phone-a and back
        assert ack.round_trip_ticks == 4
        assert ack.package_ref is not None and ack.package_ref.endswith("/midp/1.0")

    def test_rank_out_of_range(self, sim):
        t = self.trace(sim)
        with pytest.raises(RankOutOfRange):
            select_and_invoke(t, 5, sim.overlay)
        with pytest.raises(RankOutOfRange):
            select_and_invoke(t, 0, sim.overlay)

    def test_publisher_departed(self, sim):
        t = self.trace(sim)
        sim.overlay.set_online("phone-a", False)
        with pytest.raises(PublisherUnreachable):
            select_and_invoke(t, 1, sim.overlay)


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        res = run_scenario(SCENARIO_DIR / "city.json")
        path = snapshot_caches(res.overlay, tmp_path / "snap.jsonl")
        caches = restore_caches(path)
        assert len(caches) == len(res.overlay.peers)
        again = snapshot_caches(res.overlay, tmp_path / "again.jsonl")
        assert path.read_bytes() == again.read_bytes()
        restore_caches(path, res.overlay)
        assert snapshot_caches(res.overlay, tmp_path / "third.jsonl").read_bytes() == path.read_bytes()

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.jsonl"
        p.write_bytes(b"")
        assert restore_caches(p) == {}

    def test_corrupted_line(self, tmp_path):
        res = run_scenario(minimal())
        lines = res.snapshot().decode().splitlines()
        assert len(lines) >= 3
        lines[2] = lines[2][:-5]
        p = tmp_path / "bad.jsonl"
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(MalformedDocument, match="line 3"):
            restore_caches(p)


class TestCli:
    def test_validate(self, capsys):
        assert main(["validate", str(SCENARIO_DIR / "minimal.json")]) == 0
        assert json.loads(capsys.readouterr().out)["ok"] is True

    def test_validate_error_record(self, tmp_path, capsys):
        doc = minimal()
        doc["services"][0]["host"] = "nobody"
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(doc))
        assert main(["validate", str(p)]) == 2
        rec = json.loads(capsys.readouterr().out)
        assert rec["error"] == "ConfigInvalid" and rec["path"].startswith("services[0]")

    def test_run_writes_outputs(self, tmp_path):
        assert main(["run", str(SCENARIO_DIR / "minimal.json"), "--out", str(tmp_path)]) == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"events.jsonl", "traces.jsonl", "final.jsonl", "metrics.json", "snapshot.jsonl"} <= names
        final = [json.loads(l) for l in (tmp_path / "final.jsonl").read_text().splitlines()]
        assert set(final[0]) == {"query_id", "rank", "class_id", "degree", "score"}

    def test_query(self, tmp_path, capsys):
        ctx = tmp_path / "ctx.json"
        ctx.write_text(json.dumps({"client": {"location": [0, 0]}, "requested": {"inputs": ["location"], "outputs": ["weather"]}}))
        rc = main(["query", str(SCENARIO_DIR / "minimal.json"), "--at-tick", "5", "--origin", "phone-b",
                   "--keywords", "weather", "--context", str(ctx)])
        assert rc == 0
        lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert lines[0]["degree"] == "Subsume"  # forecast specializes weather
        assert lines[-1]["trace"]["stage_counts"]["final_size"] == 1

    def test_snapshot_and_restore(self, tmp_path, capsys):
        snap = tmp_path / "s.jsonl"
        assert main(["snapshot", str(SCENARIO_DIR / "minimal.json"), "--at-tick", "3", "--out", str(snap)]) == 0
        assert main(["restore", str(snap), "--check"]) == 0
        out = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert sum(r["entries"] for r in out) == 6  # 3 ads on the host and 3 on its rendezvous

    def test_restore_malformed(self, tmp_path, capsys):
        p = tmp_path / "bad.jsonl"
        p.write_text("not json\n")
        assert main(["restore", str(p)]) == 1
        assert json.loads(capsys.readouterr().out)["error"] == "MalformedDocument"
