from __future__ import annotations

import json
import time

import httpx
import pytest

from vizguide.replay import (
    TaskTrace,
    TraceRunner,
    TraceStep,
    TransportError,
    load_trace,
    load_trace_dir,
    trace_from_dict,
    trace_from_session_log,
)
from vizguide.sample import trace_dir


class TestTraceLoading:
    def test_bundled_suite_is_taxonomy_balanced(self):
        traces = load_trace_dir(trace_dir())
        assert len(traces) == 10
        cells = {(t.task_type, t.difficulty) for t in traces}
        # the full 3x3 grid is covered (one cell twice makes ten)
        assert cells == {
            (task, level)
            for task in ("lookup", "exploratory", "interpretive")
            for level in ("easy", "medium", "hard")
        }

    def test_rejects_bad_taxonomy(self):
        with pytest.raises(ValueError, match="taskType"):
            trace_from_dict({"name": "x", "taskType": "guess", "difficulty": "easy", "steps": [{"action": "chat"}]})

    def test_rejects_empty_steps(self):
        with pytest.raises(ValueError, match="at least one"):
            trace_from_dict({"name": "x", "taskType": "lookup", "difficulty": "easy", "steps": []})

    def test_rejects_unknown_action(self):
        with pytest.raises(ValueError, match="unknown action"):
            trace_from_dict(
                {"name": "x", "taskType": "lookup", "difficulty": "easy", "steps": [{"action": "shout"}]}
            )


class TestRunTrace:
    def test_bundled_suite_passes_end_to_end(self, client):
        traces = load_trace_dir(trace_dir())
        runner = TraceRunner(client, "sales-pipeline")
        started = time.monotonic()
        reports = runner.run_all(traces)
        elapsed = time.monotonic() - started
        failures = [
            (r.trace.name, s.index, s.diffs) for r in reports for s in r.steps if not s.passed
        ]
        assert failures == []
        assert elapsed < 5.0

    def test_failing_expectation_pinpoints_step_and_field(self, client):
        trace = trace_from_dict(
            {
                "name": "doomed",
                "taskType": "lookup",
                "difficulty": "easy",
                "steps": [
                    {"action": "hover", "x": 100, "y": 60, "expect": {"regionIs": "legend"}},
                    {
                        "action": "chat",
                        "text": "How do I read the KPI cards?",
                        "expect": {"outcome": "notInData"},
                    },
                ],
            }
        )
        report = TraceRunner(client, "sales-pipeline").run(trace)
        assert not report.passed
        assert not report.steps[0].passed
        assert "region: expected 'legend'" in report.steps[0].diffs[0]
        assert not report.steps[1].passed
        assert "outcome: expected 'notInData'" in report.steps[1].diffs[0]
        payload = report.to_dict()
        assert payload["steps"][0]["index"] == 0

    def test_voice_steps_exercise_token_mint_redeem(self, client):
        trace = load_trace(trace_dir() / "07-exploratory-medium-date-filter.json")
        report = TraceRunner(client, "sales-pipeline").run(trace)
        assert report.passed

    def test_dead_endpoint_raises_transport_error(self):
        dead = httpx.Client(base_url="http://127.0.0.1:9", timeout=0.2)
        runner = TraceRunner(dead, "sales-pipeline")
        with pytest.raises(TransportError):
            runner.run(
                TaskTrace(
                    name="x",
                    task_type="lookup",
                    difficulty="easy",
                    steps=(TraceStep(action="chat", payload={"text": "hi"}),),
                )
            )


class TestSessionLogReplay:
    def test_exported_log_replays_with_identical_outcomes(self, client):
        session_id = client.post("/sessions", json={"dashboardId": "sales-pipeline"}).json()["sessionId"]
        # a multimodal conversation: lasso context, voice, chat, menu open
        bar = next(
            v
            for v in client.get("/dashboards/sales-pipeline").json()["dashboard"]["visuals"]
            if v["id"] == "bar-01"
        )
        strip = bar["regions"]["axisY"]
        points = [
            [strip["x"] + 1, strip["y"] + 1],
            [strip["x"] + strip["w"] - 1, strip["y"] + 1],
            [strip["x"] + strip["w"] - 1, strip["y"] + strip["h"] - 1],
            [strip["x"] + 1, strip["y"] + strip["h"] - 1],
        ]
        client.post(f"/sessions/{session_id}/lasso", json={"points": points})
        client.post(f"/sessions/{session_id}/turns", json={"modality": "voiceTranscript", "text": "what is the y-axis?"})
        client.post(f"/sessions/{session_id}/menu-open", json={"visualId": "bar-01", "region": "dataArea"})
        client.post(
            f"/sessions/{session_id}/turns",
            json={"modality": "chat", "text": "What is the exact revenue value for Australia?"},
        )
        log_text = client.get(f"/sessions/{session_id}/log").text
        original_turns = [json.loads(line) for line in log_text.splitlines()]

        trace = trace_from_session_log(log_text)
        report = TraceRunner(client, "sales-pipeline").run(trace)
        assert report.passed, [s.diffs for s in report.steps if not s.passed]

        # the replayed session's log matches the original turn for turn
        # (session ids differ; content, anchors, outcomes must not)
        assert len(trace.steps) == sum(1 for t in original_turns if t["role"] == "user")
