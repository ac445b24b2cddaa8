"""Replay scripted multimodal interaction traces against a running service.

Traces are human-editable JSON files: a named task (typed and graded per
the lookup/exploratory/interpretive x easy/medium/hard taxonomy) plus an
ordered list of steps. Each step performs one interaction over HTTP and
checks its expectations against observable response fields only, so the
suite doubles as executable documentation of the supported flows.

Connection-level failures raise TransportError and are reported apart
from assertion failures: a dead server is not a failing expectation.
"""

from __future__ import annotations

import argparse
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .errors import VizguideError


class TransportError(VizguideError):
    """The harness could not talk to the service at all."""


TRACE_ACTIONS = ("lasso", "chat", "voice", "menuOpen", "hover", "attachContext")
TASK_TYPES = ("lookup", "exploratory", "interpretive")
DIFFICULTIES = ("easy", "medium", "hard")


@dataclass(frozen=True)
class TraceStep:
    action: str
    payload: dict = field(default_factory=dict)
    expect: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TaskTrace:
    name: str
    task_type: str
    difficulty: str
    steps: tuple[TraceStep, ...]


@dataclass
class StepResult:
    index: int
    action: str
    passed: bool
    diffs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"index": self.index, "action": self.action, "passed": self.passed, "diffs": self.diffs}


@dataclass
class TraceReport:
    trace: TaskTrace
    steps: list[StepResult]

    @property
    def passed(self) -> bool:
        return all(step.passed for step in self.steps)

    def to_dict(self) -> dict:
        return {
            "trace": self.trace.name,
            "taskType": self.trace.task_type,
            "difficulty": self.trace.difficulty,
            "passed": self.passed,
            "steps": [s.to_dict() for s in self.steps],
        }


def load_trace(path: Path | str) -> TaskTrace:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return trace_from_dict(data)


def trace_from_dict(data: dict) -> TaskTrace:
    if data.get("taskType") not in TASK_TYPES:
        raise ValueError(f"taskType must be one of {TASK_TYPES}")
    if data.get("difficulty") not in DIFFICULTIES:
        raise ValueError(f"difficulty must be one of {DIFFICULTIES}")
    steps = tuple(
        TraceStep(
            action=raw["action"],
            payload={k: v for k, v in raw.items() if k not in ("action", "expect")},
            expect=raw.get("expect", {}),
        )
        for raw in data["steps"]
    )
    if not steps:
        raise ValueError("trace needs at least one step")
    for step in steps:
        if step.action not in TRACE_ACTIONS:
            raise ValueError(f"unknown action {step.action!r}")
    return TaskTrace(
        name=data["name"], task_type=data["taskType"], difficulty=data["difficulty"], steps=steps
    )


def load_trace_dir(directory: Path | str) -> list[TaskTrace]:
    paths = sorted(Path(directory).glob("*.json"))
    if not paths:
        raise ValueError(f"no trace files under {directory}")
    return [load_trace(p) for p in paths]


class TraceRunner:
    """Executes traces against a service endpoint, one session per trace.

    `client` is anything with httpx's request API (httpx.Client or a
    FastAPI TestClient), already pointed at the service base URL.
    """

    def __init__(self, client: httpx.Client, dashboard_id: str) -> None:
        self._client = client
        self._dashboard_id = dashboard_id

    def run(self, trace: TaskTrace) -> TraceReport:
        session_id = self._create_session()
        results: list[StepResult] = []
        for index, step in enumerate(trace.steps):
            results.append(self._run_step(session_id, index, step))
        return TraceReport(trace=trace, steps=results)

    def run_all(self, traces: list[TaskTrace]) -> list[TraceReport]:
        return [self.run(trace) for trace in traces]

    # -- internals -----------------------------------------------------------

    def _request(self, method: str, url: str, **kwargs) -> httpx.Response:
        try:
            return self._client.request(method, url, **kwargs)
        except httpx.TransportError as exc:
            raise TransportError(f"{method} {url}: {exc}") from exc

    def _create_session(self) -> str:
        response = self._request("POST", "/sessions", json={"dashboardId": self._dashboard_id})
        if response.status_code != 201:
            raise TransportError(f"could not create session: {response.status_code} {response.text}")
        return response.json()["sessionId"]

    def _run_step(self, session_id: str, index: int, step: TraceStep) -> StepResult:
        result = StepResult(index=index, action=step.action, passed=True)

        def fail(diff: str) -> None:
            result.passed = False
            result.diffs.append(diff)

        response = self._perform(session_id, step)
        if response.status_code // 100 != 2:
            fail(f"unexpected status {response.status_code}: {response.text[:200]}")
            return result
        body = response.json() if response.headers.get("content-type", "").startswith("application/json") else {}

        expect = step.expect
        if "outcome" in expect:
            actual = body.get("outcome")
            if actual != expect["outcome"]:
                fail(f"outcome: expected {expect['outcome']!r}, got {actual!r}")
        if "anchorsInclude" in expect:
            actual_anchors = body.get("anchors", [])
            for anchor in expect["anchorsInclude"]:
                if anchor not in actual_anchors:
                    fail(f"anchors: expected to include {anchor!r}, got {actual_anchors!r}")
        if "regionIs" in expect:
            actual_region = (body.get("hit") or {}).get("region")
            if actual_region != expect["regionIs"]:
                fail(f"region: expected {expect['regionIs']!r}, got {actual_region!r}")
        if "visualIs" in expect:
            actual_visual = (body.get("hit") or {}).get("visualId")
            if actual_visual != expect["visualIs"]:
                fail(f"visual: expected {expect['visualIs']!r}, got {actual_visual!r}")
        if "menuOpenedAt" in expect:
            actual_opened = (body.get("menu") or {}).get("openedAt")
            if actual_opened != expect["menuOpenedAt"]:
                fail(f"menu openedAt: expected {expect['menuOpenedAt']!r}, got {actual_opened!r}")
        if "menuCategories" in expect:
            actual_categories = (body.get("menu") or {}).get("categories")
            if actual_categories != expect["menuCategories"]:
                fail(f"menu categories: expected {expect['menuCategories']!r}, got {actual_categories!r}")
        return result

    def _perform(self, session_id: str, step: TraceStep) -> httpx.Response:
        payload = step.payload
        if step.action == "lasso":
            return self._request("POST", f"/sessions/{session_id}/lasso", json={"points": payload["points"]})
        if step.action == "hover":
            return self._request(
                "POST", f"/sessions/{session_id}/hover", json={"x": payload["x"], "y": payload["y"]}
            )
        if step.action == "chat":
            return self._request(
                "POST",
                f"/sessions/{session_id}/turns",
                json={"modality": "chat", "text": payload["text"]},
            )
        if step.action == "voice":
            # full voice pathway: mint an ephemeral token, redeem it, then
            # submit the transcript as a voice turn
            mint = self._request("POST", f"/sessions/{session_id}/voice-token")
            if mint.status_code != 201:
                return mint
            redeem = self._request(
                "POST", "/voice-token/redeem", json={"token": mint.json()["token"]}
            )
            if redeem.status_code // 100 != 2:
                return redeem
            return self._request(
                "POST",
                f"/sessions/{redeem.json()['sessionId']}/turns",
                json={"modality": "voiceTranscript", "text": payload["text"]},
            )
        if step.action == "menuOpen":
            record = {"visualId": payload["visualId"]}
            if payload.get("region"):
                record["region"] = payload["region"]
            recorded = self._request("POST", f"/sessions/{session_id}/menu-open", json=record)
            if recorded.status_code // 100 != 2:
                return recorded
            region_query = f"?region={payload['region']}" if payload.get("region") else ""
            return self._request(
                "GET",
                f"/dashboards/{self._dashboard_id}/visuals/{payload['visualId']}/menu{region_query}",
            )
        if step.action == "attachContext":
            return self._request(
                "POST", f"/sessions/{session_id}/context", json={"hit": payload["hit"]}
            )
        raise ValueError(f"unknown action {step.action!r}")


# ---------------------------------------------------------------------------
# Session-log replay
# ---------------------------------------------------------------------------

_MENU_NOTE_RE = re.compile(r"opened help menu on (\S+)(?: at (\S+))?")


def trace_from_session_log(log_text: str, name: str = "replayed-session") -> TaskTrace:
    """Convert an exported session log into a runnable trace.

    User turns become steps; each recorded assistant turn becomes the
    expectation of the user turn before it, so a drifting orchestrator or
    provider shows up as a step diff. Lasso attachments replay through the
    exact recorded region hit (action attachContext).
    """
    steps: list[TraceStep] = []
    turns = [json.loads(line) for line in log_text.splitlines() if line.strip()]
    i = 0
    while i < len(turns):
        turn = turns[i]
        if turn["role"] == "user" and turn["modality"] in ("chat", "voiceTranscript"):
            expect: dict = {}
            if i + 1 < len(turns) and turns[i + 1]["role"] == "assistant":
                expect = {
                    "outcome": turns[i + 1]["outcome"],
                    "anchorsInclude": turns[i + 1].get("anchors", []),
                }
            action = "chat" if turn["modality"] == "chat" else "voice"
            steps.append(TraceStep(action=action, payload={"text": turn["content"]}, expect=expect))
        elif turn["role"] == "user" and turn["modality"] == "lassoAttach":
            steps.append(TraceStep(action="attachContext", payload={"hit": json.loads(turn["content"])}))
        elif turn["role"] == "user" and turn["modality"] == "menuOpen":
            match = _MENU_NOTE_RE.search(turn["content"])
            if match:
                payload = {"visualId": match.group(1)}
                if match.group(2):
                    payload["region"] = match.group(2)
                steps.append(TraceStep(action="menuOpen", payload=payload))
        i += 1
    if not steps:
        raise ValueError("session log holds no replayable user turns")
    return TaskTrace(name=name, task_type="lookup", difficulty="easy", steps=tuple(steps))


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _ensure_dashboard(client: httpx.Client, spec_path: Path) -> str:
    document = json.loads(spec_path.read_text(encoding="utf-8"))
    dashboard_id = document["id"]
    try:
        existing = client.get(f"/dashboards/{dashboard_id}")
    except httpx.TransportError as exc:
        raise TransportError(f"service unreachable: {exc}") from exc
    if existing.status_code == 200:
        return dashboard_id
    created = client.post("/dashboards", json=document)
    if created.status_code not in (201, 409):
        raise TransportError(f"could not load dashboard: {created.status_code} {created.text}")
    return dashboard_id


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="vizguide-replay", description="Trace replay harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every trace in a directory")
    run.add_argument("trace_dir", help="directory of trace JSON files, or 'sample' for the bundled suite")
    run.add_argument("--endpoint", required=True, help="service base URL, e.g. http://127.0.0.1:8423")
    run.add_argument("--dashboard", default="sample", help="spec file to ensure loaded ('sample' = bundled)")
    run.add_argument("--report", help="write the full JSON report to this path")
    args = parser.parse_args(argv)

    from .sample import sample_dashboard_path, trace_dir

    directory = trace_dir() if args.trace_dir == "sample" else Path(args.trace_dir)
    spec_path = sample_dashboard_path() if args.dashboard == "sample" else Path(args.dashboard)

    traces = load_trace_dir(directory)
    started = time.monotonic()
    with httpx.Client(base_url=args.endpoint, timeout=30.0) as client:
        dashboard_id = _ensure_dashboard(client, spec_path)
        runner = TraceRunner(client, dashboard_id)
        reports = runner.run_all(traces)
    elapsed = time.monotonic() - started

    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(f"{status} {report.trace.name} ({sum(s.passed for s in report.steps)}/{len(report.steps)} steps)")
        for step in report.steps:
            for diff in step.diffs:
                print(f"  step {step.index} [{step.action}]: {diff}")
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} traces passed in {elapsed:.2f}s")

    if args.report:
        Path(args.report).write_text(
            json.dumps({"elapsedS": elapsed, "reports": [r.to_dict() for r in reports]}, indent=2),
            encoding="utf-8",
        )
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
