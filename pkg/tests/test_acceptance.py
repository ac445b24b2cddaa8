"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion (pytest's own FAILED line is the fail signal). Every tolerance
and budget is pinned here, not configured elsewhere.
"""

from __future__ import annotations

import json
import random
import string
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import grid_overlap_area, random_star_polygon
from vizguide.config import Settings
from vizguide.errors import NoHit, TokenExpired, TokenReused
from vizguide.gateway import ProviderConfig, VoiceTokenService, mock_reply
from vizguide.geometry import Rect, polygon_rect_intersection_area
from vizguide.highlight import parse_anchors, render_anchors, resolve_anchor
from vizguide.menu import MenuCategory, build_component_graph, prune_categories, serialize_menu
from vizguide.model import RegionKind, VisualKind, parse_dashboard_spec, serialize_dashboard_spec
from vizguide.orchestrator import Modality, Orchestrator, Outcome, SessionStore, build_prompt_digest
from vizguide.replay import TraceRunner, load_trace_dir, trace_from_session_log
from vizguide.resolver import LassoPath, resolve_lasso
from vizguide.sample import sample_dashboard_path, sample_data_tokens, trace_dir

GOLDEN_MENUS = Path(__file__).parent / "golden" / "menus"
GOLDEN_TRANSCRIPTS = Path(__file__).parent / "golden" / "transcripts"


def _passed(name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE PASS [{name}]{suffix}")


# ---------------------------------------------------------------------------
# 1. Menu pruning
# ---------------------------------------------------------------------------


def test_menu_pruning_matches_contract(sample_spec):
    started = time.monotonic()

    assert prune_categories(VisualKind.KPI) == {MenuCategory.READ, MenuCategory.DATA, MenuCategory.INSIGHT}
    assert prune_categories(VisualKind.SLICER) == {MenuCategory.READ, MenuCategory.DATA, MenuCategory.INTERACT}
    for kind in (VisualKind.BAR_CHART, VisualKind.LINE_CHART, VisualKind.FUNNEL_CHART, VisualKind.MAP_CHART):
        assert prune_categories(kind) == set(MenuCategory)

    menus = build_component_graph(sample_spec)
    assert len(menus) == 8
    for visual_id, model in menus.items():
        golden = json.loads((GOLDEN_MENUS / f"{visual_id}.json").read_text())
        assert serialize_menu(model) == golden, f"menu snapshot drifted: {visual_id}"

    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    _passed("menu pruning + golden snapshots", f"{elapsed * 1000:.0f} ms for 8 visuals")


# ---------------------------------------------------------------------------
# 2. Geometry oracle equivalence
# ---------------------------------------------------------------------------


def test_geometry_oracle_equivalence_and_lasso_invariance(sample_spec):
    started = time.monotonic()
    rng = np.random.default_rng(2024)

    # (a) exact clipper vs 400x400 grid oracle, 1,000 random polygons;
    # rects are placed near each polygon so the overlap is non-trivial
    compared = 0
    while compared < 1000:
        polygon = random_star_polygon(rng, 1280, 720)
        cx = sum(p[0] for p in polygon) / len(polygon)
        cy = sum(p[1] for p in polygon) / len(polygon)
        rect = Rect(
            cx + rng.uniform(-220, 60),
            cy + rng.uniform(-180, 60),
            rng.uniform(60, 360),
            rng.uniform(60, 260),
        )
        exact = polygon_rect_intersection_area(polygon, rect)
        sampled = grid_overlap_area(polygon, rect, n=400)
        if exact < 1.0 and sampled < 1.0:
            continue  # both call it sub-pixel
        assert exact == pytest.approx(sampled, rel=0.01, abs=1.0), (polygon, rect)
        compared += 1

    # (b) winner invariant under rotation/reversal of the point list
    checked = 0
    while checked < 150:
        polygon = random_star_polygon(rng, 1280, 720)
        try:
            base = resolve_lasso(LassoPath.of(polygon), sample_spec)
        except NoHit:
            continue
        checked += 1
        for variant in (
            polygon[3:] + polygon[:3],
            list(reversed(polygon)),
        ):
            hit = resolve_lasso(LassoPath.of(variant), sample_spec)
            assert (hit.visual_id, hit.region) == (base.visual_id, base.region)

    # (c) argmax invariance under uniform coordinate scaling
    for factor in (0.25, 3.0):
        document = serialize_dashboard_spec(sample_spec)
        _scale_rects(document, factor)
        scaled_spec = parse_dashboard_spec(document)
        checked = 0
        while checked < 60:
            polygon = random_star_polygon(rng, 1280, 720)
            try:
                base = resolve_lasso(LassoPath.of(polygon), sample_spec)
            except NoHit:
                continue
            checked += 1
            scaled = [(x * factor, y * factor) for x, y in polygon]
            hit = resolve_lasso(LassoPath.of(scaled), scaled_spec)
            assert (hit.visual_id, hit.region) == (base.visual_id, base.region)

    elapsed = time.monotonic() - started
    assert elapsed < 30.0
    _passed("geometry oracle equivalence + lasso invariance", f"{elapsed:.1f} s, {compared} areas compared")


def _scale_rects(node, factor):
    if isinstance(node, dict):
        if set(node.keys()) >= {"x", "y", "w", "h"}:
            for key in ("x", "y", "w", "h"):
                node[key] = node[key] * factor
        else:
            for value in node.values():
                _scale_rects(value, factor)
    elif isinstance(node, list):
        for item in node:
            _scale_rects(item, factor)


# ---------------------------------------------------------------------------
# 3. Axis-lasso scenario (selection opens the matching menu)
# ---------------------------------------------------------------------------


def test_axis_lasso_opens_read_menu_with_matching_highlight(client):
    session_id = client.post("/sessions", json={"dashboardId": "sales-pipeline"}).json()["sessionId"]
    dashboard = client.get("/dashboards/sales-pipeline").json()["dashboard"]
    strip = next(v for v in dashboard["visuals"] if v["id"] == "bar-01")["regions"]["axisY"]
    points = [
        [strip["x"] + 1, strip["y"] + 1],
        [strip["x"] + strip["w"] - 1, strip["y"] + 1],
        [strip["x"] + strip["w"] - 1, strip["y"] + strip["h"] - 1],
        [strip["x"] + 1, strip["y"] + strip["h"] - 1],
    ]
    body = client.post(f"/sessions/{session_id}/lasso", json={"points": points}).json()
    assert body["hit"]["visualId"] == "bar-01"
    assert body["hit"]["region"] == "axisY"
    assert body["hit"]["overlapFraction"] >= 0.5
    assert body["menu"]["openedAt"] == "read"
    assert body["highlight"]["anchorId"] == "bar-01.axis-y"
    assert body["highlight"]["bounds"] == strip
    _passed("axis lasso -> axisY hit, read menu, anchor bounds equal the strip")


# ---------------------------------------------------------------------------
# 4. Prompt guardrail
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> set[str]:
    tokens, current = set(), []
    for ch in text:
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.add("".join(current).lower())
            current = []
    if current:
        tokens.add("".join(current).lower())
    return tokens


def test_prompt_guardrail_and_not_in_data_redirects(sample_spec):
    deny_list = sample_data_tokens()
    assert len(deny_list) > 30  # the shipped sample data is non-trivial

    orchestrator = Orchestrator(sample_spec, ProviderConfig())
    store = SessionStore()
    questions = [
        "How do I figure out the scaling of the x-axis of the bar chart?",
        "What do the colors in the legend mean?",
        "What is the exact revenue value for Australia?",
        "How do I drill down to city level?",
        "How should I read the revenue trend chart?",
    ]
    scanned = 0
    for variant in range(10):
        session = store.create(sample_spec.id)
        for question in questions:
            if variant % 2 == 0:
                orchestrator.handle_user_turn(session, Modality.CHAT, question)
            digest = build_prompt_digest(sample_spec, session)
            leaked = _tokenize(digest.guarded_text()) & deny_list
            assert leaked == set(), f"sample-data tokens leaked into digest: {leaked}"
            scanned += 1
    assert scanned == 50

    value_queries = [
        "What is the exact revenue value for Australia?",
        "How can I figure out the revenue goal for Australia in the Services subcategory for the Proposal stage?",
        "How much revenue did we close last month?",
    ]
    for query in value_queries:
        session = store.create(sample_spec.id)
        reply = orchestrator.handle_user_turn(session, Modality.CHAT, query)
        assert reply.outcome is Outcome.NOT_IN_DATA
        assert len(reply.anchors) >= 1
        for anchor_id in reply.anchors:
            resolve_anchor(anchor_id, sample_spec)  # raises if invalid

    _passed("prompt guardrail", "50 digests scanned, 0 sample-data tokens; value queries redirect")


# ---------------------------------------------------------------------------
# 5. Anchor markup
# ---------------------------------------------------------------------------


def test_anchor_markup_identity_and_transcript_anchors(sample_spec):
    rng = random.Random(99)
    parts = ("body", "axis-x", "axis-y", "legend", "title", "data")
    alphabet = string.ascii_letters + string.digits + " .,;:!?|]\\[()-"

    for case in range(10_000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        if parse_anchors(text) != (text, []):
            continue  # text already carries a marker: out of the identity's domain
        cuts = sorted(rng.randint(0, len(text)) for _ in range(2 * rng.randint(0, 3)))
        spans = []
        for i in range(len(cuts) // 2):
            anchor_id = f"v{rng.randint(0, 99)}.{rng.choice(parts)}"
            spans.append(((cuts[2 * i], cuts[2 * i + 1]), anchor_id))
        marked = render_anchors(text, spans)
        assert parse_anchors(marked) == (text, spans), f"case {case}"

    transcript_anchors = 0
    for path in sorted(GOLDEN_TRANSCRIPTS.glob("*.json")):
        for entry in json.loads(path.read_text()):
            _, spans = parse_anchors(entry["reply"])
            for _, anchor_id in spans:
                resolve_anchor(anchor_id, sample_spec)
                transcript_anchors += 1
    assert transcript_anchors >= 20

    _passed("anchor markup", f"10,000 round-trip cases; {transcript_anchors} transcript anchors resolve")


# ---------------------------------------------------------------------------
# 6. Token hygiene
# ---------------------------------------------------------------------------


class _TickClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self):
        return self.now


def test_token_hygiene(make_client, monkeypatch, caplog):
    clock = _TickClock()
    service = VoiceTokenService(session_exists=lambda _sid: True, ttl_s=60.0, clock=clock)

    minted = [service.mint("s-accept").token for _ in range(100_000)]
    assert len(set(minted)) == 100_000

    token = service.mint("s-accept")
    assert service.redeem(token.token) == "s-accept"
    with pytest.raises(TokenReused):
        service.redeem(token.token)

    expiring = service.mint("s-accept")
    clock.now += 60.0 + 1e-3  # TTL + epsilon
    with pytest.raises(TokenExpired):
        service.redeem(expiring.token)

    # secret scan over live API responses and captured log lines
    secret = "sk-acceptance-secret-4242"
    monkeypatch.setenv("ONBOARD_API_KEY", secret)
    client = make_client(Settings(dashboards=(str(sample_dashboard_path()),)))
    session_id = client.post("/sessions", json={"dashboardId": "sales-pipeline"}).json()["sessionId"]
    responses = [
        client.get("/dashboards/sales-pipeline"),
        client.get("/dashboards/sales-pipeline/menus"),
        client.post(f"/sessions/{session_id}/turns", json={"modality": "chat", "text": "kpi cards?"}),
        client.post(f"/sessions/{session_id}/voice-token"),
        client.get(f"/sessions/{session_id}/log"),
        client.get(f"/sessions/{session_id}/events", params={"once": True}),
        client.get("/healthz"),
    ]
    for response in responses:
        assert secret not in response.text
    assert all(secret not in record.getMessage() for record in caplog.records)

    _passed("token hygiene", "100k unique mints, single-use, TTL+eps expiry, secret scan clean")


# ---------------------------------------------------------------------------
# 7. Replay determinism
# ---------------------------------------------------------------------------


def test_replay_determinism(client):
    traces = load_trace_dir(trace_dir())
    assert len(traces) == 10
    runner = TraceRunner(client, "sales-pipeline")
    started = time.monotonic()
    reports = runner.run_all(traces)
    elapsed = time.monotonic() - started
    failures = [(r.trace.name, s.index, s.diffs) for r in reports for s in r.steps if not s.passed]
    assert failures == []
    assert elapsed < 5.0

    # record a session, export its log, replay: outcomes must reproduce
    session_id = client.post("/sessions", json={"dashboardId": "sales-pipeline"}).json()["sessionId"]
    for modality, text in (
        ("chat", "How do I figure out the scaling of the x-axis of the bar chart?"),
        ("voiceTranscript", "What is the exact revenue value for Australia?"),
        ("chat", "How do I drill down to city level?"),
    ):
        client.post(f"/sessions/{session_id}/turns", json={"modality": modality, "text": text})
    log_text = client.get(f"/sessions/{session_id}/log").text
    replay_trace = trace_from_session_log(log_text)
    report = runner.run(replay_trace)
    assert report.passed, [s.diffs for s in report.steps if not s.passed]

    _passed("replay determinism", f"10 traces in {elapsed:.2f} s; exported log reproduces outcomes")
