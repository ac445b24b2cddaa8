from __future__ import annotations

import json

import pytest

from vizguide.errors import GatewayTimeout, UnknownVisual
from vizguide.gateway import ProviderConfig
from vizguide.highlight import resolve_anchor
from vizguide.model import RegionKind
from vizguide.orchestrator import (
    Modality,
    Orchestrator,
    Outcome,
    Role,
    SessionStore,
    build_prompt_digest,
    classify_outcome,
    export_session_log,
    parse_session_log,
)
from vizguide.resolver import RegionHit, LassoPath, resolve_lasso
from vizguide.sample import sample_data_tokens


@pytest.fixture()
def orchestrator(sample_spec):
    return Orchestrator(sample_spec, ProviderConfig())


@pytest.fixture()
def session(sample_spec):
    return SessionStore().create(sample_spec.id)


def axis_y_hit(sample_spec) -> RegionHit:
    strip = sample_spec.visual("bar-01").regions[RegionKind.AXIS_Y]
    path = [(strip.x + 1, strip.y + 1), (strip.right - 1, strip.y + 1),
            (strip.right - 1, strip.bottom - 1), (strip.x + 1, strip.bottom - 1)]
    return resolve_lasso(LassoPath.of(path), sample_spec)


def _tokens(text: str) -> set[str]:
    out, current = set(), []
    for ch in text:
        if ch.isalnum():
            current.append(ch)
        elif current:
            out.add("".join(current).lower())
            current = []
    if current:
        out.add("".join(current).lower())
    return out


class TestPromptDigest:
    def test_lists_all_visuals_with_kind_and_title(self, sample_spec, session):
        digest = build_prompt_digest(sample_spec, session)
        for v in sample_spec.visuals:
            assert f"visual id={v.id} kind={v.kind.value} title=\"{v.title}\"" in digest.dashboard_digest

    def test_contains_no_sample_data_tokens(self, sample_spec, session):
        digest = build_prompt_digest(sample_spec, session)
        leaked = _tokens(digest.guarded_text()) & sample_data_tokens()
        assert leaked == set()

    def test_context_note_names_visual_and_region(self, sample_spec, orchestrator, session):
        orchestrator.attach_lasso_context(session, axis_y_hit(sample_spec))
        digest = build_prompt_digest(sample_spec, session)
        assert "bar-01" in digest.context_note
        assert "y-axis" in digest.context_note

    def test_deterministic_for_identical_sessions(self, sample_spec, orchestrator):
        store = SessionStore()
        replies = []
        digests = []
        for _ in range(2):
            s = store.create(sample_spec.id)
            replies.append(orchestrator.handle_user_turn(s, Modality.CHAT, "How do I read the KPI cards?"))
            digests.append(build_prompt_digest(sample_spec, s))
        assert digests[0] == digests[1]
        assert replies[0] == replies[1]

    def test_history_window_is_bounded(self, sample_spec, orchestrator):
        session = SessionStore().create(sample_spec.id)
        for i in range(20):
            orchestrator.handle_user_turn(session, Modality.CHAT, f"hello {i}")
        digest = build_prompt_digest(sample_spec, session, history_window=12)
        assert len(digest.history_window) == 12

    def test_excludes_legend_entries_and_insight_texts(self, sample_spec, session):
        # legend entry values and author insight texts are data-adjacent;
        # the digest carries only the legend's field and position
        digest = build_prompt_digest(sample_spec, session)
        assert "legend=Opportunities.ProductCategory@topRight" in digest.dashboard_digest
        for annotation in sample_spec.insights:
            assert annotation.text not in digest.dashboard_digest


class TestClassifyOutcome:
    def test_sentinel_first_line(self):
        assert classify_outcome("NOT_IN_DATA\nTry filtering.") is Outcome.NOT_IN_DATA

    def test_steps_mean_answered(self):
        assert classify_outcome("1. Click the legend.\n2. Pick a series.") is Outcome.ANSWERED

    def test_question_without_steps_is_clarify(self):
        assert classify_outcome("Which chart do you mean?") is Outcome.CLARIFY

    def test_question_with_steps_is_answered(self):
        assert classify_outcome("1. Open the menu.\n2. Does that help?") is Outcome.ANSWERED

    def test_plain_sentence_is_answered(self):
        assert classify_outcome("The y-axis lists countries.") is Outcome.ANSWERED


class TestHandleUserTurn:
    def test_axis_scaling_question(self, orchestrator, session):
        reply = orchestrator.handle_user_turn(
            session, Modality.CHAT, "How do I figure out the scaling of the x-axis of the bar chart?"
        )
        assert reply.outcome is Outcome.ANSWERED
        assert "bar-01.axis-x" in reply.anchors
        assert "x-axis" in reply.marked_up_text

    def test_value_question_is_not_in_data_with_redirect(self, sample_spec, orchestrator, session):
        reply = orchestrator.handle_user_turn(
            session, Modality.CHAT, "What is the exact revenue value for Australia?"
        )
        assert reply.outcome is Outcome.NOT_IN_DATA
        assert "NOT_IN_DATA" not in reply.marked_up_text  # sentinel stripped
        assert len(reply.anchors) >= 1
        for anchor_id in reply.anchors:
            resolve_anchor(anchor_id, sample_spec)

    def test_descriptive_axis_question_with_context(self, sample_spec, orchestrator, session):
        orchestrator.attach_lasso_context(session, axis_y_hit(sample_spec))
        reply = orchestrator.handle_user_turn(session, Modality.CHAT, "what is the y-axis?")
        assert reply.outcome is Outcome.ANSWERED
        assert "bar-01.axis-y" in reply.anchors

    def test_turns_are_appended_in_order(self, orchestrator, session):
        orchestrator.handle_user_turn(session, Modality.CHAT, "How do I read the KPI cards?")
        assert [t.role for t in session.history] == [Role.USER, Role.ASSISTANT]
        assert session.history[0].outcome is Outcome.NONE
        assert session.history[1].outcome is not Outcome.NONE

    def test_empty_text_rejected(self, orchestrator, session):
        with pytest.raises(ValueError):
            orchestrator.handle_user_turn(session, Modality.CHAT, "   ")

    def test_invalid_modality_rejected(self, orchestrator, session):
        with pytest.raises(ValueError):
            orchestrator.handle_user_turn(session, Modality.MENU_OPEN, "hi")

    def test_gateway_failure_becomes_clarify_turn(self, sample_spec, session):
        def broken_provider(_digest, _text):
            raise GatewayTimeout("nope")

        orchestrator = Orchestrator(sample_spec, ProviderConfig(), provider=broken_provider)
        reply = orchestrator.handle_user_turn(session, Modality.CHAT, "hello")
        assert reply.outcome is Outcome.CLARIFY
        assert session.history[-1].outcome is Outcome.CLARIFY

    def test_invalid_anchors_are_stripped(self, sample_spec, session):
        def hallucinating_provider(_digest, _text):
            return "1. Check the [[hl:ghost-7.legend|legend]] and the [[hl:bar-01.legend|legend]]."

        orchestrator = Orchestrator(sample_spec, ProviderConfig(), provider=hallucinating_provider)
        reply = orchestrator.handle_user_turn(session, Modality.CHAT, "where is the legend?")
        assert reply.anchors == ("bar-01.legend",)
        assert "ghost-7" not in reply.marked_up_text
        assert "Check the legend" in reply.marked_up_text

    def test_spec_is_never_mutated(self, sample_spec, orchestrator, session):
        before = sample_spec
        orchestrator.handle_user_turn(session, Modality.VOICE_TRANSCRIPT, "what do the colors in the legend mean?")
        orchestrator.attach_lasso_context(session, axis_y_hit(sample_spec))
        assert orchestrator.spec == before  # frozen dataclasses: equality is deep


class TestAttachContext:
    def test_attach_then_replace(self, sample_spec, orchestrator, session):
        first = axis_y_hit(sample_spec)
        orchestrator.attach_lasso_context(session, first)
        legend = sample_spec.visual("bar-01").regions[RegionKind.LEGEND]
        second = resolve_lasso(
            LassoPath.of([(legend.x + 2, legend.y + 2), (legend.right - 2, legend.y + 2),
                          (legend.right - 2, legend.bottom - 2), (legend.x + 2, legend.bottom - 2)]),
            sample_spec,
        )
        orchestrator.attach_lasso_context(session, second)
        assert session.attached_context == second

    def test_attach_unknown_visual(self, sample_spec, orchestrator, session):
        foreign = RegionHit(
            visual_id="other-dashboard-visual",
            region=RegionKind.VISUAL_BODY,
            overlap_fraction=1.0,
            anchor_bounds=sample_spec.visual("kpi-01").bounds,
        )
        with pytest.raises(UnknownVisual):
            orchestrator.attach_lasso_context(session, foreign)

    def test_attach_appends_lasso_turn_with_serialized_hit(self, sample_spec, orchestrator, session):
        hit = axis_y_hit(sample_spec)
        orchestrator.attach_lasso_context(session, hit)
        turn = session.history[-1]
        assert turn.modality is Modality.LASSO_ATTACH
        assert json.loads(turn.content)["visualId"] == "bar-01"

    def test_context_persists_across_turns_until_replaced(self, sample_spec, orchestrator, session):
        hit = axis_y_hit(sample_spec)
        orchestrator.attach_lasso_context(session, hit)
        orchestrator.handle_user_turn(session, Modality.CHAT, "what is the y-axis?")
        orchestrator.handle_user_turn(session, Modality.CHAT, "and what does this show?")
        assert session.attached_context == hit


class TestSessionLog:
    def test_export_parse_round_trip(self, sample_spec, orchestrator, session):
        orchestrator.attach_lasso_context(session, axis_y_hit(sample_spec))
        orchestrator.handle_user_turn(session, Modality.CHAT, "what is the y-axis?")
        log_text = export_session_log(session)
        turns = parse_session_log(log_text)
        assert turns == session.history

    def test_replaying_log_reproduces_outcomes(self, sample_spec, orchestrator):
        store = SessionStore()
        recorded = store.create(sample_spec.id)
        orchestrator.attach_lasso_context(recorded, axis_y_hit(sample_spec))
        for text in ("what is the y-axis?", "What is the exact revenue value for Australia?", "how do I drill down?"):
            orchestrator.handle_user_turn(recorded, Modality.CHAT, text)

        replayed = store.create(sample_spec.id)
        for turn in parse_session_log(export_session_log(recorded)):
            if turn.role is not Role.USER:
                continue
            if turn.modality is Modality.LASSO_ATTACH:
                orchestrator.attach_lasso_context(replayed, RegionHit.from_dict(json.loads(turn.content)))
            elif turn.modality in (Modality.CHAT, Modality.VOICE_TRANSCRIPT):
                orchestrator.handle_user_turn(replayed, turn.modality, turn.content)

        original = [(t.outcome, t.content, t.anchors) for t in recorded.history]
        repeat = [(t.outcome, t.content, t.anchors) for t in replayed.history]
        assert original == repeat
