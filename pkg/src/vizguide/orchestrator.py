"""Multimodal session orchestration.

Holds conversation state, assembles metadata-only prompt digests, sends
them through the provider gateway, validates the anchors a reply carries,
and classifies each reply into answered / not-in-data / clarify.

The guardrail lives at the prompt boundary: a digest is assembled solely
from dashboard metadata fields (titles, bounds, encodings, data-model
schema, author descriptions, interaction capabilities). Display-only
sample data embedded in a spec is never read, so no data value can leak
into a prompt no matter what the provider does with it. Assistant replies
are likewise only checked structurally (sentinel, anchors), never for
answer correctness: answering from data is out of scope by design.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import highlight
from .errors import GatewayError, UnknownSession, UnknownVisual
from .gateway import NOT_IN_DATA_SENTINEL, ProviderConfig, complete_chat
from .model import DashboardSpec, RegionKind
from .resolver import RegionHit

logger = logging.getLogger(__name__)

HISTORY_WINDOW_TURNS = 12


class Role(str, Enum):
    USER = "user"
    ASSISTANT = "assistant"


class Modality(str, Enum):
    CHAT = "chat"
    VOICE_TRANSCRIPT = "voiceTranscript"
    LASSO_ATTACH = "lassoAttach"
    MENU_OPEN = "menuOpen"


class Outcome(str, Enum):
    ANSWERED = "answered"
    NOT_IN_DATA = "notInData"
    CLARIFY = "clarify"
    NONE = "none"


@dataclass(frozen=True)
class Turn:
    role: Role
    modality: Modality
    content: str
    anchors: tuple[str, ...] = ()
    outcome: Outcome = Outcome.NONE

    def to_dict(self) -> dict:
        return {
            "role": self.role.value,
            "modality": self.modality.value,
            "content": self.content,
            "anchors": list(self.anchors),
            "outcome": self.outcome.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        return cls(
            role=Role(data["role"]),
            modality=Modality(data["modality"]),
            content=data["content"],
            anchors=tuple(data.get("anchors", ())),
            outcome=Outcome(data.get("outcome", "none")),
        )


@dataclass
class Session:
    session_id: str
    dashboard_id: str
    created_at: float
    history: list[Turn] = field(default_factory=list)
    attached_context: RegionHit | None = None
    attached_at_turn: int = -1
    # one user turn at a time per session; callers queue on this
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class AssistantReply:
    marked_up_text: str
    anchors: tuple[str, ...]
    outcome: Outcome

    def to_dict(self) -> dict:
        return {
            "text": self.marked_up_text,
            "anchors": list(self.anchors),
            "outcome": self.outcome.value,
        }


SYSTEM_INSTRUCTIONS = """You are an onboarding guide for one visualization dashboard. Your job is to teach people how to read, navigate, and operate the dashboard, the way a patient colleague would point at the screen.

Hard rules:
1. Answer with short numbered steps the user can carry out, not with final answers. Basic descriptive questions about structure (titles, axes, legends) may be answered directly.
2. You only know the dashboard's structure, never its data. If a request needs a data value you cannot see, reply with the single line NOT_IN_DATA first, then give steps that redirect the user to the visuals and filters that reveal the value.
3. Wrap every reference to a dashboard element in a highlight marker: [[hl:<visualId>.<part>|<display text>]] where <part> is one of body, axis-x, axis-y, legend, title, data. Only reference elements listed in the dashboard digest.
4. If the request is ambiguous, ask exactly one clarifying question and nothing else.
5. Never apply filters or interact with the dashboard yourself; the user stays in control."""


_REGION_PHRASES = {
    RegionKind.VISUAL_BODY: "whole visual",
    RegionKind.AXIS_X: "x-axis",
    RegionKind.AXIS_Y: "y-axis",
    RegionKind.LEGEND: "legend",
    RegionKind.TITLE: "title",
    RegionKind.DATA_AREA: "plotted data",
    RegionKind.FILTER_CONTROL: "filter control",
}


@dataclass(frozen=True)
class PromptDigest:
    system_instructions: str
    dashboard_digest: str
    context_note: str
    history_window: tuple[str, ...]

    def system_text(self) -> str:
        parts = [self.system_instructions, "=== Dashboard ===", self.dashboard_digest]
        if self.context_note:
            parts += ["=== Context ===", self.context_note]
        return "\n".join(parts)

    def history_messages(self) -> list[dict]:
        messages = []
        for line in self.history_window:
            role = "assistant" if line.startswith("assistant") else "user"
            messages.append({"role": role, "content": line})
        return messages

    def guarded_text(self) -> str:
        """Every digest fragment the system composes from the spec.

        This is the surface the sample-data guardrail scans. The history
        window is excluded: it replays what the user themselves typed.
        """
        return "\n".join([self.system_instructions, self.dashboard_digest, self.context_note])


def _axis_attr(name: str, axis) -> str:
    if axis is None:
        return ""
    return f" {name}={axis.field}|{axis.scale_type.value}|{axis.unit}"


def _dashboard_digest(spec: DashboardSpec) -> str:
    lines = [
        f'dashboard id={spec.id} title="{spec.title}"',
        f"page {spec.page_bounds.w:g}x{spec.page_bounds.h:g}",
    ]
    if spec.description:
        lines.append(f"description: {spec.description}")
    for v in spec.visuals:
        b = v.bounds
        attrs = f'visual id={v.id} kind={v.kind.value} title="{v.title}" bounds={b.x:g},{b.y:g},{b.w:g},{b.h:g}'
        attrs += _axis_attr("axisX", v.encodings.axis_x)
        attrs += _axis_attr("axisY", v.encodings.axis_y)
        if v.encodings.legend is not None:
            legend = v.encodings.legend
            attrs += f" legend={legend.field}@{legend.position.value}"
        if v.encodings.category is not None:
            attrs += f" category={v.encodings.category}"
        if v.encodings.value is not None:
            attrs += f" value={v.encodings.value}"
        caps = v.interactions
        if caps.self_interactions:
            attrs += " self=[" + ",".join(sorted(s.value for s in caps.self_interactions)) + "]"
        if caps.cross_filter_targets:
            attrs += " crossFilters=[" + ",".join(caps.cross_filter_targets) + "]"
        if caps.drill_down:
            attrs += " drill=[" + ">".join(ref.column for ref in caps.drill_hierarchy) + "]"
        lines.append(attrs)
        if v.description:
            lines.append(f"  desc: {v.description}")
    for table in spec.data_model.tables:
        cols = ", ".join(f"{c.name}({c.value_type.value},{c.role.value})" for c in table.columns)
        lines.append(f"table {table.name}: {cols}")
    for rel in spec.data_model.relationships:
        lines.append(f"relationship {rel.from_ref} -> {rel.to_ref}")
    return "\n".join(lines)


def build_prompt_digest(
    spec: DashboardSpec,
    session: Session,
    history_window: int = HISTORY_WINDOW_TURNS,
) -> PromptDigest:
    """Provider-facing view of (spec, session); deterministic for equal inputs.

    Notably absent: anything from visuals' display-only sample data, legend
    entry values (data members), insight texts, timestamps, and ids that
    vary per run.
    """
    context_note = ""
    if session.attached_context is not None:
        hit = session.attached_context
        visual = spec.visual(hit.visual_id)
        title = visual.title if visual else hit.visual_id
        part = highlight.REGION_TO_PART[hit.region]
        context_note = (
            f'attached visual={hit.visual_id} title="{title}" region={hit.region.value} '
            f"({_REGION_PHRASES[hit.region]}) anchor={hit.visual_id}.{part}"
        )

    window: list[str] = []
    for turn in session.history[-history_window:]:
        if turn.role is Role.USER:
            if turn.modality is Modality.LASSO_ATTACH:
                window.append("user(lasso): attached a region of interest")
            elif turn.modality is Modality.MENU_OPEN:
                window.append(f"user(menu): {turn.content}")
            else:
                window.append(f"user({turn.modality.value}): {turn.content}")
        else:
            window.append(f"assistant[{turn.outcome.value}]: {turn.content}")

    return PromptDigest(
        system_instructions=SYSTEM_INSTRUCTIONS,
        dashboard_digest=_dashboard_digest(spec),
        context_note=context_note,
        history_window=tuple(window),
    )


def classify_outcome(gateway_reply: str) -> Outcome:
    """Structural outcome classification.

    The provider contract is a first-line NOT_IN_DATA sentinel; beyond
    that, a reply that ends on a question without offering any steps is a
    clarification request, everything else counts as answered.
    """
    stripped = gateway_reply.strip()
    first_line = stripped.splitlines()[0].strip() if stripped else ""
    if first_line == NOT_IN_DATA_SENTINEL:
        return Outcome.NOT_IN_DATA
    has_steps = any(_looks_like_step(line) for line in stripped.splitlines())
    if stripped.endswith("?") and not has_steps:
        return Outcome.CLARIFY
    return Outcome.ANSWERED


def _looks_like_step(line: str) -> bool:
    line = line.strip()
    if not line:
        return False
    if line[0] in "-*":
        return True
    head, _, _ = line.partition(".")
    return head.isdigit()


def strip_sentinel(reply: str) -> str:
    stripped = reply.strip()
    lines = stripped.splitlines()
    if lines and lines[0].strip() == NOT_IN_DATA_SENTINEL:
        return "\n".join(lines[1:]).lstrip("\n")
    return stripped


RETRY_TEXT = "Sorry, I could not reach the guidance service just now. Could you ask that again in a moment?"


class Orchestrator:
    """Conversation engine for one dashboard.

    Sessions are managed by a SessionStore; the orchestrator itself never
    mutates the dashboard spec (it takes it read-only) and serializes the
    turns of one session behind the session lock.
    """

    def __init__(
        self,
        spec: DashboardSpec,
        provider_config: ProviderConfig,
        provider: Callable[[PromptDigest, str], str] | None = None,
        history_window: int = HISTORY_WINDOW_TURNS,
    ) -> None:
        self.spec = spec
        self._config = provider_config
        self._provider = provider or (lambda digest, text: complete_chat(provider_config, digest, text))
        self._history_window = history_window

    def handle_user_turn(self, session: Session, modality: Modality, text: str) -> AssistantReply:
        if modality not in (Modality.CHAT, Modality.VOICE_TRANSCRIPT):
            raise ValueError("user turns are chat or voiceTranscript")
        if not text.strip():
            raise ValueError("user turn text must be non-empty")
        with session.lock:
            session.history.append(Turn(role=Role.USER, modality=modality, content=text))
            digest = build_prompt_digest(self.spec, session, self._history_window)
            try:
                raw_reply = self._provider(digest, text)
            except GatewayError as exc:
                logger.warning("gateway failure on session %s: %s", session.session_id, exc)
                reply = AssistantReply(marked_up_text=RETRY_TEXT, anchors=(), outcome=Outcome.CLARIFY)
                session.history.append(
                    Turn(
                        role=Role.ASSISTANT,
                        modality=modality,
                        content=reply.marked_up_text,
                        outcome=reply.outcome,
                    )
                )
                return reply

            outcome = classify_outcome(raw_reply)
            text_body = strip_sentinel(raw_reply)
            text_body, anchors = self._validate_anchors(text_body)
            reply = AssistantReply(marked_up_text=text_body, anchors=anchors, outcome=outcome)
            session.history.append(
                Turn(
                    role=Role.ASSISTANT,
                    modality=modality,
                    content=text_body,
                    anchors=anchors,
                    outcome=outcome,
                )
            )
            return reply

    def _validate_anchors(self, marked_up: str) -> tuple[str, tuple[str, ...]]:
        """Strip markers whose anchors do not resolve; keep the rest."""
        _, spans = highlight.parse_anchors(marked_up)
        valid: list[str] = []
        for _, anchor_id in spans:
            try:
                highlight.resolve_anchor(anchor_id, self.spec)
            except Exception as exc:
                logger.warning("dropping unresolvable anchor %r: %s", anchor_id, exc)
                marked_up = highlight.strip_anchor(marked_up, anchor_id)
            else:
                if anchor_id not in valid:
                    valid.append(anchor_id)
        return marked_up, tuple(valid)

    def attach_lasso_context(self, session: Session, hit: RegionHit) -> Session:
        if self.spec.visual(hit.visual_id) is None:
            raise UnknownVisual(f"no visual {hit.visual_id!r} in dashboard {self.spec.id!r}")
        with session.lock:
            session.attached_context = hit
            session.attached_at_turn = len(session.history)
            session.history.append(
                Turn(
                    role=Role.USER,
                    modality=Modality.LASSO_ATTACH,
                    content=json.dumps(hit.to_dict(), sort_keys=True),
                )
            )
        return session

    def record_menu_open(self, session: Session, visual_id: str, region: RegionKind | None = None) -> None:
        if self.spec.visual(visual_id) is None:
            raise UnknownVisual(f"no visual {visual_id!r} in dashboard {self.spec.id!r}")
        note = f"opened help menu on {visual_id}" + (f" at {region.value}" if region else "")
        with session.lock:
            session.history.append(Turn(role=Role.USER, modality=Modality.MENU_OPEN, content=note))


class SessionStore:
    """In-memory session registry, safe for concurrent use."""

    def __init__(self, clock: Callable[[], float] = time.time) -> None:
        self._sessions: dict[str, Session] = {}
        self._clock = clock
        self._lock = threading.Lock()

    def create(self, dashboard_id: str, session_id: str | None = None) -> Session:
        session = Session(
            session_id=session_id or uuid.uuid4().hex,
            dashboard_id=dashboard_id,
            created_at=self._clock(),
        )
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        return session

    def exists(self, session_id: str) -> bool:
        with self._lock:
            return session_id in self._sessions

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def export_session_log(session: Session) -> str:
    """Newline-delimited JSON, one turn per line; replayable."""
    return "\n".join(json.dumps(turn.to_dict(), sort_keys=True) for turn in session.history)


def parse_session_log(log_text: str) -> list[Turn]:
    turns = []
    for line in log_text.splitlines():
        line = line.strip()
        if line:
            turns.append(Turn.from_dict(json.loads(line)))
    return turns
