"""Provider boundary: mock and HTTP chat providers, voice session tokens.

The mock provider is a pure function of (prompt digest, user text): it
parses the digest's visual inventory back out of the digest string and
routes on user-text keywords, so integration tests and replay traces are
byte-deterministic without any network. The HTTP provider speaks a plain
chat-completion shape (system/user message list) against a configurable
endpoint; the API key is read from an environment variable at call time
and never stored, serialized, or logged.

Voice interaction is modeled at the transcript level. What this module
owns is the token dance: the browser asks the backend to mint a short-
lived single-use token, redeems it, and submits the transcript as an
ordinary turn, so the primary API key never reaches the client. Plugging
real audio streaming in behind `mint_voice_token`/`redeem_voice_token` is
a documented extension point.
"""

from __future__ import annotations

import logging
import os
import re
import secrets
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Callable

import httpx

from .errors import (
    GatewayError,
    GatewayRefused,
    GatewayTimeout,
    TokenExpired,
    TokenReused,
    TokenUnknown,
    UnknownSession,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .orchestrator import PromptDigest

logger = logging.getLogger(__name__)

NOT_IN_DATA_SENTINEL = "NOT_IN_DATA"
DEFAULT_VOICE_TOKEN_TTL_S = 60.0


class ProviderMode(str, Enum):
    MOCK = "mock"
    HTTP = "http"


@dataclass(frozen=True)
class ProviderConfig:
    mode: ProviderMode = ProviderMode.MOCK
    endpoint_url: str = ""
    model_name: str = "onboarding-default"
    api_key_env_var: str = "ONBOARD_API_KEY"
    request_timeout_ms: int = 15_000

    def __post_init__(self) -> None:
        if self.mode is ProviderMode.HTTP:
            if not self.endpoint_url:
                raise ValueError("http provider mode requires endpointUrl")
            if not self.api_key_env_var:
                raise ValueError("http provider mode requires apiKeyEnvVar")


def complete_chat(config: ProviderConfig, digest: "PromptDigest", user_text: str) -> str:
    """One chat completion; mock mode never leaves the process."""
    if config.mode is ProviderMode.MOCK:
        return mock_reply(digest, user_text)
    return _http_complete(config, digest, user_text)


def polish_text(config: ProviderConfig, text: str) -> str:
    """Rephrase one narrative sentence. Mock mode echoes the input."""
    if config.mode is ProviderMode.MOCK:
        return text
    messages = [
        {
            "role": "system",
            "content": "Rephrase the user's sentence in a friendlier tone. Keep every name, unit, and number exactly as written.",
        },
        {"role": "user", "content": text},
    ]
    return _http_request(config, messages)


def _http_complete(config: ProviderConfig, digest: "PromptDigest", user_text: str) -> str:
    messages = [
        {"role": "system", "content": digest.system_text()},
        *digest.history_messages(),
        {"role": "user", "content": user_text},
    ]
    return _http_request(config, messages)


def _http_request(config: ProviderConfig, messages: list[dict]) -> str:
    api_key = os.environ.get(config.api_key_env_var, "")
    if not api_key:
        raise GatewayError(f"environment variable {config.api_key_env_var} is not set")
    timeout = config.request_timeout_ms / 1000.0
    try:
        response = httpx.post(
            config.endpoint_url,
            json={"model": config.model_name, "messages": messages},
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
        )
    except httpx.TimeoutException as exc:
        raise GatewayTimeout(f"provider did not answer within {timeout:.1f}s") from exc
    except httpx.HTTPError as exc:
        raise GatewayRefused(f"provider unreachable: {type(exc).__name__}") from exc
    if response.status_code // 100 != 2:
        raise GatewayRefused(f"provider answered {response.status_code}")
    try:
        return response.json()["message"]["content"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GatewayRefused("provider reply missing message.content") from exc


# ---------------------------------------------------------------------------
# Mock provider
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _VisualInfo:
    id: str
    kind: str
    title: str
    axis_x: tuple[str, str, str] | None = None  # field, scale, unit
    axis_y: tuple[str, str, str] | None = None
    legend_field: str = ""
    bound_field: str = ""
    cross_filters: tuple[str, ...] = ()
    drill: tuple[str, ...] = ()

    def mentions_score(self, text: str) -> int:
        """How strongly lowercase `text` points at this visual."""
        score = 0
        title_lower = self.title.lower()
        if title_lower and title_lower in text:
            score += 5
        kind_phrases = {
            "barChart": ("bar chart", "bar-chart"),
            "lineChart": ("line chart", "line-chart"),
            "funnelChart": ("funnel",),
            "mapChart": ("map",),
            "kpi": ("kpi", "card"),
            "slicer": ("slicer", "date filter"),
        }
        if any(phrase in text for phrase in kind_phrases.get(self.kind, ())):
            score += 3
        stop = {"the", "and", "for", "with", "over", "chart"}
        for word in title_lower.split():
            if len(word) > 3 and word not in stop and re.search(rf"\b{re.escape(word)}\b", text):
                score += 1
        return score


_VISUAL_LINE_RE = re.compile(r'^visual id=(\S+) kind=(\S+) title="([^"]*)"(.*)$')


def _parse_digest_visuals(dashboard_digest: str) -> list[_VisualInfo]:
    visuals: list[_VisualInfo] = []
    for line in dashboard_digest.splitlines():
        match = _VISUAL_LINE_RE.match(line.strip())
        if not match:
            continue
        vid, kind, title, rest = match.groups()

        def attr(name: str) -> str:
            found = re.search(rf"{name}=(\S+)", rest)
            return found.group(1) if found else ""

        def listing(name: str) -> tuple[str, ...]:
            found = re.search(rf"{name}=\[([^\]]*)\]", rest)
            if not found or not found.group(1):
                return ()
            return tuple(found.group(1).split(","))

        def axis(name: str) -> tuple[str, str, str] | None:
            raw = attr(name)
            if not raw:
                return None
            parts = (raw.split("|") + ["", "", ""])[:3]
            return (parts[0], parts[1], parts[2])

        visuals.append(
            _VisualInfo(
                id=vid,
                kind=kind,
                title=title,
                axis_x=axis("axisX"),
                axis_y=axis("axisY"),
                legend_field=attr("legend").split("@")[0],
                bound_field=attr("category") or attr("value"),
                cross_filters=listing("crossFilters"),
                drill=tuple(attr("drill").strip("[]").split(">")) if attr("drill") else (),
            )
        )
    return visuals


_ATTACHED_RE = re.compile(r"attached visual=(\S+)")

_VALUE_WORDS = ("exact", "value", "how much", "how many", "goal", "numbers for")
_DESCRIBE_PHRASES = ("what does this show", "what is this", "how should i read", "explain", "what do i see")
_INSIGHT_WORDS = ("driver", "driving", "trend", "pattern", "seasonality", "takeaway")


def mock_reply(digest: "PromptDigest", user_text: str) -> str:
    """Deterministic rule-based reply grounded in the digest."""
    visuals = _parse_digest_visuals(digest.dashboard_digest)
    text = user_text.lower()

    attached: _VisualInfo | None = None
    attach_match = _ATTACHED_RE.search(digest.context_note)
    if attach_match:
        attached = next((v for v in visuals if v.id == attach_match.group(1)), None)

    def mentioned() -> _VisualInfo | None:
        scored = [(v.mentions_score(text), -i, v) for i, v in enumerate(visuals)]
        scored.sort(reverse=True)
        if not scored or scored[0][0] == 0:
            return None
        if len(scored) > 1 and scored[0][0] == scored[1][0]:
            return None  # ambiguous: two visuals tie
        return scored[0][2]

    def target(predicate=None) -> _VisualInfo | None:
        named = mentioned()
        if named is not None and (predicate is None or predicate(named)):
            return named
        if attached is not None and (predicate is None or predicate(attached)):
            return attached
        return None

    def hl(vid: str, part: str, label: str) -> str:
        return f"[[hl:{vid}.{part}|{label}]]"

    charts = [v for v in visuals if v.kind not in ("kpi", "slicer")]
    slicer = next((v for v in visuals if v.kind == "slicer"), None)
    first_kpi = next((v for v in visuals if v.kind == "kpi"), None)

    if any(word in text for word in _VALUE_WORDS):
        steps = [
            "I cannot read data values; I only know how this dashboard is put together. "
            "Here is how to get to the number yourself:"
        ]
        n = 1
        if slicer is not None:
            steps.append(f"{n}. Use the {hl(slicer.id, 'body', slicer.title)} control to narrow the period first.")
            n += 1
        legend_chart = next((v for v in charts if v.legend_field), None)
        if legend_chart is not None:
            steps.append(
                f"{n}. In {hl(legend_chart.id, 'body', legend_chart.title)}, pick the series you need via the "
                f"{hl(legend_chart.id, 'legend', 'legend')}."
            )
            n += 1
        other = next((v for v in charts if v is not legend_chart), None)
        if other is not None:
            steps.append(
                f"{n}. Click a mark to cross-filter {hl(other.id, 'body', other.title)}, then hover the mark "
                "you care about and read the value from its tooltip."
            )
        return NOT_IN_DATA_SENTINEL + "\n" + "\n".join(steps)

    if "drill" in text:
        drillable = target(lambda v: bool(v.drill)) or next((v for v in charts if v.drill), None)
        if drillable is not None:
            path = " to ".join(drillable.drill)
            return "\n".join(
                [
                    f"1. Turn on drill-down for {hl(drillable.id, 'body', drillable.title)} (the arrow control in its corner).",
                    f"2. Drill down moves from {path}: click a mark in the {hl(drillable.id, 'data', 'plot area')} to descend one level.",
                    "3. Use the up arrow to come back to the higher level.",
                ]
            )

    if "legend" in text or "colors" in text or "colours" in text:
        legend_target = target(lambda v: bool(v.legend_field)) or next((v for v in charts if v.legend_field), None)
        if legend_target is not None:
            return "\n".join(
                [
                    f"1. Find the {hl(legend_target.id, 'legend', 'legend')} of \"{legend_target.title}\".",
                    f"2. The legend maps colors to {_short_field(legend_target.legend_field)}; entries read in their listed order.",
                    "3. Click a legend entry to highlight that series in the chart.",
                ]
            )

    if "axis" in text or "scaling" in text or "scale" in text:
        wants_y = "y-axis" in text or "y axis" in text or "vertical" in text
        axis_target = target(lambda v: v.axis_x is not None or v.axis_y is not None)
        if axis_target is None:
            with_axes = [v for v in charts if v.axis_x or v.axis_y]
            if len(with_axes) == 1:
                axis_target = with_axes[0]
            elif with_axes:
                titles = ", ".join(f'"{v.title}"' for v in with_axes)
                return f"Which visual do you mean: {titles}?"
        if axis_target is not None:
            axis = axis_target.axis_y if wants_y else (axis_target.axis_x or axis_target.axis_y)
            part = "axis-y" if axis is axis_target.axis_y else "axis-x"
            axis_name = "Y-axis" if part == "axis-y" else "X-axis"
            if axis is None:
                return "\n".join(
                    [
                        f"1. \"{axis_target.title}\" has no {axis_name.lower()}; it encodes without one.",
                        f"2. Lasso {hl(axis_target.id, 'body', axis_target.title)} and open its help menu to see how to read it.",
                    ]
                )
            field_name, scale, unit = axis
            if scale == "categorical":
                reading = f"The {axis_name} lists {_short_field(field_name)} as categories"
            elif scale == "temporal":
                reading = f"The {axis_name} orders {_short_field(field_name)} in time order"
            elif unit:
                reading = f"The {axis_name} represents values in {unit} on a continuous scale"
            else:
                reading = f"The {axis_name} represents {_short_field(field_name)} values on a continuous scale"
            return "\n".join(
                [
                    f"1. Look at the {hl(axis_target.id, part, axis_name.lower())} of \"{axis_target.title}\".",
                    f"2. {reading}; read the tick labels to anchor yourself.",
                    "3. Hover any mark to check it against the axis.",
                ]
            )

    if "filter" in text and (("other" in text) or any(v.mentions_score(text) > 0 and v.cross_filters for v in charts) or (attached is not None and attached.cross_filters and "here" in text)):
        source = target(lambda v: bool(v.cross_filters)) or next((v for v in charts if v.cross_filters), None)
        if source is not None:
            titles = {v.id: v.title for v in visuals}
            listed = ", ".join(
                hl(t, "body", titles.get(t, t)) for t in source.cross_filters[:3]
            ) or "the linked visuals"
            return "\n".join(
                [
                    f"1. Click a mark in {hl(source.id, 'body', source.title)}.",
                    f"2. The selection cross-filters {listed}.",
                    "3. Click the same mark again to clear the selection.",
                ]
            )

    if slicer is not None and any(w in text for w in ("filter", "narrow", "date", "period", "range", "slicer")):
        return "\n".join(
            [
                f"1. Open the {hl(slicer.id, 'body', slicer.title)} control.",
                f"2. Drag its handles to the {_short_field(slicer.bound_field)} range you care about.",
                "3. Every linked visual updates to the filtered range.",
            ]
        )

    if first_kpi is not None and ("kpi" in text or "card" in text):
        return "\n".join(
            [
                f"1. Find the KPI cards along the top, for example {hl(first_kpi.id, 'body', first_kpi.title)}.",
                "2. Each card shows one headline measure; its title names the measure.",
                "3. KPI cards are read-only: they do not react to clicks, so use the other visuals to dig deeper.",
            ]
        )

    if any(phrase in text for phrase in _DESCRIBE_PHRASES):
        described = target()
        if described is not None:
            lines = [f"1. Start with the {hl(described.id, 'title', 'title')}: \"{described.title}\"."]
            step = 2
            if described.axis_x or described.axis_y:
                bits = []
                if described.axis_x:
                    f, s, u = described.axis_x
                    bits.append(f"the {hl(described.id, 'axis-x', 'x-axis')} shows {_short_field(f)}" + (f" in {u}" if u else ""))
                if described.axis_y:
                    f, s, u = described.axis_y
                    bits.append(f"the {hl(described.id, 'axis-y', 'y-axis')} shows {_short_field(f)}" + (f" in {u}" if u else ""))
                lines.append(f"{step}. Read the axes: " + " and ".join(bits) + ".")
                step += 1
            if described.legend_field:
                lines.append(f"{step}. The {hl(described.id, 'legend', 'legend')} splits marks by {_short_field(described.legend_field)}.")
                step += 1
            lines.append(f"{step}. Hover any mark for its details; lasso a region to open the help menu.")
            return "\n".join(lines)

    if any(word in text for word in _INSIGHT_WORDS):
        subject = target() or (charts[0] if charts else None)
        if subject is not None:
            return "\n".join(
                [
                    f"1. Open the help menu on {hl(subject.id, 'body', subject.title)} by lassoing it.",
                    "2. Check the Insight section for the author's notes on trends and drivers.",
                    "3. Pair that with the Read section if any encoding is unfamiliar.",
                ]
            )

    lines = []
    n = 1
    if first_kpi is not None:
        lines.append(f"{n}. Skim the KPI cards first, for example {hl(first_kpi.id, 'body', first_kpi.title)}.")
        n += 1
    if slicer is not None:
        lines.append(f"{n}. Set the period with the {hl(slicer.id, 'body', slicer.title)} control.")
        n += 1
    if charts:
        listed = ", ".join(hl(v.id, "body", v.title) for v in charts)
        lines.append(f"{n}. Explore the charts: {listed}.")
        n += 1
    lines.append(f"{n}. Lasso any region of a chart to open its contextual help menu.")
    return "\n".join(lines)


def _short_field(field_name: str) -> str:
    return field_name.split(".")[-1] if field_name else "the bound field"


# ---------------------------------------------------------------------------
# Voice session tokens
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EphemeralVoiceToken:
    token: str
    session_id: str
    expires_at: float

    def to_dict(self) -> dict:
        # Deliberately excludes session internals: the response body is
        # token + expiry only.
        return {"token": self.token, "expiresAt": self.expires_at}


@dataclass
class _TokenRecord:
    session_id: str
    expires_at: float
    redeemed: bool = False


class VoiceTokenService:
    """Mint and redeem short-lived, single-use voice session tokens.

    Tokens carry 128 bits of randomness, expire after `ttl_s`, and can be
    redeemed exactly once. They share no material with any API key. The
    clock is injectable so expiry is testable without sleeping.
    """

    def __init__(
        self,
        session_exists: Callable[[str], bool],
        ttl_s: float = DEFAULT_VOICE_TOKEN_TTL_S,
        clock: Callable[[], float] = time.time,
    ) -> None:
        self._session_exists = session_exists
        self._ttl_s = ttl_s
        self._clock = clock
        self._records: dict[str, _TokenRecord] = {}
        self._lock = threading.Lock()

    def mint(self, session_id: str) -> EphemeralVoiceToken:
        if not self._session_exists(session_id):
            raise UnknownSession(f"no session {session_id!r}")
        token = secrets.token_urlsafe(16)  # 16 bytes = 128 bits
        expires_at = self._clock() + self._ttl_s
        with self._lock:
            self._records[token] = _TokenRecord(session_id=session_id, expires_at=expires_at)
        return EphemeralVoiceToken(token=token, session_id=session_id, expires_at=expires_at)

    def redeem(self, token: str) -> str:
        """Return the session id for a live token; single-use."""
        with self._lock:
            record = self._records.get(token)
            if record is None:
                raise TokenUnknown("token was never minted")
            if record.redeemed:
                raise TokenReused("token was already redeemed")
            if self._clock() > record.expires_at:
                raise TokenExpired("token expired")
            record.redeemed = True
            return record.session_id
