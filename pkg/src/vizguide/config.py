"""Server settings: config file, environment variables, CLI flags.

Precedence, lowest to highest: config file, environment, CLI flags.
Environment variables use the `ONBOARD_` prefix. The API key itself is
never part of the settings object; only the NAME of the variable holding
it is, and the gateway reads the value at call time.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .gateway import DEFAULT_VOICE_TOKEN_TTL_S, ProviderConfig, ProviderMode

ENV_PREFIX = "ONBOARD_"


@dataclass(frozen=True)
class Settings:
    host: str = "127.0.0.1"
    port: int = 8423
    provider_mode: ProviderMode = ProviderMode.MOCK
    endpoint_url: str = ""
    model_name: str = "onboarding-default"
    api_key_env_var: str = "ONBOARD_API_KEY"
    request_timeout_ms: int = 15_000
    voice_token_ttl_s: float = DEFAULT_VOICE_TOKEN_TTL_S
    persist_dir: str = ""
    dashboards: tuple[str, ...] = ()  # spec paths to preload
    ui_dir: str = ""  # static frontend bundle, served at /ui when set

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            mode=self.provider_mode,
            endpoint_url=self.endpoint_url,
            model_name=self.model_name,
            api_key_env_var=self.api_key_env_var,
            request_timeout_ms=self.request_timeout_ms,
        )


_FILE_KEYS = {
    "host": str,
    "port": int,
    "provider": str,
    "endpointUrl": str,
    "modelName": str,
    "apiKeyEnvVar": str,
    "requestTimeoutMs": int,
    "voiceTokenTtlS": float,
    "persistDir": str,
    "dashboards": list,
    "uiDir": str,
}


def load_settings(
    config_path: str | None = None,
    env: dict[str, str] | None = None,
    **overrides,
) -> Settings:
    """Merge file, environment, and explicit overrides into Settings."""
    env = os.environ if env is None else env
    values: dict = {}

    if config_path:
        raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
        for key, expected in _FILE_KEYS.items():
            if key in raw:
                if not isinstance(raw[key], expected) and not (expected is float and isinstance(raw[key], int)):
                    raise ValueError(f"config field {key!r} must be {expected.__name__}")
                values[_to_setting_name(key)] = raw[key]

    env_map = {
        "HOST": ("host", str),
        "PORT": ("port", int),
        "PROVIDER": ("provider_mode", str),
        "ENDPOINT_URL": ("endpoint_url", str),
        "MODEL_NAME": ("model_name", str),
        "API_KEY_ENV_VAR": ("api_key_env_var", str),
        "REQUEST_TIMEOUT_MS": ("request_timeout_ms", int),
        "VOICE_TOKEN_TTL_S": ("voice_token_ttl_s", float),
        "PERSIST_DIR": ("persist_dir", str),
        "UI_DIR": ("ui_dir", str),
    }
    for suffix, (name, cast) in env_map.items():
        raw_value = env.get(ENV_PREFIX + suffix)
        if raw_value is not None:
            values[name] = cast(raw_value)

    for name, value in overrides.items():
        if value is not None:
            values[name] = value

    if "provider_mode" in values and not isinstance(values["provider_mode"], ProviderMode):
        values["provider_mode"] = ProviderMode(values["provider_mode"])
    if "dashboards" in values:
        values["dashboards"] = tuple(values["dashboards"])
    return Settings(**values)


def _to_setting_name(file_key: str) -> str:
    special = {"provider": "provider_mode"}
    if file_key in special:
        return special[file_key]
    out = []
    for ch in file_key:
        if ch.isupper():
            out.append("_")
            out.append(ch.lower())
        else:
            out.append(ch)
    return "".join(out)
