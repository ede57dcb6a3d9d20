"""Service configuration: one YAML file drives the server and CLI.

Errors name the exact key path that is wrong, because "bad config"
messages that don't are useless at 3am.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .extraction import ExtractorConfig
from .lifecycle import LifecyclePolicy


class ConfigError(ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"config key {key_path!r}: {message}")


@dataclass
class TokenEntry:
    user_id: str
    role: str = "user"  # user | admin


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8440
    journal_path: Optional[str] = None
    rule_pack_path: Optional[str] = None
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    lifecycle: LifecyclePolicy = field(default_factory=LifecyclePolicy)
    tokens: dict[str, TokenEntry] = field(default_factory=dict)
    trace_enabled: bool = False
    trace_path: Optional[str] = None
    request_log_path: Optional[str] = None


def _expect(mapping: Any, key_path: str) -> dict:
    if mapping is None:
        return {}
    if not isinstance(mapping, dict):
        raise ConfigError(key_path, f"expected a mapping, got {type(mapping).__name__}")
    return mapping


def _get(mapping: dict, key_path: str, key: str, kind, default):
    value = mapping.get(key, default)
    if value is None:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise ConfigError(f"{key_path}.{key}",
                          f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_config(path: str) -> ServiceConfig:
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(path, "config file not found")
    try:
        raw = yaml.safe_load(file_path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(path, f"not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(path, "top level must be a mapping")

    cfg = ServiceConfig()
    bind = _expect(raw.get("bind"), "bind")
    cfg.host = _get(bind, "bind", "host", str, cfg.host)
    cfg.port = _get(bind, "bind", "port", int, cfg.port)

    store = _expect(raw.get("store"), "store")
    cfg.journal_path = _get(store, "store", "journal_path", str, None)

    pack_path = raw.get("rule_pack")
    if pack_path is not None:
        if not isinstance(pack_path, str):
            raise ConfigError("rule_pack", "expected a path string")
        if not Path(pack_path).exists():
            raise ConfigError("rule_pack", f"rule pack file not found: {pack_path}")
        cfg.rule_pack_path = pack_path

    ex = _expect(raw.get("extractor"), "extractor")
    try:
        cfg.extractor = ExtractorConfig(
            mode=_get(ex, "extractor", "mode", str, "offline"),
            endpoint=_get(ex, "extractor", "endpoint", str, None),
            model=_get(ex, "extractor", "model", str, None),
            temperature=_get(ex, "extractor", "temperature", float, 0.1),
            max_facts=_get(ex, "extractor", "max_facts", int, 10),
            timeout_seconds=_get(ex, "extractor", "timeout_seconds", float, 15.0),
            auth_token=_get(ex, "extractor", "token", str, None),
            include_agent_turns=_get(ex, "extractor", "include_agent_turns", bool, False),
            pattern_path=_get(ex, "extractor", "pattern_path", str, None),
        )
    except ValueError as exc:
        raise ConfigError("extractor", str(exc)) from None
    if cfg.extractor.mode == "remote" and not cfg.extractor.endpoint:
        raise ConfigError("extractor.endpoint", "required when extractor.mode is remote")
    if cfg.extractor.pattern_path and not Path(cfg.extractor.pattern_path).exists():
        raise ConfigError("extractor.pattern_path",
                          f"pattern file not found: {cfg.extractor.pattern_path}")

    lc = _expect(raw.get("lifecycle"), "lifecycle")
    try:
        cfg.lifecycle = LifecyclePolicy(
            promotion_threshold=_get(lc, "lifecycle", "promotion_threshold", int, 3),
            short_term_ttl_hours=_get(lc, "lifecycle", "short_term_ttl_hours", float, 24.0),
            prune_access_ceiling=_get(lc, "lifecycle", "prune_access_ceiling", int, 0),
            job_interval_minutes=_get(lc, "lifecycle", "job_interval_minutes", float, 60.0),
        )
    except ValueError as exc:
        raise ConfigError("lifecycle", str(exc)) from None

    auth = _expect(raw.get("auth"), "auth")
    tokens = _expect(auth.get("tokens"), "auth.tokens")
    for token, entry in tokens.items():
        entry = _expect(entry, f"auth.tokens.{token}")
        user_id = entry.get("user_id")
        if not isinstance(user_id, str) or not user_id:
            raise ConfigError(f"auth.tokens.{token}.user_id", "required non-empty string")
        role = entry.get("role", "user")
        if role not in ("user", "admin"):
            raise ConfigError(f"auth.tokens.{token}.role", f"unknown role {role!r}")
        cfg.tokens[str(token)] = TokenEntry(user_id=user_id, role=role)

    trace = _expect(raw.get("trace"), "trace")
    cfg.trace_enabled = _get(trace, "trace", "enabled", bool, False)
    cfg.trace_path = _get(trace, "trace", "path", str, None)
    if cfg.trace_enabled and not cfg.trace_path:
        raise ConfigError("trace.path", "required when trace.enabled is true")

    log_path = raw.get("request_log")
    if log_path is not None:
        if not isinstance(log_path, str):
            raise ConfigError("request_log", "expected a path string")
        cfg.request_log_path = log_path
    return cfg
