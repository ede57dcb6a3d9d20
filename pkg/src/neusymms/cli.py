"""Operator CLI: serve the API, replay scenarios, run maintenance, edit facts.

Exit codes: 0 success, 1 assertion/state failure, 2 usage or config error.
"""

from __future__ import annotations

import json
import sys
import threading
from pathlib import Path
from typing import Optional

import click

from .config import ConfigError, load_config
from .lifecycle import LifecyclePolicy, run_job
from .model import Actor, Category, MemoryType, Scope, parse_timestamp
from .replay import ScenarioError, run_scenario
from .ruledsl import RulePackError, parse_rule_pack
from .store import FactQuery, FactStore, QueryOrder, StoreError


def _open_store(path: Optional[str], now: Optional[str] = None) -> FactStore:
    clock = None
    if now is not None:
        try:
            fixed = parse_timestamp(now)
        except ValueError as exc:
            raise click.UsageError(f"--now is not RFC 3339: {exc}")
        clock = lambda: fixed
    kwargs = {"clock": clock} if clock else {}
    return FactStore(journal_path=path, **kwargs)


@click.group()
@click.version_option(package_name="neusymms")
def main() -> None:
    """NeuSymMS: rule-driven agent memory."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="Service config YAML.")
def serve(config_path: str) -> None:
    """Run the REST service (with the background lifecycle job)."""
    import uvicorn

    from .api import build_engine, create_app

    try:
        cfg = load_config(config_path)
        engine = build_engine(cfg)
    except (ConfigError, RulePackError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)

    app = create_app(engine, cfg.tokens, request_log_path=cfg.request_log_path)

    stop = threading.Event()

    def lifecycle_loop() -> None:
        interval = cfg.lifecycle.job_interval_minutes * 60
        while not stop.wait(interval):
            engine.run_lifecycle()

    worker = threading.Thread(target=lifecycle_loop, daemon=True,
                              name="lifecycle-job")
    worker.start()
    try:
        uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    except OSError as exc:
        click.echo(f"error: cannot bind {cfg.host}:{cfg.port}: {exc}", err=True)
        sys.exit(2)
    finally:
        stop.set()


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--store", "store_path", type=click.Path(), default=None,
              help="Journal path; default is an in-memory store.")
@click.option("--rule-pack", "pack_path", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write the step report as JSON.")
def replay(scenario: str, store_path: Optional[str], pack_path: Optional[str],
           report_path: Optional[str]) -> None:
    """Replay a scenario file; nonzero exit on any failed step."""
    pack = None
    if pack_path:
        try:
            pack = parse_rule_pack(Path(pack_path).read_text(encoding="utf-8"))
        except RulePackError as exc:
            click.echo(f"error: rule pack: {exc}", err=True)
            sys.exit(2)
    try:
        result = run_scenario(scenario, pack=pack, journal_path=store_path)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for step in result.results:
        mark = "ok" if step.ok else "FAIL"
        click.echo(f"[{mark}] step {step.index} {step.op}: {step.detail}")
    if report_path:
        Path(report_path).write_text(json.dumps(result.to_dict(), indent=2),
                                     encoding="utf-8")
    if not result.passed:
        click.echo(f"scenario {result.name}: FAILED", err=True)
        sys.exit(1)
    click.echo(f"scenario {result.name}: passed")


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--now", default=None, help="RFC 3339 override for the job clock.")
@click.option("--promotion-threshold", type=int, default=3, show_default=True)
@click.option("--ttl-hours", type=float, default=24.0, show_default=True)
@click.option("--access-ceiling", type=int, default=0, show_default=True)
def prune(store_path: str, now: Optional[str], promotion_threshold: int,
          ttl_hours: float, access_ceiling: int) -> None:
    """Run one lifecycle pass (promotions, then TTL pruning)."""
    store = _open_store(store_path, now)
    policy = LifecyclePolicy(promotion_threshold=promotion_threshold,
                             short_term_ttl_hours=ttl_hours,
                             prune_access_ceiling=access_ceiling)
    report = run_job(store, policy, now=store.clock())
    click.echo(json.dumps(report.to_dict()))
    store.close()


@main.command()
@click.option("--store", "store_path", required=True, type=click.Path())
def compact(store_path: str) -> None:
    """Rewrite the journal to just the surviving facts."""
    store = _open_store(store_path)
    kept = store.compact()
    click.echo(f"compacted journal: {kept} facts")
    store.close()


@main.group()
def facts() -> None:
    """Inspect and edit stored facts."""


def _parse_choice(value: Optional[str], enum_cls, name: str):
    if value is None:
        return None
    try:
        return enum_cls(value)
    except ValueError:
        raise click.UsageError(f"invalid {name}: {value!r}")


@facts.command("ls")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--user", required=True)
@click.option("--scope", default=None)
@click.option("--category", default=None)
@click.option("--type", "memory_type", default=None)
@click.option("--active/--inactive", "active", default=True)
@click.option("--all", "show_all", is_flag=True, help="Include inactive facts.")
@click.option("--search", default=None)
@click.option("--limit", type=int, default=50, show_default=True)
@click.option("--offset", type=int, default=0)
@click.option("--json", "as_json", is_flag=True)
def facts_ls(store_path: str, user: str, scope: Optional[str], category: Optional[str],
             memory_type: Optional[str], active: bool, show_all: bool,
             search: Optional[str], limit: int, offset: int, as_json: bool) -> None:
    """List facts in injection order."""
    store = _open_store(store_path)
    q = FactQuery(
        user_id=user,
        scope=_parse_choice(scope, Scope, "scope"),
        category=_parse_choice(category, Category, "category"),
        memory_type=_parse_choice(memory_type, MemoryType, "type"),
        is_active=None if show_all else active,
        search=search,
        order=QueryOrder.INJECTION,
        limit=limit,
        offset=offset,
    )
    rows = store.query(q)
    if as_json:
        click.echo(json.dumps([f.to_dict() for f in rows], indent=2))
    else:
        for f in rows:
            flag = "LT" if f.memory_type == MemoryType.LONG_TERM else "ST"
            state = "" if f.is_active else " [inactive]"
            click.echo(f"{f.id[:8]}  [{flag}/{f.category.value}] "
                       f"{f.subject} {f.relation} {f.value}"
                       f"  (conf={f.confidence:g} reads={f.access_count}){state}")
    store.close()


@facts.command("edit")
@click.argument("fact_id")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--subject", default=None)
@click.option("--relation", default=None)
@click.option("--value", default=None)
@click.option("--category", default=None)
@click.option("--type", "memory_type", default=None)
@click.option("--confidence", type=float, default=None)
@click.option("--activate/--deactivate", "activate", default=None)
def facts_edit(fact_id: str, store_path: str, subject: Optional[str],
               relation: Optional[str], value: Optional[str], category: Optional[str],
               memory_type: Optional[str], confidence: Optional[float],
               activate: Optional[bool]) -> None:
    """Edit one fact's fields."""
    fields: dict = {}
    if subject is not None:
        fields["subject"] = subject
    if relation is not None:
        fields["relation"] = relation
    if value is not None:
        fields["value"] = value
    if category is not None:
        fields["category"] = _parse_choice(category, Category, "category")
    if memory_type is not None:
        fields["memory_type"] = _parse_choice(memory_type, MemoryType, "type")
    if confidence is not None:
        fields["confidence"] = confidence
    if activate is not None:
        fields["is_active"] = activate
    if not fields:
        raise click.UsageError("nothing to edit")
    store = _open_store(store_path)
    try:
        updated = store.update_fields(fact_id, fields, actor=Actor.CLI)
    except StoreError as exc:
        click.echo(f"error: {exc}", err=True)
        store.close()
        sys.exit(1)
    click.echo(json.dumps(updated.to_dict(), indent=2))
    store.close()


@facts.command("clear")
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--user", required=True)
@click.option("--scope", default=None)
@click.option("--agent-id", default=None)
@click.option("--flow-id", default=None)
def facts_clear(store_path: str, user: str, scope: Optional[str],
                agent_id: Optional[str], flow_id: Optional[str]) -> None:
    """Soft-deactivate a user's active facts (optionally one scope)."""
    store = _open_store(store_path)
    count = store.clear(user, scope=_parse_choice(scope, Scope, "scope"),
                        agent_id=agent_id, flow_id=flow_id, actor=Actor.CLI)
    click.echo(f"cleared {count} facts")
    store.close()


if __name__ == "__main__":
    main()
