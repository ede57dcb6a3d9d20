"""REST surface: the read path, the write path, and fact management.

Static bearer tokens map to principals; a user-role principal can only
touch its own facts, an admin can touch anyone's. Every mutation flows
through the store and is therefore journaled.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Query, Request, Response
from pydantic import BaseModel, ConfigDict

from .config import ServiceConfig, TokenEntry
from .extraction import ConversationTurn
from .model import Actor, Category, MemoryType, Scope, format_timestamp
from .pipeline import MemoryEngine
from .store import (
    FactQuery,
    QueryOrder,
    UnknownFactError,
    ValidationFailedError,
)

logger = logging.getLogger(__name__)


@dataclass
class Principal:
    user_id: str
    role: str
    token_fingerprint: str

    @property
    def is_admin(self) -> bool:
        return self.role == "admin"


@dataclass
class SummaryReport:
    active_count: int
    long_term_count: int
    short_term_count: int
    by_category: dict[str, int]
    by_scope: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "active_count": self.active_count,
            "long_term_count": self.long_term_count,
            "short_term_count": self.short_term_count,
            "by_category": self.by_category,
            "by_scope": self.by_scope,
        }


def summarize(engine: MemoryEngine, user_id: str) -> SummaryReport:
    store = engine.store
    active = store.count(FactQuery(user_id=user_id, is_active=True))
    long_term = store.count(FactQuery(user_id=user_id, is_active=True,
                                      memory_type=MemoryType.LONG_TERM))
    by_category = {}
    for category in Category:
        n = store.count(FactQuery(user_id=user_id, is_active=True, category=category))
        if n:
            by_category[category.value] = n
    by_scope = {}
    for scope in Scope:
        n = store.count(FactQuery(user_id=user_id, is_active=True, scope=scope))
        if n:
            by_scope[scope.value] = n
    return SummaryReport(
        active_count=active,
        long_term_count=long_term,
        short_term_count=active - long_term,
        by_category=by_category,
        by_scope=by_scope,
    )


# --- request bodies ---------------------------------------------------------

class TurnBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    role: str
    text: str
    turn_number: int = 0


class ProcessBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    turns: list[TurnBody]
    agent_id: Optional[str] = None
    flow_id: Optional[str] = None


class ContextBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    cap: int = 30
    touch: bool = True


class PatchBody(BaseModel):
    # restricted field set; anything else is rejected outright
    model_config = ConfigDict(extra="forbid")
    subject: Optional[str] = None
    relation: Optional[str] = None
    value: Optional[str] = None
    category: Optional[str] = None
    memory_type: Optional[str] = None
    confidence: Optional[float] = None
    is_active: Optional[bool] = None


class ClearBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    scope: Optional[str] = None
    agent_id: Optional[str] = None
    flow_id: Optional[str] = None


def create_app(engine: MemoryEngine, tokens: dict[str, TokenEntry],
               request_log_path: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="neusymms", version="0.1.0", docs_url=None, redoc_url=None)

    principals = {
        token: Principal(
            user_id=entry.user_id,
            role=entry.role,
            token_fingerprint=hashlib.sha256(token.encode()).hexdigest()[:12],
        )
        for token, entry in tokens.items()
    }

    def authenticate(authorization: Optional[str] = Header(default=None)) -> Principal:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        principal = principals.get(authorization[len("Bearer "):])
        if principal is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return principal

    def authorize(principal: Principal, user_id: str) -> None:
        if not principal.is_admin and principal.user_id != user_id:
            raise HTTPException(status_code=403,
                                detail="cannot access another user's facts")

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        started = time.monotonic()
        response = await call_next(request)
        record = {
            "ts": format_timestamp(engine.store.clock()),
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "duration_ms": round((time.monotonic() - started) * 1000, 3),
        }
        if request_log_path:
            with open(request_log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
        else:
            logger.info("request %s", json.dumps(record))
        return response

    @app.exception_handler(UnknownFactError)
    async def unknown_fact(_request, exc: UnknownFactError):
        return Response(content=json.dumps({"detail": str(exc)}), status_code=404,
                        media_type="application/json")

    @app.exception_handler(ValidationFailedError)
    async def invalid_fields(_request, exc: ValidationFailedError):
        detail = [{"field": i.field, "message": i.message} for i in exc.issues]
        return Response(content=json.dumps({"detail": detail}), status_code=422,
                        media_type="application/json")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/users/{user_id}/memory:process")
    def process_memory(user_id: str, body: ProcessBody,
                       principal: Principal = Depends(authenticate)):
        authorize(principal, user_id)
        if not body.turns:
            raise HTTPException(status_code=400, detail="turns must be non-empty")
        try:
            turns = [ConversationTurn(t.role, t.text, t.turn_number) for t in body.turns]
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        report = engine.process_memory(user_id, turns,
                                       agent_id=body.agent_id, flow_id=body.flow_id)
        payload = report.to_dict()
        if engine.trace_path:
            payload["trace_path"] = engine.trace_path
        return payload

    @app.post("/v1/users/{user_id}/memory:context")
    def memory_context(user_id: str, body: Optional[ContextBody] = None,
                       principal: Principal = Depends(authenticate)):
        authorize(principal, user_id)
        body = body or ContextBody()
        if body.cap < 1:
            raise HTTPException(status_code=400, detail="cap must be >= 1")
        block = engine.build_context(user_id, cap=body.cap, touch=body.touch)
        return {"text": block.text, "fact_ids": block.fact_ids,
                "truncated": block.truncated, "error": block.error}

    def _parse_enum(value: Optional[str], enum_cls, name: str):
        if value is None:
            return None
        try:
            return enum_cls(value)
        except ValueError:
            raise HTTPException(status_code=400,
                                detail=f"invalid {name}: {value!r}") from None

    @app.get("/v1/users/{user_id}/facts")
    def list_facts(user_id: str,
                   principal: Principal = Depends(authenticate),
                   scope: Optional[str] = None,
                   agent_id: Optional[str] = None,
                   flow_id: Optional[str] = None,
                   category: Optional[str] = None,
                   memory_type: Optional[str] = None,
                   is_active: str = "true",
                   search: Optional[str] = None,
                   order: str = "injection_order",
                   limit: int = Query(default=50, ge=1, le=1000),
                   offset: int = Query(default=0, ge=0),
                   snapshot_seq: Optional[int] = None):
        authorize(principal, user_id)
        if is_active not in ("true", "false", "all"):
            raise HTTPException(status_code=400, detail="is_active must be true|false|all")
        try:
            query_order = QueryOrder(order)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"invalid order: {order!r}") from None
        snapshot = snapshot_seq if snapshot_seq is not None else engine.store.last_seq()
        q = FactQuery(
            user_id=user_id,
            scope=_parse_enum(scope, Scope, "scope"),
            agent_id=agent_id,
            flow_id=flow_id,
            category=_parse_enum(category, Category, "category"),
            memory_type=_parse_enum(memory_type, MemoryType, "memory_type"),
            is_active=None if is_active == "all" else is_active == "true",
            search=search,
            order=query_order,
            limit=limit,
            offset=offset,
            snapshot_seq=snapshot,
        )
        facts = engine.store.query(q)
        total = engine.store.count(q)
        return {
            "facts": [f.to_dict() for f in facts],
            "total": total,
            "limit": limit,
            "offset": offset,
            "snapshot_seq": snapshot,
        }

    @app.get("/v1/users/{user_id}/facts/summary")
    def fact_summary(user_id: str, principal: Principal = Depends(authenticate)):
        authorize(principal, user_id)
        return summarize(engine, user_id).to_dict()

    @app.patch("/v1/facts/{fact_id}")
    def patch_fact(fact_id: str, body: PatchBody,
                   principal: Principal = Depends(authenticate)):
        fact = engine.store.get(fact_id)  # raises UnknownFactError -> 404
        authorize(principal, fact.user_id)
        fields = {k: v for k, v in body.model_dump().items() if v is not None}
        if not fields:
            raise HTTPException(status_code=400, detail="no fields to update")
        if "category" in fields:
            fields["category"] = _parse_enum(fields["category"], Category, "category")
        if "memory_type" in fields:
            fields["memory_type"] = _parse_enum(fields["memory_type"], MemoryType,
                                                "memory_type")
        updated = engine.store.update_fields(fact_id, fields, actor=Actor.API)
        return updated.to_dict()

    @app.delete("/v1/facts/{fact_id}")
    def delete_fact(fact_id: str, principal: Principal = Depends(authenticate)):
        fact = engine.store.get(fact_id)
        authorize(principal, fact.user_id)
        updated = engine.store.deactivate(fact_id, "deleted via api", Actor.API)
        return updated.to_dict()

    @app.post("/v1/users/{user_id}/facts:clear")
    def clear_facts(user_id: str, body: Optional[ClearBody] = None,
                    principal: Principal = Depends(authenticate)):
        authorize(principal, user_id)
        body = body or ClearBody()
        count = engine.store.clear(
            user_id,
            scope=_parse_enum(body.scope, Scope, "scope"),
            agent_id=body.agent_id,
            flow_id=body.flow_id,
            actor=Actor.API,
        )
        return {"cleared": count}

    return app


def build_engine(cfg: ServiceConfig) -> MemoryEngine:
    """Assemble a MemoryEngine from service configuration."""
    from .ruledsl import parse_rule_pack
    from .store import FactStore

    pack = None
    if cfg.rule_pack_path:
        pack = parse_rule_pack(open(cfg.rule_pack_path, encoding="utf-8").read())
    store = FactStore(journal_path=cfg.journal_path)
    return MemoryEngine(
        store,
        pack=pack,
        extractor=cfg.extractor,
        lifecycle_policy=cfg.lifecycle,
        trace_path=cfg.trace_path if cfg.trace_enabled else None,
    )
