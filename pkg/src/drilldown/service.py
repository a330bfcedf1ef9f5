"""HTTP facade: datasets and sessions over JSON."""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from .rules import RuleError, WeightConfig, rule_to_text
from .session import Session, SessionConfig, SessionError
from .table import Table, TableError, load_dataset


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class DatasetRecord:
    id: str
    path: str
    table: Table
    options: dict

    def describe(self) -> dict:
        return {
            "id": self.id,
            "path": self.path,
            "rows": self.table.num_rows,
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "distinct": c.distinct_count,
                }
                for c in self.table.columns
            ],
            "measures": list(self.table.measures),
            "options": self.options,
        }


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    dataset_dir: str = "."
    memory: int = 50000
    min_ss: int = 5000
    session_ttl: float = 1800.0

    @staticmethod
    def load(path=None) -> "ServiceConfig":
        cfg = ServiceConfig()
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line or line.startswith("#") or "=" not in line:
                        continue
                    key, val = (s.strip() for s in line.split("=", 1))
                    if key == "host":
                        cfg.host = val
                    elif key == "port":
                        cfg.port = int(val)
                    elif key == "dataset_dir":
                        cfg.dataset_dir = val
                    elif key == "memory":
                        cfg.memory = int(val)
                    elif key == "min_ss":
                        cfg.min_ss = int(val)
                    elif key == "session_ttl":
                        cfg.session_ttl = float(val)
        cfg.host = os.environ.get("DRILLDOWN_HOST", cfg.host)
        cfg.dataset_dir = os.environ.get("DRILLDOWN_DATASET_DIR", cfg.dataset_dir)
        return cfg


def _weight_config(spec: dict | None) -> WeightConfig:
    spec = spec or {}
    kind = spec.get("kind", "size")
    kwargs = {
        "favored": {k: float(v) for k, v in spec.get("favored", {}).items()},
        "ignored": frozenset(spec.get("ignored", ())),
    }
    if kind == "parametric":
        return WeightConfig.parametric(
            spec.get("column_weights", {}), float(spec.get("exponent", 1.0)), **kwargs
        )
    return WeightConfig(kind=kind, **kwargs)


def _session_config(spec: dict | None, service: ServiceConfig) -> SessionConfig:
    spec = spec or {}
    aggregate = spec.get("aggregate", "count")
    if isinstance(aggregate, dict) and "sum" in aggregate:
        aggregate = ("sum", aggregate["sum"])
    m_w = spec.get("m_w")
    if m_w in ("auto", None):
        m_w = None
    return SessionConfig(
        k=int(spec.get("k", 4)),
        m_w=m_w,
        min_ss=int(spec.get("min_ss", service.min_ss)),
        memory=int(spec.get("memory", service.memory)),
        weight=_weight_config(spec.get("weight")),
        aggregate=aggregate,
        time_limit=spec.get("time_limit", 5.0),
        seed=int(spec.get("seed", 0)),
    )


@dataclass
class _LiveSession:
    session: Session
    last_used: float = field(default_factory=time.monotonic)
    # one mutation in flight per session; a plain Lock so a streaming
    # generator thread can release what the handler thread acquired
    gate: threading.Lock = field(default_factory=threading.Lock)

    def touch(self):
        self.last_used = time.monotonic()


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="drilldown", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    datasets: dict[str, DatasetRecord] = {}
    sessions: dict[str, _LiveSession] = {}
    registry_lock = threading.Lock()
    app.state.datasets = datasets
    app.state.sessions = sessions
    app.state.config = config

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": exc.message}
        )

    def _purge_idle():
        now = time.monotonic()
        for sid in [
            s for s, live in sessions.items() if now - live.last_used > config.session_ttl
        ]:
            sessions.pop(sid, None)

    def _dataset(dataset_id: str) -> DatasetRecord:
        rec = datasets.get(dataset_id)
        if rec is None:
            raise ApiError(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        return rec

    def _session(session_id: str) -> _LiveSession:
        _purge_idle()
        live = sessions.get(session_id)
        if live is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        live.touch()
        return live

    def _tree(session: Session) -> dict:
        # the session lock makes the serialized tree a consistent snapshot
        # even while a prefetch install is in flight
        with session.lock:
            return session.serialize()

    def _locked(live: _LiveSession):
        if not live.gate.acquire(blocking=False):
            raise ApiError(409, "busy", "another mutation is in flight on this session")
        return live.gate

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/datasets")
    async def register_dataset(request: Request):
        body = await request.json()
        path = body.get("path")
        if not path:
            raise ApiError(400, "bad_request", "body must name a csv 'path'")
        dataset_id = body.get("id") or Path(path).stem
        if dataset_id in datasets:
            raise ApiError(400, "duplicate_dataset", f"dataset {dataset_id!r} exists")
        full = Path(config.dataset_dir) / path
        options = body.get("options", {})
        schema = body.get("schema")
        try:
            table = load_dataset(
                full,
                schema_path=(Path(config.dataset_dir) / schema) if schema else None,
                header=options.get("header", True),
                measure_columns=options.get("measure_columns", ()),
                na_policy=options.get("na_policy", "keep"),
                delimiter=options.get("delimiter", ","),
            )
            if "columns" in options:
                table = table.restrict_columns(int(options["columns"]))
        except (OSError, TableError) as e:
            raise ApiError(400, "bad_dataset", str(e))
        with registry_lock:
            datasets[dataset_id] = DatasetRecord(dataset_id, str(path), table, options)
        return datasets[dataset_id].describe()

    @app.get("/datasets")
    def list_datasets():
        return [rec.describe() for rec in datasets.values()]

    @app.post("/sessions")
    async def create_session(request: Request):
        body = await request.json()
        rec = _dataset(body.get("dataset_id", ""))
        try:
            session = Session(rec.table, _session_config(body.get("config"), config))
        except (SessionError, RuleError, TableError) as e:
            raise ApiError(400, getattr(e, "code", "bad_config"), str(e))
        session_id = uuid.uuid4().hex
        sessions[session_id] = _LiveSession(session)
        return {"session_id": session_id, "tree": _tree(session)}

    @app.get("/sessions/{session_id}/tree")
    def get_tree(session_id: str):
        live = _session(session_id)
        return _tree(live.session)

    def _mutate(session_id: str, fn, stream: bool = False):
        live = _session(session_id)
        lock = _locked(live)
        try:
            fn(live.session)
            return _tree(live.session)
        except SessionError as e:
            raise ApiError(400, e.code, str(e))
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/expand")
    async def expand(session_id: str, request: Request):
        body = await request.json()
        path = body.get("path")
        if path is None:
            raise ApiError(400, "bad_request", "body must name a rule 'path'")
        live = _session(session_id)
        if body.get("stream"):
            return _streaming_expand(live, path, None)
        return _mutate(session_id, lambda s: s.expand(s.node_by_text(path).rule))

    @app.post("/sessions/{session_id}/star")
    async def star(session_id: str, request: Request):
        body = await request.json()
        path, column = body.get("path"), body.get("column")
        if path is None or column is None:
            raise ApiError(400, "bad_request", "body must carry 'path' and 'column'")
        live = _session(session_id)
        try:
            live.session.table.column_index(column)
        except TableError as e:
            raise ApiError(400, "bad_column", str(e))
        if body.get("stream"):
            return _streaming_expand(live, path, column)
        return _mutate(
            session_id, lambda s: s.expand_star(s.node_by_text(path).rule, column)
        )

    def _streaming_expand(live: _LiveSession, path: str, column: str | None):
        import queue

        lock = _locked(live)
        session = live.session
        items: queue.Queue = queue.Queue()

        def emit(entry):
            items.put(("rule", entry))

        def run():
            try:
                node = session.node_by_text(path)
                session.expand(node.rule, star_column=column, emit=emit)
                items.put(("done", None))
            except SessionError as e:
                items.put(("error", e))

        worker = threading.Thread(target=run, daemon=True)

        def generate():
            try:
                worker.start()
                while True:
                    kind, payload = items.get()
                    if kind == "rule":
                        yield json.dumps(
                            {
                                "rule": rule_to_text(payload.rule, session.table),
                                "count": payload.count,
                                "weight": payload.weight,
                            }
                        ) + "\n"
                    elif kind == "error":
                        yield json.dumps(
                            {"error": {"code": payload.code, "message": str(payload)}}
                        ) + "\n"
                        break
                    else:
                        yield json.dumps({"tree": _tree(session)}) + "\n"
                        break
                worker.join()
            finally:
                lock.release()

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    @app.post("/sessions/{session_id}/collapse")
    async def collapse(session_id: str, request: Request):
        body = await request.json()
        path = body.get("path")
        if path is None:
            raise ApiError(400, "bad_request", "body must name a rule 'path'")
        return _mutate(session_id, lambda s: s.collapse(s.node_by_text(path).rule))

    @app.post("/sessions/{session_id}/drill")
    async def regular_drill(session_id: str, request: Request):
        body = await request.json()
        path, column = body.get("path"), body.get("column")
        if path is None or column is None:
            raise ApiError(400, "bad_request", "body must carry 'path' and 'column'")
        return _mutate(
            session_id,
            lambda s: s.emulate_regular_drilldown(s.node_by_text(path).rule, column),
        )

    @app.put("/sessions/{session_id}/config")
    async def update_config(session_id: str, request: Request):
        body = await request.json()
        live = _session(session_id)
        lock = _locked(live)
        try:
            session = live.session
            cfg = session.config
            if "k" in body:
                cfg.k = int(body["k"])
                if cfg.k < 1:
                    raise ApiError(400, "bad_config", "k must be >= 1")
            if "weight" in body:
                try:
                    cfg.weight = _weight_config(body["weight"])
                except RuleError as e:
                    raise ApiError(400, "bad_config", str(e))
                session.m_w = (
                    float(body.get("m_w"))
                    if body.get("m_w") not in (None, "auto")
                    else cfg.weight.max_weight(session.table)
                )
            elif "m_w" in body and body["m_w"] not in (None, "auto"):
                session.m_w = float(body["m_w"])
            if "time_limit" in body:
                cfg.time_limit = body["time_limit"]
            return _tree(session)
        finally:
            lock.release()

    @app.get("/sessions/{session_id}/stats")
    def stats(session_id: str):
        live = _session(session_id)
        session = live.session
        pool = session.handler.stats()
        return {
            "pool": {
                "samples": pool.samples,
                "tuples": pool.tuples,
                "memory": pool.memory,
                "find_hits": pool.find_hits,
                "combine_hits": pool.combine_hits,
                "create_passes": pool.create_passes,
            },
            "counters": dict(session.counters),
            "timings": dict(session.timings),
            "m_w": session.m_w,
        }

    return app


def serve(config: ServiceConfig | None = None) -> None:
    import uvicorn

    config = config or ServiceConfig.load()
    uvicorn.run(create_app(config), host=config.host, port=config.port)
