"""HTTP facade for live scaffolding sessions.

Each session owns one GP utility model plus its observation history.  The
client asks for a recommendation for the task at hand, reports the pre-
and post-practice errors it measured, and can render the session's policy
and posterior grids.  Sessions persist as one JSON file each in the state
directory (atomic write-then-rename); an optional autopilot couples a
session to a simulated learner so the whole loop can run unattended.

Human-entered observations are converted to utilities without the
simulator's multiplicative noise (real variability is already in the
reported errors); autopilot steps use the session's configured noise.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .gp import GpModel, KernelParams
from .learners import LearnerGroup, PerformanceError, SimConfig, calc_utility, performance_error
from .policy import BPM_VALUES, derive_seed, encoded_mode_grid, get_practice_mode, induced_policy
from .reports import posterior_grid_rows
from .tasks import NOTE_RANGES, PracticeMode, TaskParameters, TaskSampler, encode

SCHEMA_VERSION = 1


# -- request/response bodies --------------------------------------------------


class SessionCreateBody(BaseModel):
    sim: dict = Field(default_factory=dict)
    gp: dict = Field(default_factory=dict)
    autopilot: str | None = None
    seed: int = 0


class ErrorBody(BaseModel):
    timing: float
    pitch: float


class ObservationBody(BaseModel):
    bpm: int
    note_range: int
    mode: str
    error_pre: ErrorBody
    error_post: ErrorBody


class Session:
    """One learner's scaffolding state; all access goes through its lock."""

    def __init__(self, session_id: str, cfg: SimConfig, gp: GpModel,
                 autopilot: LearnerGroup | None, seed: int):
        self.id = session_id
        self.cfg = cfg
        self.gp = gp
        self.autopilot = autopilot
        self.seed = seed
        self.history: list[dict] = []
        self.created = time.time()
        self.updated = self.created
        self.lock = threading.Lock()
        self.sampler = TaskSampler(derive_seed(seed, 1))
        self.rng = np.random.default_rng(derive_seed(seed, 2))

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "cfg": self.cfg.to_dict(),
            "gp": self.gp.to_dict(),
            "autopilot": None if self.autopilot is None else self.autopilot.value,
            "seed": self.seed,
            "history": self.history,
            "created": self.created,
            "updated": self.updated,
            "sampler_state": _jsonable_rng_state(self.sampler.state),
            "rng_state": _jsonable_rng_state(self.rng.bit_generator.state),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        session = cls(
            session_id=d["id"],
            cfg=SimConfig.from_dict(d["cfg"]),
            gp=GpModel.from_dict(d["gp"]),
            autopilot=None if d.get("autopilot") is None else LearnerGroup(d["autopilot"]),
            seed=int(d.get("seed", 0)),
        )
        session.history = d.get("history", [])
        session.created = d.get("created", time.time())
        session.updated = d.get("updated", session.created)
        if "sampler_state" in d:
            session.sampler.state = _restore_rng_state(d["sampler_state"])
        if "rng_state" in d:
            session.rng.bit_generator.state = _restore_rng_state(d["rng_state"])
        return session


def _jsonable_rng_state(state: dict) -> dict:
    # PCG64 state contains arbitrary-precision ints; stringify for JSON
    out = json.loads(json.dumps(state, default=str))
    return out


def _restore_rng_state(state: dict) -> dict:
    restored = dict(state)
    inner = dict(restored.get("state", {}))
    for key, value in inner.items():
        if isinstance(value, str):
            inner[key] = int(value)
    restored["state"] = inner
    for key in ("has_uint32", "uinteger"):
        if key in restored and isinstance(restored[key], str):
            restored[key] = int(restored[key])
    return restored


class SessionStore:
    """In-memory session map backed by one JSON file per session."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.state_dir / f"{session_id}.json"

    def create(self, cfg: SimConfig, gp: GpModel, autopilot: LearnerGroup | None, seed: int) -> Session:
        session_id = uuid.uuid4().hex
        session = Session(session_id, cfg, gp, autopilot, seed)
        with self._lock:
            self._sessions[session_id] = session
        self.persist(session)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            session = self.load(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def load(self, session_id: str) -> Session | None:
        path = self._path(session_id)
        if not path.exists():
            return None
        with open(path) as fh:
            session = Session.from_dict(json.load(fh))
        with self._lock:
            self._sessions.setdefault(session_id, session)
            return self._sessions[session_id]

    def persist(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(session.to_dict(), fh)
        os.replace(tmp, path)


def _session_summary(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": session.id,
        "point_count": session.gp.n_points,
        "autopilot": None if session.autopilot is None else session.autopilot.value,
        "cfg": session.cfg.to_dict(),
        "gp_params": session.gp.params.to_dict(),
        "created": session.created,
        "updated": session.updated,
    }


def _parse_task(bpm: int, note_range: int) -> TaskParameters:
    try:
        return TaskParameters(bpm=bpm, note_range=note_range)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))


def _recommend(session: Session, tp: TaskParameters) -> dict:
    # read-only: the tie-break generator is derived per request, never the
    # session stream, so recommendations are repeatable and mutate nothing
    tie_rng = np.random.default_rng(derive_seed(session.seed, 1000003 * tp.bpm + tp.note_range))
    mode = get_practice_mode(session.gp, tp, tie_rng)
    posteriors = {}
    for m in PracticeMode:
        post = session.gp.predict(encode(tp, m))
        posteriors[m.value] = {"mean": post.mean, "std": post.std}
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": mode.value,
        "posteriors": posteriors,
        "task": tp.to_dict(),
    }


def _apply_observation(session: Session, tp: TaskParameters, mode: PracticeMode,
                       pre: PerformanceError, post: PerformanceError) -> dict:
    # the human is the noise source: utilities use the raw error delta
    quiet = session.cfg.noise_free()
    utility = calc_utility(pre, post, quiet, np.random.default_rng(0))
    session.gp.add_data_point(encode(tp, mode), utility)
    session.history.append(
        {
            "task": tp.to_dict(),
            "mode": mode.value,
            "error_pre": pre.to_dict(),
            "error_post": post.to_dict(),
            "utility": utility,
        }
    )
    session.updated = time.time()
    return {
        "schema_version": SCHEMA_VERSION,
        "utility": utility,
        "point_count": session.gp.n_points,
    }


def create_app(state_dir: str | Path = "sessions", ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="practicegp scaffold service")
    store = SessionStore(Path(state_dir))
    app.state.store = store

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        code = {400: "bad_request", 404: "not_found"}.get(exc.status_code, "error")
        return JSONResponse(status_code=exc.status_code,
                            content={"code": code, "message": str(exc.detail)})

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "bad_request", "message": str(exc.errors())})

    @app.post("/sessions")
    def create_session(body: SessionCreateBody):
        try:
            cfg = SimConfig.from_dict(body.sim) if body.sim else SimConfig()
            gp_params = KernelParams.from_dict(body.gp) if body.gp else KernelParams()
            autopilot = None if body.autopilot is None else LearnerGroup(body.autopilot)
        except (ValueError, TypeError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=f"malformed overrides: {exc}")
        session = store.create(cfg, GpModel(gp_params), autopilot, body.seed)
        return _session_summary(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return _session_summary(session)

    @app.get("/sessions/{session_id}/recommendation")
    def recommendation(session_id: str, bpm: int = Query(...), note_range: int = Query(...)):
        session = store.get(session_id)
        tp = _parse_task(bpm, note_range)
        with session.lock:
            return _recommend(session, tp)

    @app.post("/sessions/{session_id}/observations")
    def observe(session_id: str, body: ObservationBody):
        session = store.get(session_id)
        tp = _parse_task(body.bpm, body.note_range)
        try:
            mode = PracticeMode(body.mode)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown practice mode {body.mode!r}")
        if min(body.error_pre.timing, body.error_pre.pitch,
               body.error_post.timing, body.error_post.pitch) < 0:
            raise HTTPException(status_code=400, detail="error components must be >= 0")
        pre = PerformanceError(body.error_pre.timing, body.error_pre.pitch)
        post = PerformanceError(body.error_post.timing, body.error_post.pitch)
        with session.lock:
            response = _apply_observation(session, tp, mode, pre, post)
            store.persist(session)
        return response

    @app.get("/sessions/{session_id}/policy")
    def policy_grid(session_id: str):
        session = store.get(session_id)
        with session.lock:
            grid = induced_policy(session.gp)
            mean_t = session.gp.predict_mean_batch(encoded_mode_grid(PracticeMode.IMP_TIMING))
            mean_p = session.gp.predict_mean_batch(encoded_mode_grid(PracticeMode.IMP_PITCH))
        shape = (len(NOTE_RANGES), len(BPM_VALUES))
        payload = grid.to_dense_dict()
        payload["schema_version"] = SCHEMA_VERSION
        payload["mean_IMP_TIMING"] = mean_t.reshape(shape).tolist()
        payload["mean_IMP_PITCH"] = mean_p.reshape(shape).tolist()
        return payload

    @app.get("/sessions/{session_id}/posterior")
    def posterior(session_id: str, mode: str = Query(...)):
        try:
            wanted = PracticeMode(mode)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown practice mode {mode!r}")
        session = store.get(session_id)
        with session.lock:
            rows = [r for r in posterior_grid_rows(session.gp) if r[2] == wanted.value]
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": wanted.value,
            "rows": [
                {"bpm": bpm, "note_range": nr, "mean": mean, "std": std}
                for bpm, nr, _, mean, std in rows
            ],
        }

    @app.post("/sessions/{session_id}/autopilot/step")
    def autopilot_step(session_id: str):
        session = store.get(session_id)
        if session.autopilot is None:
            raise HTTPException(status_code=400, detail="session has no autopilot learner")
        with session.lock:
            tp = session.sampler.sample()
            pre = performance_error(session.autopilot, tp, None, session.cfg, session.rng)
            mode = get_practice_mode(session.gp, tp, session.rng)
            post = performance_error(session.autopilot, tp, mode, session.cfg, session.rng)
            utility = calc_utility(pre, post, session.cfg, session.rng)
            session.gp.add_data_point(encode(tp, mode), utility)
            session.history.append(
                {
                    "task": tp.to_dict(),
                    "mode": mode.value,
                    "error_pre": pre.to_dict(),
                    "error_post": post.to_dict(),
                    "utility": utility,
                }
            )
            session.updated = time.time()
            store.persist(session)
            return {
                "schema_version": SCHEMA_VERSION,
                "task": tp.to_dict(),
                "mode": mode.value,
                "utility": utility,
                "point_count": session.gp.n_points,
            }

    if ui_dir is not None and Path(ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
