"""HTTP inference service: session management, scribble upload, colorization."""

import re
import threading

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import JSONResponse

from ..checkpoint import init_model_state, load_checkpoint
from ..errors import ValidationError
from ..scribble import scribbles_from_json
from ..synthdata import load_clip
from .schemas import (
    ColorizeAccepted,
    ScribblePayload,
    SessionCreated,
    StatusResponse,
)
from .sessions import (
    DONE,
    IDLE,
    RUNNING,
    Session,
    SessionStore,
    decode_gray_png,
    encode_gray_png,
    run_colorization,
)


def create_app(state=None, checkpoint_path=None) -> FastAPI:
    """Build the service around a loaded model (read-only, shared by sessions)."""
    if state is None:
        state = load_checkpoint(checkpoint_path) if checkpoint_path else init_model_state()
    state.eval()

    app = FastAPI(title="chromaflow", version="0.1.0")
    store = SessionStore()
    app.state.model = state
    app.state.store = store

    def get_session(session_id) -> Session:
        session = store.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/sessions", response_model=SessionCreated, status_code=201)
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        grays, clip_dir, flows = [], None, None
        if content_type.startswith("multipart/"):
            form = await request.form()
            uploads = [v for k, v in form.multi_items() if k == "frames"]
            if not uploads:
                raise HTTPException(status_code=400, detail="no frames uploaded")
            for upload in uploads:
                grays.append(decode_gray_png(await upload.read()))
        else:
            body = await request.json()
            clip_dir = body.get("clip_dir")
            if not clip_dir:
                raise HTTPException(status_code=400, detail="clip_dir missing from request body")
            try:
                clip = load_clip(clip_dir)
            except Exception as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            grays = [clip.gray(t) for t in range(clip.n_frames)]
            flows = clip.flows_forward
        if any(g.shape != grays[0].shape for g in grays):
            raise HTTPException(status_code=400, detail="frames must share one resolution")
        session = Session(grays, clip_dir=clip_dir, flows=flows)
        store.add(session)
        return SessionCreated(
            id=session.id, n_frames=session.n_frames, resolution=list(session.resolution)
        )

    @app.get("/sessions/{session_id}/frame/{t}")
    def get_frame(session_id: str, t: int):
        session = get_session(session_id)
        if not (0 <= t < session.n_frames):
            raise HTTPException(status_code=404, detail=f"frame {t} out of range")
        return Response(content=encode_gray_png(session.grays[t]), media_type="image/png")

    @app.put("/sessions/{session_id}/scribbles")
    def put_scribbles(session_id: str, payload: ScribblePayload):
        session = get_session(session_id)
        try:
            scribbles_from_json(payload.model_dump())
        except ValidationError as exc:
            detail = {"detail": str(exc)}
            match = re.match(r"point (\d+)", str(exc))
            if match:
                detail["point_errors"] = [{"index": int(match.group(1)), "message": str(exc)}]
            return JSONResponse(status_code=422, content=detail)
        with session.lock:
            session.scribbles = payload.model_dump()
            session.version += 1
            session.results = None
            session.frames_done = 0
            if session.status in (DONE, "failed"):
                session.status = IDLE
        return {"ok": True, "version": session.version}

    @app.post(
        "/sessions/{session_id}/colorize", response_model=ColorizeAccepted, status_code=202
    )
    def colorize(session_id: str, sr_ratio: int = 2, flow: str = "zero"):
        session = get_session(session_id)
        model = app.state.model
        if sr_ratio not in (2, 4, 8):
            raise HTTPException(status_code=400, detail=f"sr_ratio must be 2, 4, or 8")
        with session.lock:
            if session.status == RUNNING:
                raise HTTPException(status_code=409, detail="colorization already running")
            full_hw = session.resolution
            low_hw = (full_hw[0] // sr_ratio, full_hw[1] // sr_ratio)
            stride = 2**model.cpnet_config.depth
            if (
                full_hw[0] % sr_ratio
                or full_hw[1] % sr_ratio
                or low_hw[0] % stride
                or low_hw[1] % stride
            ):
                raise HTTPException(
                    status_code=400,
                    detail=f"resolution {tuple(full_hw)} incompatible with sr_ratio {sr_ratio}",
                )
            if session.scribbles is not None:
                declared = tuple(session.scribbles["resolution"])
                if declared != low_hw:
                    raise HTTPException(
                        status_code=400,
                        detail=(
                            f"scribble resolution {declared} does not match processing "
                            f"resolution {low_hw}"
                        ),
                    )
            session.status = RUNNING
            session.frames_done = 0
            session.results = None
            session.error = None
        worker = threading.Thread(
            target=run_colorization, args=(session, model, sr_ratio, flow), daemon=True
        )
        worker.start()
        return ColorizeAccepted(status=RUNNING, version=session.version)

    @app.get("/sessions/{session_id}/status", response_model=StatusResponse)
    def status(session_id: str):
        session = get_session(session_id)
        return StatusResponse(
            status=session.status,
            progress=session.frames_done / max(session.n_frames, 1),
            frames_done=session.frames_done,
            n_frames=session.n_frames,
            version=session.version,
        )

    @app.get("/sessions/{session_id}/result/{t}")
    def result(session_id: str, t: int):
        session = get_session(session_id)
        with session.lock:
            if session.status != DONE or session.results is None:
                raise HTTPException(status_code=404, detail="result not ready")
            if not (0 <= t < len(session.results)):
                raise HTTPException(status_code=404, detail=f"frame {t} out of range")
            payload = session.results[t]
        return Response(content=payload, media_type="image/png")

    @app.delete("/sessions/{session_id}")
    def delete(session_id: str):
        if store.remove(session_id) is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return {"ok": True}

    return app
