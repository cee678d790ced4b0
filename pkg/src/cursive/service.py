"""Local HTTP service for data collection and interactive generation.

Single-user research tool: binds to localhost, no auth. The collection store
is an append-only newline-delimited JSON file of canonical sample records;
generation endpoints require a loaded checkpoint and otherwise return a
structured error.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import dataset as ds
from . import sampler as sp
from . import wordbank as wb
from .config import ProjectConfig
from .training import load_checkpoint


def _error(status: int, code: str, message: str, path: str | None = None):
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message, "path": path})


class GenerateRequest(BaseModel):
    text: str
    temperature: float = 1.0
    seed: int = 0
    max_tokens: int = 1050


class RegenerateRequest(BaseModel):
    page: dict
    word_indices: list[int]
    temperature: float = 1.0
    seed: int = 0
    max_tokens: int = 1050


class SampleStore:
    """Append-only NDJSON record store; one writer at a time."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock = threading.Lock()

    def append(self, records: list[ds.SampleRecord]) -> int:
        lines = [json.dumps(json.loads(ds.export_json([r]))[0], separators=(",", ":"))
                 for r in records]
        with self.lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                for line in lines:
                    f.write(line)
                    f.write("\n")
            return self.count()

    def count(self) -> int:
        if not self.path.exists():
            return 0
        with open(self.path, "r", encoding="utf-8") as f:
            return sum(1 for line in f if line.strip())

    def export(self) -> list[dict]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]


def create_app(config: ProjectConfig | None = None, store_path="samples.ndjson",
               checkpoint_path=None, bank_size: int = 512,
               prompt_seed: int = 0, ui_dir=None) -> FastAPI:
    config = config or ProjectConfig()
    app = FastAPI(title="cursive", docs_url=None, redoc_url=None)
    store = SampleStore(store_path)
    bank = wb.generate_bank(config.wordbank, bank_size, rng=prompt_seed)
    state = {"prompt_index": 0, "checkpoint": None, "tokenizer": None}
    if checkpoint_path is not None:
        state["checkpoint"] = load_checkpoint(checkpoint_path)
        tok = config.tokenizer_config()
        if tok is None or tok.vocab_size != state["checkpoint"].model_cfg.stroke_vocab:
            raise ValueError("service config tokenizer does not match the checkpoint")
        state["tokenizer"] = tok
    prompt_lock = threading.Lock()

    @app.get("/health")
    def health():
        return {"ok": True, "checkpoint_loaded": state["checkpoint"] is not None,
                "samples": store.count(), "config_hash": config.hash()}

    @app.get("/prompt")
    def prompt():
        with prompt_lock:
            i = state["prompt_index"]
            state["prompt_index"] = (i + 1) % len(bank)
        return {"word": bank[i], "index": i, "config_hash": config.hash()}

    @app.post("/samples")
    async def post_samples(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body is not valid JSON", "$")
        try:
            records = ds.ingest_json(payload)
        except ds.SchemaError as e:
            return _error(422, "schema", str(e), e.path)
        total = store.append(records)
        return {"accepted": len(records), "total": total}

    @app.get("/samples/export")
    def export_samples():
        return store.export()

    def _generation_guard():
        if state["checkpoint"] is None:
            return _error(409, "no_checkpoint",
                          "no model checkpoint is loaded; start the service with one")
        return None

    @app.post("/generate")
    def generate(req: GenerateRequest):
        guard = _generation_guard()
        if guard:
            return guard
        sc = sp.SamplingConfig(temperature=req.temperature, seed=req.seed,
                               max_tokens=req.max_tokens)
        try:
            page = sp.sample(state["checkpoint"], req.text, sc, state["tokenizer"])
        except ValueError as e:
            return _error(422, "bad_text", str(e), "$.text")
        svg = sp.render_svg(page)
        return {"page": json.loads(page.to_json()), "svg": svg.decode("utf-8"),
                "config_hash": config.hash()}

    @app.post("/regenerate")
    def regenerate(req: RegenerateRequest):
        guard = _generation_guard()
        if guard:
            return guard
        try:
            page = sp.GeneratedPage.from_json(req.page)
        except (ValueError, KeyError) as e:
            return _error(422, "bad_page", f"unparseable page: {e}", "$.page")
        sc = sp.SamplingConfig(temperature=req.temperature, seed=req.seed,
                               max_tokens=req.max_tokens)
        try:
            out = sp.regenerate(state["checkpoint"], page, req.word_indices, sc)
        except IndexError as e:
            return _error(422, "bad_index", str(e), "$.word_indices")
        svg = sp.render_svg(out)
        return {"page": json.loads(out.to_json()), "svg": svg.decode("utf-8"),
                "config_hash": config.hash()}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
