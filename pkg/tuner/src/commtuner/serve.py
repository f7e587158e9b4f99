"""Serve a tuned artifact behind the chat-completions wire protocol so the
main pipeline can target it without modification.

POST /v1/chat/completions accepts {model, messages, n, temperature,
max_tokens, seed, stop} and returns OpenAI-style choices; GET /health is a
liveness probe. Uvicorn handles graceful drain of in-flight requests on
shutdown signals.
"""

from __future__ import annotations

import hashlib
import threading
from pathlib import Path
from typing import Optional

import torch
from fastapi import FastAPI
from pydantic import BaseModel, Field

from .tokenizer import ByteTokenizer
from .tune import load_artifact


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str = "commtuner"
    messages: list[ChatMessage]
    n: int = Field(default=1, ge=1, le=512)
    temperature: float = Field(default=1.0, ge=0.0, le=2.0)
    max_tokens: int = Field(default=64, ge=1, le=4096)
    seed: Optional[int] = None
    stop: Optional[list[str]] = None


def _derive_seed(base: int, prompt: str, index: int) -> int:
    digest = hashlib.sha256(f"{base}:{index}:{prompt}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def build_app(artifact_dir: str | Path) -> FastAPI:
    model, tokenizer = load_artifact(artifact_dir)
    model.eval()
    lock = threading.Lock()  # the tiny model is cheap; serialize inference
    app = FastAPI(title="commtuner")

    @app.get("/health")
    def health():
        return {"status": "ok", "artifact": str(artifact_dir)}

    @app.post("/v1/chat/completions")
    def chat(request: ChatRequest):
        user_parts = [m.content for m in request.messages if m.role == "user"]
        prompt = "\n".join(user_parts) if user_parts else ""
        prompt_ids = [ByteTokenizer.bos_id] + tokenizer.encode(prompt) + [ByteTokenizer.sep_id]
        base_seed = request.seed if request.seed is not None else 0
        choices = []
        completion_tokens = 0
        with lock:
            for i in range(request.n):
                generator = torch.Generator()
                generator.manual_seed(_derive_seed(base_seed, prompt, i))
                out_ids = model.generate(
                    prompt_ids,
                    max_new_tokens=request.max_tokens,
                    temperature=request.temperature,
                    eos_id=ByteTokenizer.eos_id,
                    generator=generator,
                )
                text = tokenizer.decode(out_ids)
                if request.stop:
                    for stop in request.stop:
                        pos = text.find(stop)
                        if pos >= 0:
                            text = text[:pos]
                completion_tokens += len(out_ids)
                choices.append(
                    {
                        "index": i,
                        "message": {"role": "assistant", "content": text},
                        "finish_reason": "stop",
                    }
                )
        return {
            "id": "cmpl-commtuner",
            "object": "chat.completion",
            "model": request.model,
            "choices": choices,
            "usage": {
                "prompt_tokens": len(prompt_ids),
                "completion_tokens": completion_tokens,
                "total_tokens": len(prompt_ids) + completion_tokens,
            },
        }

    return app


def serve(artifact_dir: str | Path, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Blocking server; raises SystemExit with a clear message on a busy port."""
    import errno

    import uvicorn

    app = build_app(artifact_dir)
    config = uvicorn.Config(app, host=host, port=port, log_level="info")
    server = uvicorn.Server(config)
    try:
        server.run()
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise SystemExit(f"port {port} is already in use") from exc
        raise
