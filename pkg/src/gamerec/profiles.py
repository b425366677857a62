"""Text profiles for games and players, generated descriptions, and fusion.

Game prompts carry the title plus the raw 100-point average rating (which
reflects the interest of the general player base) and whatever supplementary
fields exist; player prompts concatenate per-game history blocks carrying
the generated game description together with the standard-normal mapped
dwelling time and rating, which are directly comparable. Generation and
embedding go through pluggable clients: the default stub clients are pure
functions of their input, so the whole pipeline runs offline and
deterministically; HTTP clients speak a minimal JSON contract for live use.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .dataset import GameMeta

GAME_INSTRUCTION = (
    "Write a concise description of this game for a recommendation profile. "
    "Reason primarily from the average rating on the 0-100 scale: it reflects "
    "the interest of the general player base in the game, so a high rating "
    "should read as broad appeal and a low one as a warning sign, whatever "
    "the other details suggest."
)

PLAYER_INSTRUCTION = (
    "Infer this player's personal preferences. For every game in the history, "
    "compare the normalized dwelling time (the player's own interest) against "
    "the normalized average rating (the interest of the general player base); "
    "both are on the same standard-normal scale and directly comparable. "
    "Highlight games where the player is clearly more or clearly less engaged "
    "than the general player base, and summarize what that reveals."
)


@dataclass(frozen=True)
class GamePrompt:
    text: str
    case: str
    digest: str


@dataclass(frozen=True)
class PlayerPrompt:
    text: str
    n_games: int
    digest: str


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_game_prompt(meta: GameMeta, mean_rating: float) -> GamePrompt:
    """Prompt for one game; the template case follows field availability.

    A missing rating is substituted with the catalog mean; missing price or
    release date drops the supplementary block entirely.
    """
    if not meta.title:
        raise ValueError(f"game {meta.game_id!r} has no title")
    has_rating = meta.avg_rating is not None
    has_supp = meta.price is not None and meta.release_date is not None
    rating = meta.avg_rating if has_rating else mean_rating
    if has_rating and has_supp:
        case = "full"
    elif has_supp:
        case = "mean_rating_full"
    elif has_rating:
        case = "rating_only"
    else:
        case = "mean_rating_only"
    lines = ["Game information:", f"- Title: {meta.title}", f"- Average rating (0-100): {rating:.2f}"]
    if has_supp:
        lines.append(f"- Price: {meta.price:.2f}")
        lines.append(f"- Release date: {meta.release_date.isoformat()}")
    lines.append(f"Instruction: {GAME_INSTRUCTION}")
    text = "\n".join(lines)
    return GamePrompt(text=text, case=case, digest=_digest(text))


def build_player_prompt(history: Sequence) -> PlayerPrompt:
    """Prompt for one player from (description, mapped_time, mapped_rating)
    blocks in the given (training) order."""
    history = list(history)
    if not history:
        raise ValueError("player history is empty")
    lines = ["Player history:"]
    for k, (description, t, r) in enumerate(history, start=1):
        lines.append(f"Game {k}:")
        lines.append(f"- Description: {description}")
        lines.append(f"- Normalized dwelling time: {t:.4f}")
        lines.append(f"- Normalized average rating: {r:.4f}")
    lines.append(f"Instruction: {PLAYER_INSTRUCTION}")
    text = "\n".join(lines)
    return PlayerPrompt(text=text, n_games=len(history), digest=_digest(text))


class GenerationError(RuntimeError):
    """Text generation failed after the configured retries."""

    def __init__(self, digest: str, message: str):
        super().__init__(f"generation failed for prompt {digest[:12]}: {message}")
        self.digest = digest


class DescriptionCache:
    """Append-only digest -> text store backed by a JSONL file.

    Records survive process restarts; a hit returns the stored text
    byte-identically. Writes are serialized through a lock.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._entries = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    rec = json.loads(line)
                    self._entries[rec["digest"]] = rec["text"]

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, digest: str) -> Optional[str]:
        with self._lock:
            text = self._entries.get(digest)
            if text is None:
                self.misses += 1
            else:
                self.hits += 1
            return text

    def put(self, digest: str, text: str):
        with self._lock:
            if digest in self._entries:
                return
            self._entries[digest] = text
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"digest": digest, "text": text}, ensure_ascii=False) + "\n")


class StubGenerationClient:
    """Deterministic offline generator: restates the prompt's field lines."""

    def generate(self, prompt_text: str) -> str:
        fields = [ln[2:] for ln in prompt_text.splitlines() if ln.startswith("- ")]
        body = "; ".join(fields) if fields else prompt_text.splitlines()[0]
        return f"Auto-generated profile. {body}."


class StubEmbeddingClient:
    """Deterministic offline embedder: a unit-norm pseudo-random vector
    keyed by the text digest."""

    def __init__(self, dim: int = 1024):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
        v = np.random.default_rng(seed).standard_normal(self.dim)
        return v / np.linalg.norm(v)


class HttpGenerationClient:
    """Minimal JSON-over-HTTP generation contract:
    POST {"model": ..., "prompt": ...} -> {"text": ...}."""

    def __init__(self, endpoint: str, model: str = "", timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self.retries = retries

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        key = os.environ.get("GAMEREC_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(self, prompt_text: str) -> str:
        import requests

        last = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"model": self.model, "prompt": prompt_text},
                    headers=self._headers(),
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                return str(resp.json()["text"])
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last = exc
        raise RuntimeError(f"generation request failed after {self.retries + 1} attempts: {last}")


class HttpEmbeddingClient:
    """POST {"model": ..., "text": ...} -> {"embedding": [...]}."""

    def __init__(self, endpoint: str, dim: int, model: str = "", timeout: float = 30.0, retries: int = 2):
        self.endpoint = endpoint
        self.dim = dim
        self.model = model
        self.timeout = timeout
        self.retries = retries

    def embed(self, text: str) -> np.ndarray:
        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get("GAMEREC_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint,
                    json={"model": self.model, "text": text},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                vec = np.asarray(resp.json()["embedding"], dtype=float)
                if vec.shape != (self.dim,):
                    raise ValueError(f"embedding has dim {vec.shape}, expected ({self.dim},)")
                return vec
            except ValueError:
                raise
            except Exception as exc:  # noqa: BLE001
                last = exc
        raise RuntimeError(f"embedding request failed after {self.retries + 1} attempts: {last}")


def generate_description(client, prompt, cache: Optional[DescriptionCache] = None) -> str:
    """Cache-first description generation; on miss, one client call whose
    result is persisted. Failures leave the cache unchanged and carry the
    prompt digest."""
    if cache is not None:
        hit = cache.get(prompt.digest)
        if hit is not None:
            return hit
    try:
        text = client.generate(prompt.text)
    except Exception as exc:  # noqa: BLE001
        raise GenerationError(prompt.digest, str(exc)) from exc
    if cache is not None:
        cache.put(prompt.digest, text)
    return text


def embed_text(client, text: str) -> np.ndarray:
    """Embed one description; the result must be finite with the client dim."""
    if not text:
        raise ValueError("cannot embed empty text")
    vec = np.asarray(client.embed(text), dtype=float)
    if getattr(client, "dim", None) is not None and vec.shape != (client.dim,):
        raise ValueError(f"embedding has shape {vec.shape}, expected ({client.dim},)")
    if not np.all(np.isfinite(vec)):
        raise ValueError("embedding contains non-finite values")
    return vec


def describe_and_embed(prompts, gen_client, emb_client, cache=None, max_in_flight: int = 1) -> np.ndarray:
    """Generate + embed a batch of prompts, optionally with bounded
    concurrency; the output row order follows the prompt order."""

    def one(prompt):
        return embed_text(emb_client, generate_description(gen_client, prompt, cache))

    prompts = list(prompts)
    if max_in_flight <= 1 or len(prompts) <= 1:
        rows = [one(p) for p in prompts]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            rows = list(pool.map(one, prompts))
    return np.stack(rows, axis=0) if rows else np.zeros((0, getattr(emb_client, "dim", 0)))


def dump_embeddings(path, matrix: np.ndarray):
    """Binary matrix dump: 16-byte header (count, dim as int64 LE) then
    float64 row-major data."""
    mat = np.ascontiguousarray(matrix, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(np.asarray(mat.shape, dtype="<i8").tobytes())
        fh.write(mat.tobytes())


def load_embeddings(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    count, dim = np.frombuffer(raw[:16], dtype="<i8")
    return np.frombuffer(raw[16:], dtype="<f8").reshape(int(count), int(dim)).copy()


FUSION_MODES = ("mlp", "linear", "gated")


class DescriptionFusion(nn.Module):
    """Aligns a description embedding into the shared space and integrates
    it with the original representation.

    Align is a 2-layer MLP d_emb -> d_h -> d_shared with tanh after the
    hidden layer (tanh is the project-wide smooth nonlinearity). Integration
    depends on the mode: "mlp" runs a 2-layer MLP on the concatenation,
    "linear" a single linear map, "gated" a sigmoid gate blending the two.
    """

    def __init__(self, d_emb: int, d_h: int, d_shared: int, mode: str = "mlp"):
        super().__init__()
        if mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {mode!r}")
        self.mode = mode
        self.align_hidden = nn.Linear(d_emb, d_h, dtype=torch.float64)
        self.align_out = nn.Linear(d_h, d_shared, dtype=torch.float64)
        if mode == "mlp":
            self.integ_hidden = nn.Linear(2 * d_shared, d_h, dtype=torch.float64)
            self.integ_out = nn.Linear(d_h, d_shared, dtype=torch.float64)
        elif mode == "linear":
            self.integ_out = nn.Linear(2 * d_shared, d_shared, dtype=torch.float64)
        else:
            self.gate = nn.Linear(2 * d_shared, d_shared, dtype=torch.float64)

    def align(self, e_desc: torch.Tensor) -> torch.Tensor:
        return self.align_out(torch.tanh(self.align_hidden(e_desc)))

    def forward(self, e_orig: torch.Tensor, e_desc: torch.Tensor) -> torch.Tensor:
        e_align = self.align(e_desc)
        both = torch.cat([e_orig, e_align], dim=-1)
        if self.mode == "mlp":
            return self.integ_out(torch.tanh(self.integ_hidden(both)))
        if self.mode == "linear":
            return self.integ_out(both)
        g = torch.sigmoid(self.gate(both))
        return g * e_orig + (1.0 - g) * e_align


def align_and_integrate(e_orig: torch.Tensor, e_desc: torch.Tensor, mode: str, params: DescriptionFusion) -> torch.Tensor:
    """Functional wrapper around DescriptionFusion; mode must match params."""
    if params.mode != mode:
        raise ValueError(f"params were built for mode {params.mode!r}, not {mode!r}")
    if e_orig.shape[:-1] != e_desc.shape[:-1]:
        raise ValueError("e_orig and e_desc disagree on batch shape")
    return params(e_orig, e_desc)
