"""Trace bundle writer.

Writes the directory layout read by ``causelens``: ``manifest.json`` plus
one raw little-endian float32 blob per tensor, each with a CRC-32 of its
bytes. See docs/trace_format.md for the schema.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

FORMAT_VERSION = "1"
ROW_SUM_TOLERANCE = 1e-3

FINAL_CHAIN_TOKEN = "final_chain_token"
FINAL_PROMPT_TOKEN = "final_prompt_token"


def hidden_blob_name(anchor: str) -> str:
    if anchor == FINAL_CHAIN_TOKEN:
        return "hidden_final_chain.bin"
    if anchor == FINAL_PROMPT_TOKEN:
        return "hidden_last.bin"
    return f"hidden_{anchor}.bin"


def is_whitespace(ch: str) -> bool:
    cp = ord(ch)
    return ch in " \t\n\r\v\f" or cp in (0x00A0, 0x3000) or 0x2000 <= cp <= 0x200B


def is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    if cp < 0x80:
        return 0x21 <= cp <= 0x2F or 0x3A <= cp <= 0x40 or 0x5B <= cp <= 0x60 or 0x7B <= cp <= 0x7E
    return (
        0x2010 <= cp <= 0x205E
        or 0x3001 <= cp <= 0x303F
        or 0xFF01 <= cp <= 0xFF0F
        or 0xFF1A <= cp <= 0xFF20
        or 0xFF3B <= cp <= 0xFF40
        or 0xFF5B <= cp <= 0xFF65
        or cp in (0x00A1, 0x00BF, 0x00B7)
    )


@dataclass
class Bundle:
    sample_key: str
    language: str  # "en" | "zh"
    order: str  # "forward" | "reversed"
    model_id: str
    prompt_text: str
    statement_offset: int
    question_offset: int
    tokens: List[Tuple[str, int, int]]  # (text, start, end) in code points
    attention: np.ndarray  # [L, H, T, T]
    hidden: Dict[str, np.ndarray] = field(default_factory=dict)  # anchor -> [L + 1, D]
    anchors: Dict[str, int] = field(default_factory=dict)
    generated_answer: str = ""
    # Free-form record of how the trace was produced (prompt wrapper,
    # decoding); stored under model.extraction and ignored by the reader.
    extraction: Dict[str, object] = field(default_factory=dict)


def final_chain_token(prompt: str, statement_offset: int, statement: str,
                      tokens: Sequence[Tuple[str, int, int]]) -> int:
    """Index of the last token covering a content character of the statement."""
    start = statement_offset
    end = min(start + len(statement), len(prompt))
    best = -1
    for t, (_, a, b) in enumerate(tokens):
        for c in range(max(a, start), min(b, end)):
            if not is_whitespace(prompt[c]) and not is_punctuation(prompt[c]):
                best = t
                break
    if best < 0:
        raise ValueError("no token covers the chain statement")
    return best


def check(b: Bundle) -> List[str]:
    """Problems that ``causelens validate`` would also report."""
    problems = []
    T = len(b.tokens)
    A = b.attention
    if A.ndim != 4 or A.shape[2] != T or A.shape[3] != T:
        return [f"attention shape {A.shape} does not match {T} tokens"]
    if not np.isfinite(A).all():
        problems.append("non-finite attention")
    upper = np.triu(np.ones((T, T), dtype=bool), k=1)
    if np.any(A[..., upper] != 0):
        problems.append("nonzero attention above the diagonal")
    if np.any(np.abs(A.astype(np.float64).sum(-1) - 1.0) > ROW_SUM_TOLERANCE):
        problems.append("attention rows do not sum to 1")
    prev = 0
    for i, (_, a, e) in enumerate(b.tokens):
        if a < 0 or e < a or e > len(b.prompt_text) or a < prev:
            problems.append(f"token {i} offsets [{a},{e}) invalid")
        prev = max(prev, a)
    for name, idx in b.anchors.items():
        if not 0 <= idx < T:
            problems.append(f"anchor {name}={idx} out of range")
    for name, h in b.hidden.items():
        if h.ndim != 2 or h.shape[0] != A.shape[0] + 1:
            problems.append(f"hidden {name} has shape {h.shape}")
    return problems


def _blob(path: str, array: np.ndarray) -> Dict:
    data = np.ascontiguousarray(array, dtype="<f4").tobytes()
    with open(path, "wb") as f:
        f.write(data)
    return {
        "file": os.path.basename(path),
        "dtype": "float32",
        "shape": list(array.shape),
        "crc32": zlib.crc32(data) & 0xFFFFFFFF,
    }


def write_bundle(b: Bundle, directory: str) -> None:
    problems = check(b)
    if problems:
        raise ValueError(f"{b.sample_key}: " + "; ".join(problems))
    os.makedirs(directory, exist_ok=True)
    L, H = b.attention.shape[:2]
    D = next(iter(b.hidden.values())).shape[1] if b.hidden else 0
    blobs = {"attention": _blob(os.path.join(directory, "attention.bin"), b.attention)}
    for name in sorted(b.hidden):
        blobs[f"hidden.{name}"] = _blob(os.path.join(directory, hidden_blob_name(name)), b.hidden[name])
    manifest = {
        "format_version": FORMAT_VERSION,
        "sample_key": b.sample_key,
        "language": b.language,
        "order": b.order,
        "model": {"id": b.model_id, "num_layers": int(L), "num_heads": int(H), "hidden_dim": int(D)},
        "prompt_text": b.prompt_text,
        "statement_offset": b.statement_offset,
        "question_offset": b.question_offset,
        "tokens": [{"text": t, "start": s, "end": e} for t, s, e in b.tokens],
        "generated_answer": b.generated_answer,
        "anchors": dict(sorted(b.anchors.items())),
        "blobs": blobs,
    }
    if b.extraction:
        manifest["model"]["extraction"] = b.extraction
    # Manifest last, so a crash never leaves a manifest pointing at missing blobs.
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)
        f.write("\n")
