#!/usr/bin/env python3
"""Run a causal language model over the causal-chain dataset and write one
trace bundle per sample.

    extract.py --model <id> --dataset <jsonl> --out <dir>
               [--max-new-tokens 32] [--device auto]

Bundles land in <out>/<condition>/<sample key>/, the layout that
``causelens --traces <out>`` expects. Model access goes through a small
backend interface so the bundle logic can be exercised without weights.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Iterable, List, Optional, Protocol, Tuple

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from bundle import (  # noqa: E402
    FINAL_CHAIN_TOKEN,
    FINAL_PROMPT_TOKEN,
    Bundle,
    final_chain_token,
    write_bundle,
)

log = logging.getLogger("extract")

CONDITION_NAMES = {("en", "forward"): "en-fwd", ("zh", "forward"): "zh-fwd",
                   ("en", "reversed"): "en-rev", ("zh", "reversed"): "zh-rev"}


class Forward(Protocol):
    tokens: List[Tuple[str, int, int]]
    attention: np.ndarray  # [L, H, T, T]
    hidden: np.ndarray  # [L + 1, T, D]


class Backend(Protocol):
    model_id: str
    prompt_wrapper: str  # how chat_prompt wraps the user text

    def chat_prompt(self, user_text: str) -> Tuple[str, int]:
        """Full prompt and the code-point offset of user_text inside it."""

    def forward(self, prompt: str):
        """Tokens with code-point offsets, attention and hidden states."""

    def generate(self, prompt: str, max_new_tokens: int) -> str: ...


class SkipSample(Exception):
    """The sample cannot produce a meaningful bundle."""


def build_bundle(sample: dict, backend: Backend, max_new_tokens: int) -> Bundle:
    sep = " " if sample["language"] == "en" else ""
    user_text = sample["rendered_text"] + sep + sample["question_text"]
    prompt, statement_offset = backend.chat_prompt(user_text)
    question_offset = statement_offset + len(sample["rendered_text"]) + len(sep)
    out = backend.forward(prompt)
    T = len(out.tokens)
    if T < 2:
        raise SkipSample(f"prompt tokenizes to {T} token(s); no valid queries")
    anchors = {
        FINAL_CHAIN_TOKEN: final_chain_token(prompt, statement_offset, sample["rendered_text"], out.tokens),
        FINAL_PROMPT_TOKEN: T - 1,
    }
    hidden = {name: np.asarray(out.hidden[:, idx, :], dtype=np.float32) for name, idx in anchors.items()}
    return Bundle(
        sample_key=sample["key"],
        language=sample["language"],
        order=sample["order"],
        model_id=backend.model_id,
        prompt_text=prompt,
        statement_offset=statement_offset,
        question_offset=question_offset,
        tokens=list(out.tokens),
        attention=np.asarray(out.attention, dtype=np.float32),
        hidden=hidden,
        anchors=anchors,
        generated_answer=backend.generate(prompt, max_new_tokens),
        extraction={
            "prompt_wrapper": backend.prompt_wrapper,
            "decoding": "greedy",
            "max_new_tokens": max_new_tokens,
            "attention_pass": "prompt_only",
        },
    )


def read_dataset(path: str) -> Iterable[dict]:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield json.loads(line)


def run(backend: Backend, dataset: str, out: str, max_new_tokens: int = 32,
        limit: Optional[int] = None, overwrite: bool = False) -> Tuple[int, List[dict]]:
    """Writes bundles; returns (bundles written, per-sample findings).

    A failing sample is recorded and skipped; the run continues.
    """
    if max_new_tokens < 8:
        raise ValueError("max_new_tokens must be at least 8")
    written, findings = 0, []
    for n, sample in enumerate(read_dataset(dataset)):
        if limit is not None and n >= limit:
            break
        cond = CONDITION_NAMES[(sample["language"], sample["order"])]
        target = os.path.join(out, cond, sample["key"])
        if not overwrite and os.path.exists(os.path.join(target, "manifest.json")):
            continue
        try:
            write_bundle(build_bundle(sample, backend, max_new_tokens), target)
        except Exception as e:  # noqa: BLE001 - recorded, run continues
            kind = "skipped" if isinstance(e, SkipSample) else "failed"
            findings.append({"condition": cond, "sample_key": sample["key"], "status": kind,
                             "message": str(e)})
            log.warning("%s %s/%s: %s", kind, cond, sample["key"], e)
            continue
        written += 1
        log.info("wrote %s/%s", cond, sample["key"])
    if findings:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "extract_findings.jsonl"), "w", encoding="utf-8") as f:
            for item in findings:
                f.write(json.dumps(item, ensure_ascii=False) + "\n")
    return written, findings


class _HFForward:
    def __init__(self, tokens, attention, hidden):
        self.tokens, self.attention, self.hidden = tokens, attention, hidden


class HuggingFaceBackend:
    """Hugging Face causal LM with eager attention so weights are returned."""

    def __init__(self, model_id: str, device: str = "auto"):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        if device == "auto":
            device = "cuda" if torch.cuda.is_available() else "cpu"
        self.device = device
        self.model_id = model_id
        self.prompt_wrapper = "chat_template"
        self.tok = AutoTokenizer.from_pretrained(model_id)
        if not self.tok.is_fast:
            raise RuntimeError("tokenizer has no offset mapping; a fast tokenizer is required")
        self.model = AutoModelForCausalLM.from_pretrained(
            model_id, attn_implementation="eager", torch_dtype=torch.float32
        ).to(device).eval()

    def chat_prompt(self, user_text: str) -> Tuple[str, int]:
        marker = "@@CAUSELENS_USER_TEXT@@"
        if getattr(self.tok, "chat_template", None):
            templ = self.tok.apply_chat_template(
                [{"role": "user", "content": marker}], tokenize=False, add_generation_prompt=True
            )
        else:
            self.prompt_wrapper = "<user> {text} <assistant>"
            templ = "<user> " + marker + " <assistant>"
        offset = templ.index(marker)
        return templ.replace(marker, user_text), offset

    def forward(self, prompt: str):
        torch = self._torch
        enc = self.tok(prompt, return_offsets_mapping=True, add_special_tokens=False, return_tensors="pt")
        offsets = enc.pop("offset_mapping")[0].tolist()
        ids = enc["input_ids"].to(self.device)
        with torch.no_grad():
            out = self.model(input_ids=ids, output_attentions=True, output_hidden_states=True)
        tokens, prev_end = [], 0
        for i, (a, b) in enumerate(offsets):
            if a == b:  # special token without a span
                a = b = prev_end
            a = max(a, tokens[-1][1] if tokens else 0)
            tokens.append((self.tok.decode(ids[0, i : i + 1]), a, max(a, b)))
            prev_end = max(a, b)
        attention = torch.stack([a[0] for a in out.attentions]).float().cpu().numpy()
        # Force exact zeros above the diagonal and renormalize in float64.
        attention = np.tril(attention.astype(np.float64))
        attention /= attention.sum(-1, keepdims=True)
        hidden = torch.stack([h[0] for h in out.hidden_states]).float().cpu().numpy()
        return _HFForward(tokens, attention.astype(np.float32), hidden)

    def generate(self, prompt: str, max_new_tokens: int) -> str:
        enc = self.tok(prompt, add_special_tokens=False, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            out = self.model.generate(**enc, max_new_tokens=max_new_tokens, do_sample=False)
        return self.tok.decode(out[0, enc["input_ids"].shape[1]:], skip_special_tokens=True).strip()


def _at_least_8(text: str) -> int:
    value = int(text)
    if value < 8:
        raise argparse.ArgumentTypeError("must be at least 8")
    return value


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    p = argparse.ArgumentParser(prog="extract", description=__doc__.splitlines()[0])
    p.add_argument("--model", required=True, help="Hugging Face model id or local path")
    p.add_argument("--dataset", required=True, help="dataset.jsonl written by `causelens generate`")
    p.add_argument("--out", required=True, help="trace root directory")
    p.add_argument("--max-new-tokens", type=_at_least_8, default=32)
    p.add_argument("--device", default="auto", help="auto, cpu, cuda, cuda:N")
    p.add_argument("--limit", type=int, default=None, help="stop after this many samples")
    p.add_argument("--overwrite", action="store_true", help="rewrite existing bundles")
    return p.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        backend = HuggingFaceBackend(args.model, args.device)
    except Exception as e:  # noqa: BLE001
        print(json.dumps({"error": {"code": "model_load", "subcommand": "extract", "message": str(e)}}),
              file=sys.stderr)
        return 2
    n, findings = run(backend, args.dataset, args.out, args.max_new_tokens, args.limit, args.overwrite)
    print(json.dumps({"subcommand": "extract", "out": args.out, "bundles_written": n,
                      "samples_not_written": len(findings)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
