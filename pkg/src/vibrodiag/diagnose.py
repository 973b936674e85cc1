"""Greedy label generation, output parsing, and follow-up dialogue sessions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from vibrodiag._threads import single_thread_blas
from vibrodiag.corpusgen import LabelSet
from vibrodiag.net.model import ModelParams, encode_audio, forward_next_token
from vibrodiag.sigproc import (
    PipelineConfig,
    WavClip,
    dequantize_pcm16,
    prepare_clip,
)
from vibrodiag.textcodec import (
    AUDIO,
    EOS,
    build_dialogue_prompt,
    build_prompt,
)

DIAGNOSIS_QUESTION = "what fault?"

_session_counter = itertools.count(1)


@dataclass(frozen=True)
class DecodeResult:
    tokens: list[int]  # generated ids, terminating EOS excluded
    truncated: bool

    @property
    def text(self) -> str:
        return decode_lenient(self.tokens)


@dataclass(frozen=True)
class Diagnosis:
    raw_text: str
    parsed_label: Optional[str]
    match_mode: Optional[str]  # "exact" | "substring" | None


@dataclass
class DialogueSession:
    session_id: str
    audio: np.ndarray  # audio token sequence, computed once
    label_text: str    # the initial generated diagnosis
    history: list[tuple[str, str]] = field(default_factory=list)


def decode_lenient(ids) -> str:
    """Best-effort text recovery: drops specials, replaces invalid UTF-8."""
    return bytes(i for i in ids if i <= 255).decode("utf-8", errors="replace")


def greedy_loop(
    step_fn: Callable[[list[int]], np.ndarray],
    prompt: list[int],
    max_len: int,
) -> DecodeResult:
    """Argmax decoding driven by a next-distribution callback.

    Ties break to the lowest token id; stops at EOS or after max_len tokens.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = list(prompt)
    generated: list[int] = []
    with single_thread_blas():
        for _ in range(max_len):
            dist = step_fn(ids)
            nxt = int(np.argmax(dist))
            if nxt == EOS:
                return DecodeResult(generated, truncated=False)
            generated.append(nxt)
            ids.append(nxt)
    return DecodeResult(generated, truncated=True)


def greedy_decode(
    params: ModelParams,
    prompt: list[int],
    audio: np.ndarray,
    max_len: int = 64,
) -> DecodeResult:
    return greedy_loop(lambda ids: forward_next_token(params, ids, audio), prompt, max_len)


def parse_label(raw_text: str, label_set: LabelSet) -> tuple[Optional[str], Optional[str]]:
    """Exact canonical match first, then case-insensitive substring fallback."""
    for label in label_set.labels:
        if raw_text == label:
            return label, "exact"
    low = raw_text.lower()
    hits = [label for label in label_set.labels if label.lower() in low]
    if len(hits) == 1:
        return hits[0], "substring"
    return None, None


def diagnose(
    params: ModelParams,
    clip: WavClip,
    label_set: LabelSet,
    pipeline: PipelineConfig = PipelineConfig(),
    max_len: int = 64,
) -> Diagnosis:
    """Condition the clip, encode it, and generate a label greedily."""
    audio = _clip_audio(params, clip, pipeline)
    prompt = build_prompt(None, audio.shape[0], DIAGNOSIS_QUESTION)
    result = greedy_decode(params, prompt, audio, max_len)
    label, mode = parse_label(result.text, label_set)
    return Diagnosis(raw_text=result.text, parsed_label=label, match_mode=mode)


def _clip_audio(params: ModelParams, clip: WavClip, pipeline: PipelineConfig) -> np.ndarray:
    prepared = prepare_clip(dequantize_pcm16(clip), pipeline)
    with single_thread_blas():
        return encode_audio(prepared, params)


def open_session(
    params: ModelParams,
    clip: WavClip,
    label_set: LabelSet,
    pipeline: PipelineConfig = PipelineConfig(),
    max_len: int = 64,
    session_id: Optional[str] = None,
) -> tuple[DialogueSession, Diagnosis]:
    """Diagnose once and keep the audio embedding for follow-up questions."""
    audio = _clip_audio(params, clip, pipeline)
    prompt = build_prompt(None, audio.shape[0], DIAGNOSIS_QUESTION)
    result = greedy_decode(params, prompt, audio, max_len)
    label, mode = parse_label(result.text, label_set)
    sid = session_id if session_id is not None else f"s{next(_session_counter):08d}"
    session = DialogueSession(session_id=sid, audio=audio, label_text=result.text)
    return session, Diagnosis(raw_text=result.text, parsed_label=label, match_mode=mode)


def dialogue_prompt(session: DialogueSession, question: Optional[str]) -> list[int]:
    """The serialized conversation so far, ending ready for generation."""
    return build_dialogue_prompt(
        session.audio.shape[0],
        DIAGNOSIS_QUESTION,
        session.label_text,
        session.history,
        question,
    )


def follow_up(
    session: DialogueSession,
    question: str,
    params: ModelParams,
    max_len: int = 64,
) -> str:
    """Answer conditioned on the audio, the label, and the full history."""
    prompt = dialogue_prompt(session, question)
    result = greedy_decode(params, prompt, session.audio, max_len)
    answer = result.text
    session.history.append((question, answer))
    return answer
