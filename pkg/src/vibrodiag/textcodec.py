"""Byte-level tokenizer with control tokens for audio slots and dialogue roles.

Byte value == token id, so encoding is lossless for arbitrary UTF-8 and the
specials can never collide with text.
"""

from __future__ import annotations

from vibrodiag.errors import InvalidLayout

PAD = 256
BOS = 257
EOS = 258
AUDIO = 259  # placeholder later overwritten by an audio embedding row
USER = 260
ASSISTANT = 261

VOCAB_SIZE = 262

SPECIALS = {
    "PAD": PAD,
    "BOS": BOS,
    "EOS": EOS,
    "AUDIO": AUDIO,
    "USER": USER,
    "ASSISTANT": ASSISTANT,
}


def encode(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def decode(ids) -> str:
    """Inverse of encode; strips a leading BOS and trailing EOS if present."""
    ids = list(ids)
    if ids and ids[0] == BOS:
        ids = ids[1:]
    if ids and ids[-1] == EOS:
        ids = ids[:-1]
    if any(i > 255 for i in ids):
        bad = next(i for i in ids if i > 255)
        raise ValueError(f"special token {bad} inside text span")
    return bytes(ids).decode("utf-8")


def vocab_table() -> dict:
    """Serializable vocabulary description stored inside checkpoints."""
    return {"kind": "byte", "vocab_size": VOCAB_SIZE, "specials": dict(SPECIALS)}


def build_prompt(
    target: str | None,
    n_audio_tokens: int,
    question: str | None = None,
) -> list[int]:
    """Assemble the model input sequence.

    Layout: BOS, AUDIO x n, USER, question bytes, ASSISTANT, then during
    training the target bytes and EOS. Without a target the sequence ends
    at ASSISTANT, ready for generation.
    """
    if n_audio_tokens < 1:
        raise InvalidLayout("at least one audio token slot is required")
    ids = [BOS] + [AUDIO] * n_audio_tokens + [USER]
    if question:
        ids += encode(question)
    ids.append(ASSISTANT)
    if target is not None:
        ids += encode(target) + [EOS]
    return ids


def build_dialogue_prompt(
    n_audio_tokens: int,
    diagnosis_question: str,
    initial_label: str,
    history: list[tuple[str, str]],
    question: str | None = None,
    answer: str | None = None,
) -> list[int]:
    """Multi-turn layout: the diagnosis exchange, prior turns, then the new question.

    With `answer` given the sequence is a training example ending in EOS;
    otherwise it ends at ASSISTANT for generation.
    """
    if n_audio_tokens < 1:
        raise InvalidLayout("at least one audio token slot is required")
    ids = [BOS] + [AUDIO] * n_audio_tokens
    ids += [USER] + encode(diagnosis_question) + [ASSISTANT] + encode(initial_label)
    for q, r in history:
        ids += [USER] + encode(q) + [ASSISTANT] + encode(r)
    if question is not None:
        ids += [USER] + encode(question) + [ASSISTANT]
        if answer is not None:
            ids += encode(answer) + [EOS]
    return ids


def target_mask(ids: list[int]) -> list[bool]:
    """True at positions whose tokens are training targets.

    Targets are the bytes after the final ASSISTANT plus the closing EOS;
    prompt text, specials, and audio slots are excluded.
    """
    last_assistant = max((i for i, t in enumerate(ids) if t == ASSISTANT), default=-1)
    mask = [False] * len(ids)
    if last_assistant < 0:
        return mask
    for i in range(last_assistant + 1, len(ids)):
        if ids[i] <= 255 or ids[i] == EOS:
            mask[i] = True
    return mask
