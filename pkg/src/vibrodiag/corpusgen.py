"""Template-based vibration-text corpus and canonical fault labels.

Descriptions are produced by filling sentence templates with condition
fields and seed-selected phrase variants; `parse_fields` is the test-side
inverse that keeps every generated description faithful to its clip.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from vibrodiag.errors import EmptyManifest, UnknownClass, UnknownTemplate, Unparseable
from vibrodiag.synthbench import FaultCondition, FaultType

# base surface text per fault location, first entry is the base form
LOCATION_SYNONYMS = {
    FaultType.INNER_RACE: ("inner race", "inner ring"),
    FaultType.OUTER_RACE: ("outer race", "outer ring"),
    FaultType.ROLLER: ("roller", "rolling element"),
}

# signal-pattern phrases keyed by fault type
CHARACTERISTICS = {
    FaultType.HEALTHY: (
        "stationary background noise",
        "a smooth stationary noise floor",
        "steady broadband noise with no impacts",
    ),
    FaultType.INNER_RACE: (
        "periodic high-frequency impact pulses",
        "impulsive bursts at regular intervals",
        "sharp repetitive impact transients",
    ),
    FaultType.OUTER_RACE: (
        "evenly spaced impact pulses",
        "regular impulsive knocking",
        "repeating impact bursts at a fixed rate",
    ),
    FaultType.ROLLER: (
        "intermittent double-impact pulses",
        "unevenly modulated impact bursts",
        "cage-modulated impact pulses",
    ),
}

SEVERITY_WORDS = {150: "mild", 250: "moderate", 450: "severe"}

# (faulty form, healthy form); slots: speed, load, characteristics, severity, location
TEMPLATES = (
    (
        "A bearing running at {speed} rpm under {load} N shows {characteristics}, "
        "indicating a {severity} {location} fault.",
        "A bearing running at {speed} rpm under {load} N shows {characteristics}, "
        "indicating a healthy condition.",
    ),
    (
        "Vibration recorded at {speed} rpm with {load} N load contains {characteristics}; "
        "this points to {location} damage of {severity}.",
        "Vibration recorded at {speed} rpm with {load} N load contains {characteristics}; "
        "this points to no bearing damage.",
    ),
    (
        "The {location} of this bearing exhibits {severity} damage: the signal shows "
        "{characteristics} at {speed} rpm.",
        "This bearing is in good health: the signal shows {characteristics} at {speed} rpm.",
    ),
    (
        "Under a radial load of {load} N and a shaft speed of {speed} rpm, "
        "{characteristics} reveal a {severity} defect on the {location}.",
        "Under a radial load of {load} N and a shaft speed of {speed} rpm, the signal "
        "stays free of defects, showing {characteristics}.",
    ),
    (
        "Diagnosis: {severity} {location} fault. The waveform presents {characteristics} "
        "while operating at {speed} rpm and {load} N.",
        "Diagnosis: healthy bearing. The waveform presents {characteristics} while "
        "operating at {speed} rpm and {load} N.",
    ),
    (
        "At {speed} rpm and {load} N the accelerometer picks up {characteristics}, "
        "consistent with {location} wear of {severity}.",
        "At {speed} rpm and {load} N the accelerometer picks up {characteristics}, "
        "consistent with an undamaged bearing.",
    ),
)

_HEALTHY_MARKERS = (
    "stationary",
    "steady broadband",
    "healthy",
    "good health",
    "free of defects",
    "no bearing damage",
    "undamaged",
)

_SEVERITY_RE = re.compile(r"(\d+)\s*(?:um|µm)")


@dataclass(frozen=True)
class DescriptionFields:
    fault_type: FaultType
    location: str
    severity: str
    speed_rpm: float
    load_n: float
    characteristics: str


@dataclass(frozen=True)
class ParsedFields:
    fault_type: FaultType
    location: Optional[str]
    severity: Optional[str]
    severity_um: int


@dataclass(frozen=True)
class LabelEntry:
    label: str
    fault_type: FaultType
    severity_um: Optional[int]  # None matches any faulty severity


@dataclass(frozen=True)
class LabelSet:
    name: str
    entries: tuple[LabelEntry, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.entries)

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


TOY4 = LabelSet(
    "toy4",
    (
        LabelEntry("healthy", FaultType.HEALTHY, 0),
        LabelEntry("inner ring fault", FaultType.INNER_RACE, None),
        LabelEntry("outer ring fault", FaultType.OUTER_RACE, None),
        LabelEntry("roller fault", FaultType.ROLLER, None),
    ),
)

DIRG7 = LabelSet(
    "dirg7",
    (
        LabelEntry("healthy 0A", FaultType.HEALTHY, 0),
        LabelEntry("inner ring indentation 450 um", FaultType.INNER_RACE, 450),
        LabelEntry("inner ring indentation 250 um", FaultType.INNER_RACE, 250),
        LabelEntry("inner ring indentation 150 um", FaultType.INNER_RACE, 150),
        LabelEntry("roller indentation 450 um", FaultType.ROLLER, 450),
        LabelEntry("roller indentation 250 um", FaultType.ROLLER, 250),
        LabelEntry("roller indentation 150 um", FaultType.ROLLER, 150),
    ),
)

HIT3 = LabelSet(
    "hit3",
    (
        LabelEntry("healthy", FaultType.HEALTHY, 0),
        LabelEntry("inner ring defect", FaultType.INNER_RACE, None),
        LabelEntry("outer ring defect", FaultType.OUTER_RACE, None),
    ),
)

LABEL_SETS = {s.name: s for s in (TOY4, DIRG7, HIT3)}


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


def render_description(fields: DescriptionFields, template_id: int, seed: int) -> str:
    """Fill a template with the fields, picking synonym variants from the seed."""
    if not 0 <= template_id < len(TEMPLATES):
        raise UnknownTemplate(f"template {template_id} outside bank of {len(TEMPLATES)}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, template_id]))
    healthy = fields.fault_type is FaultType.HEALTHY
    text = TEMPLATES[template_id][1 if healthy else 0]

    char_group = CHARACTERISTICS[fields.fault_type]
    if fields.characteristics not in char_group:
        raise ValueError(
            f"characteristics {fields.characteristics!r} not in the phrase table "
            f"for {fields.fault_type.value}"
        )
    characteristics = char_group[int(rng.integers(len(char_group)))]

    location = ""
    if not healthy:
        loc_group = LOCATION_SYNONYMS[fields.fault_type]
        location = loc_group[int(rng.integers(len(loc_group)))]

    return text.format(
        speed=_fmt_num(fields.speed_rpm),
        load=_fmt_num(fields.load_n),
        characteristics=characteristics,
        severity=fields.severity,
        location=location,
    )


def parse_fields(description: str) -> ParsedFields:
    """Recover fault type and severity from a rendered description.

    Keyword-table inverse of `render_description`; raises Unparseable on
    unknown or ambiguous text rather than guessing.
    """
    text = description.lower()
    hits: dict[FaultType, str] = {}
    for ft, synonyms in LOCATION_SYNONYMS.items():
        for syn in synonyms:
            if syn in text:
                hits.setdefault(ft, syn)
    if len(hits) > 1:
        raise Unparseable(f"multiple fault locations mentioned: {sorted(f.value for f in hits)}")
    if len(hits) == 1:
        ft, loc = next(iter(hits.items()))
        m = _SEVERITY_RE.search(text)
        if m:
            return ParsedFields(ft, loc, m.group(0), int(m.group(1)))
        for um, word in SEVERITY_WORDS.items():
            if word in text:
                return ParsedFields(ft, loc, word, um)
        raise Unparseable("fault location found but no severity")
    if any(marker in text for marker in _HEALTHY_MARKERS):
        return ParsedFields(FaultType.HEALTHY, None, None, 0)
    raise Unparseable(f"no fault location or healthy marker in {description!r}")


def canonical_label(cond: FaultCondition, label_set: LabelSet) -> str:
    """The exact label string for a condition; bijective with the class list."""
    for entry in label_set.entries:
        if entry.fault_type is not cond.fault_type:
            continue
        if entry.severity_um is None or entry.severity_um == cond.severity_um:
            return entry.label
    raise UnknownClass(
        f"{cond.fault_type.value}/{cond.severity_um} um not in label set {label_set.name!r}"
    )


def make_fields(cond: FaultCondition, rng: np.random.Generator) -> DescriptionFields:
    """Draw description fields for a condition (base location, seeded phrasing)."""
    characteristics = CHARACTERISTICS[cond.fault_type][
        int(rng.integers(len(CHARACTERISTICS[cond.fault_type])))
    ]
    if cond.fault_type is FaultType.HEALTHY:
        location, severity = "", ""
    else:
        location = LOCATION_SYNONYMS[cond.fault_type][0]
        if rng.random() < 0.25:
            severity = SEVERITY_WORDS[cond.severity_um]
        else:
            severity = f"{cond.severity_um} um"
    return DescriptionFields(
        fault_type=cond.fault_type,
        location=location,
        severity=severity,
        speed_rpm=cond.speed_rpm,
        load_n=cond.load_n,
        characteristics=characteristics,
    )


def build_corpus(
    manifest: Iterable[dict],
    n_variants: int,
    seed: int,
    label_set: LabelSet = TOY4,
) -> list[dict]:
    """n_variants vibration-text pairs per manifest clip, fully seed-determined."""
    records = list(manifest)
    if not records:
        raise EmptyManifest("manifest has no clips")
    if n_variants < 1:
        raise ValueError("n_variants must be >= 1")
    out = []
    n_templates = len(TEMPLATES)
    for i, rec in enumerate(records):
        cond = FaultCondition(
            fault_type=FaultType(rec["fault_type"]),
            severity_um=int(rec["severity_um"]),
            speed_rpm=float(rec["speed_rpm"]),
            load_n=float(rec["load_n"]),
        )
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, i]))
        if n_variants <= n_templates:
            template_ids = rng.permutation(n_templates)[:n_variants]
        else:
            template_ids = rng.integers(n_templates, size=n_variants)
        for tid in template_ids:
            variant_seed = int(rng.integers(2**31))
            fields = make_fields(cond, rng)
            text = render_description(fields, int(tid), variant_seed)
            out.append(
                {
                    "clip": rec["path"],
                    "text": text,
                    "label": canonical_label(cond, label_set),
                    "fields": {
                        "fault_type": fields.fault_type.value,
                        "location": fields.location,
                        "severity": fields.severity,
                        "speed_rpm": fields.speed_rpm,
                        "load_n": fields.load_n,
                        "characteristics": fields.characteristics,
                    },
                    "split": rec["split"],
                    "template_id": int(tid),
                    "seed": variant_seed,
                }
            )
    return out


def corpus_to_jsonl(records: list[dict]) -> str:
    """Stable UTF-8/LF serialization; identical inputs give identical bytes."""
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def write_corpus(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(corpus_to_jsonl(records))


def read_jsonl(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
