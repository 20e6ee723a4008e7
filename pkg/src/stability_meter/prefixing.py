"""Prefix extraction, prefix-length bucketing, and index-based encoding.

Each completed case yields one prefix per length k in [k_min, min(k_max, N)].
A prefix is encoded as the sequence of its activity codes followed, position
by position, by the declared attribute values, so every sample of bucket k
has the same feature-vector width.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, EmptyLogError
from .event_model import Event, Trace

# Categorical code reserved for values absent from an event.
MISSING_CODE = 0


@dataclass(frozen=True)
class BucketConfig:
    """Range of prefix lengths that get their own bucket (and model)."""

    k_min: int = 2
    k_max: int = 2

    def __post_init__(self) -> None:
        if not 2 <= self.k_min <= self.k_max:
            raise ConfigError(
                f"bucket range must satisfy 2 <= k_min <= k_max, got "
                f"[{self.k_min}, {self.k_max}]"
            )

    def buckets(self) -> range:
        return range(self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class Prefix:
    """The first k events of a case."""

    case_id: str
    k: int
    events: tuple[Event, ...]


@dataclass(frozen=True)
class EncodedSample:
    """Feature vector for one prefix; label present for training samples."""

    bucket: int
    features: tuple
    label: int | None = None


@dataclass(frozen=True)
class AttributeSchema:
    """Which event attributes participate in encoding, and their kinds.

    ``numeric`` is parallel to ``names``; numeric attributes pass through as
    floats, categorical ones go through the shared code table.
    """

    names: tuple[str, ...] = ()
    numeric: tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        if len(self.names) != len(self.numeric):
            raise ConfigError("attribute schema names/numeric flags must align")

    @classmethod
    def from_traces(cls, names: Sequence[str], traces: Sequence[Trace]) -> "AttributeSchema":
        """Build a schema for ``names``, sniffing kinds from trace values.

        A name never observed in the log is treated as categorical (it will
        always encode to the missing code).
        """
        from .event_model import attribute_types

        kinds = attribute_types(traces)
        return cls(
            names=tuple(names),
            numeric=tuple(bool(kinds.get(name, False)) for name in names),
        )

    def width(self, k: int) -> int:
        return k * (1 + len(self.names))

    def feature_mask(self, k: int) -> tuple[bool, ...]:
        """Per-feature flag: True where the slot holds a raw numeric value."""
        mask = [False] * k
        for _ in range(k):
            mask.extend(self.numeric)
        return tuple(mask)


class CategoryCodec:
    """Append-only table mapping categorical strings to stable integer codes.

    Codes are assigned first-come-first-served starting at 1; code 0 is
    reserved for missing values. The same string always maps to the same
    code within a run, across cases and buckets.
    """

    def __init__(self) -> None:
        self._codes: dict[str, int] = {}

    def code(self, text: str) -> int:
        existing = self._codes.get(text)
        if existing is not None:
            return existing
        fresh = len(self._codes) + 1
        self._codes[text] = fresh
        return fresh

    def __len__(self) -> int:
        return len(self._codes)


def default_k_max(traces: Sequence[Trace]) -> int:
    """Lower median of the case lengths (deterministic for even counts)."""
    if not traces:
        raise EmptyLogError("cannot derive a maximum prefix length from an empty log")
    lengths = sorted(len(trace) for trace in traces)
    return lengths[(len(lengths) - 1) // 2]


def prefixes_of(trace: Trace, cfg: BucketConfig) -> list[Prefix]:
    """All prefixes of the trace with lengths in [k_min, min(k_max, N)]."""
    top = min(cfg.k_max, len(trace.events))
    return [
        Prefix(case_id=trace.case_id, k=k, events=tuple(trace.events[:k]))
        for k in range(cfg.k_min, top + 1)
    ]


def encode(
    prefix: Prefix,
    schema: AttributeSchema,
    codec: CategoryCodec,
    label: int | None = None,
) -> EncodedSample:
    """Index-based encoding of a prefix.

    Features are the activity codes at positions 1..k followed by, per
    position, the schema's attribute values (numeric passed through,
    categorical coded, missing encoded as the reserved missing code).
    """
    features: list = [codec.code(event.activity) for event in prefix.events]
    for event in prefix.events:
        for name, is_numeric in zip(schema.names, schema.numeric):
            value = event.attributes.get(name)
            if value is None:
                features.append(0.0 if is_numeric else MISSING_CODE)
            elif is_numeric:
                features.append(float(value))
            else:
                features.append(codec.code(str(value)))
    return EncodedSample(bucket=prefix.k, features=tuple(features), label=label)
