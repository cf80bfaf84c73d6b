"""Core event-stream model: events, frozen stores, time windows, label frequencies.

An :class:`EventStore` is a time-ordered, immutable collection of events over a
fixed activity alphabet, with optional per-event and per-entity attribute
tables. All downstream selection, encoding and filtering code works against
this one container; the heavy operations are backed by sorted numpy arrays so
window lookups are binary searches rather than scans.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"
_KINDS = (NUMERIC, CATEGORICAL, BOOLEAN)

SECONDS_PER_DAY = 86400.0


class SchemaError(ValueError):
    """A value, label, or column violates the declared schema."""


@dataclass(frozen=True)
class AttributeField:
    """Declared name, kind and (for categoricals) closed category list."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise SchemaError(f"unknown attribute kind {self.kind!r} for column {self.name!r}")
        if self.kind == CATEGORICAL and not self.categories:
            raise SchemaError(f"categorical column {self.name!r} needs a category list")
        if self.kind == CATEGORICAL and len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"duplicate categories in column {self.name!r}")

    def encode(self, value: Any) -> float:
        """Raw value -> stored float (plain value, category code, or 0/1 flag)."""
        if self.kind == NUMERIC:
            try:
                return float(value)
            except (TypeError, ValueError):
                raise SchemaError(f"column {self.name!r}: {value!r} is not numeric") from None
        if self.kind == BOOLEAN:
            if isinstance(value, str):
                low = value.strip().lower()
                if low in ("true", "1", "yes"):
                    return 1.0
                if low in ("false", "0", "no"):
                    return 0.0
                raise SchemaError(f"column {self.name!r}: {value!r} is not a boolean")
            return 1.0 if value else 0.0
        try:
            return float(self.categories.index(str(value)))
        except ValueError:
            raise SchemaError(
                f"column {self.name!r}: {value!r} not in declared categories"
            ) from None

    def decode(self, stored: float) -> Any:
        if self.kind == NUMERIC:
            return float(stored)
        if self.kind == BOOLEAN:
            return bool(stored)
        return self.categories[int(stored)]


@dataclass(frozen=True)
class Event:
    """One timestamped activity occurrence for one entity."""

    entity_id: Any
    activity: str
    time: float
    attributes: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"event time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval [start, end)."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"window start must precede end, got [{self.start}, {self.end})")

    def contains(self, t: float) -> bool:
        return self.start <= t < self.end


class EventStore:
    """Frozen event collection with columnar access.

    Events are stably sorted by time at construction (equal timestamps keep
    input order) and the store is immutable afterwards. ``time_origin`` tags
    the meaning of the time axis: ``"epoch_days"`` for absolute calendar time
    (days since the Unix epoch, UTC), ``None`` for relative step counts as
    produced by the synthetic generators.
    """

    def __init__(
        self,
        events: Sequence[Event],
        *,
        alphabet: Sequence[str] | None = None,
        event_schema: Sequence[AttributeField] = (),
        entity_schema: Sequence[AttributeField] = (),
        entity_attributes: Mapping[Any, Mapping[str, Any]] | None = None,
        time_origin: str | None = None,
    ) -> None:
        times = np.array([e.time for e in events], dtype=float)
        order = np.argsort(times, kind="stable")
        times = times[order]

        acts = [events[i].activity for i in order]
        if alphabet is None:
            alphabet = tuple(sorted(set(acts)))
        else:
            alphabet = tuple(alphabet)
            if len(set(alphabet)) != len(alphabet):
                raise SchemaError("alphabet contains duplicate labels")
        act_index = {a: i for i, a in enumerate(alphabet)}
        try:
            act_codes = np.array([act_index[a] for a in acts], dtype=np.int64)
        except KeyError as exc:
            raise SchemaError(f"activity {exc.args[0]!r} not in alphabet") from None

        # Entity codes follow first appearance in time order; deterministic and
        # independent of the id type (ids need not be mutually sortable).
        ent_index: dict[Any, int] = {}
        ent_codes = np.empty(len(events), dtype=np.int64)
        for row, i in enumerate(order):
            eid = events[i].entity_id
            code = ent_index.setdefault(eid, len(ent_index))
            ent_codes[row] = code
        entity_ids = list(ent_index)

        event_schema = tuple(event_schema)
        declared = {f.name for f in event_schema}
        event_attrs = {f.name: np.empty(len(events), dtype=float) for f in event_schema}
        for row, i in enumerate(order):
            attrs = events[i].attributes
            extra = set(attrs) - declared
            if extra:
                raise SchemaError(f"event {i} carries undeclared attributes {sorted(extra)}")
            for f in event_schema:
                if f.name not in attrs:
                    raise SchemaError(f"event {i} missing attribute {f.name!r}")
                event_attrs[f.name][row] = f.encode(attrs[f.name])

        entity_schema = tuple(entity_schema)
        entity_attrs: dict[str, np.ndarray] = {}
        if entity_schema:
            if entity_attributes is None:
                raise SchemaError("entity_schema declared but no entity attributes given")
            for f in entity_schema:
                col = np.empty(len(entity_ids), dtype=float)
                for code, eid in enumerate(entity_ids):
                    try:
                        col[code] = f.encode(entity_attributes[eid][f.name])
                    except KeyError:
                        raise SchemaError(
                            f"entity {eid!r} missing attribute {f.name!r}"
                        ) from None
                entity_attrs[f.name] = col

        self._init_arrays(
            times, ent_codes, act_codes, entity_ids, alphabet,
            event_schema, event_attrs, entity_schema, entity_attrs, time_origin,
        )

    def _init_arrays(self, times, ent_codes, act_codes, entity_ids, alphabet,
                     event_schema, event_attrs, entity_schema, entity_attrs,
                     time_origin) -> None:
        self._times = times
        self._ent_codes = ent_codes
        self._act_codes = act_codes
        self._entity_ids = list(entity_ids)
        self._alphabet = tuple(alphabet)
        self._event_schema = tuple(event_schema)
        self._event_attrs = dict(event_attrs)
        self._entity_schema = tuple(entity_schema)
        self._entity_attrs = dict(entity_attrs)
        self._time_origin = time_origin
        for arr in (self._times, self._ent_codes, self._act_codes, *self._event_attrs.values(),
                    *self._entity_attrs.values()):
            arr.setflags(write=False)
        if len(times) and times[0] < 0:
            raise ValueError("event times must be >= 0")
        n = len(self._entity_ids)
        first = np.full(n, np.inf)
        np.minimum.at(first, ent_codes, times)
        first.setflags(write=False)
        self._first_times = first

    @classmethod
    def from_arrays(
        cls,
        times: np.ndarray,
        entity_codes: np.ndarray,
        activity_codes: np.ndarray,
        entity_ids: Sequence[Any],
        alphabet: Sequence[str],
        *,
        event_schema: Sequence[AttributeField] = (),
        event_attrs: Mapping[str, np.ndarray] | None = None,
        entity_schema: Sequence[AttributeField] = (),
        entity_attrs: Mapping[str, np.ndarray] | None = None,
        time_origin: str | None = None,
    ) -> "EventStore":
        """Columnar fast path used by generators and the loader.

        Arrays are copied, then stably sorted by time here; entity and
        activity codes must already index into ``entity_ids`` / ``alphabet``.
        """
        times = np.asarray(times, dtype=float)
        ent_codes = np.asarray(entity_codes, dtype=np.int64)
        act_codes = np.asarray(activity_codes, dtype=np.int64)
        if act_codes.size and (act_codes.min() < 0 or act_codes.max() >= len(alphabet)):
            raise SchemaError("activity code out of range")
        if ent_codes.size and (ent_codes.min() < 0 or ent_codes.max() >= len(entity_ids)):
            raise SchemaError("entity code out of range")
        order = np.argsort(times, kind="stable")
        store = cls.__new__(cls)
        event_attrs = event_attrs or {}
        store._init_arrays(
            times[order],
            ent_codes[order],
            act_codes[order],
            list(entity_ids),
            tuple(alphabet),
            tuple(event_schema),
            {k: np.asarray(v, dtype=float)[order] for k, v in event_attrs.items()},
            tuple(entity_schema),
            {k: np.asarray(v, dtype=float).copy() for k, v in (entity_attrs or {}).items()},
            time_origin,
        )
        return store

    # -- basic accessors ---------------------------------------------------

    def __len__(self) -> int:
        return len(self._times)

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self._alphabet

    @property
    def event_schema(self) -> tuple[AttributeField, ...]:
        return self._event_schema

    @property
    def entity_schema(self) -> tuple[AttributeField, ...]:
        return self._entity_schema

    @property
    def entity_ids(self) -> list[Any]:
        return list(self._entity_ids)

    @property
    def entity_count(self) -> int:
        return len(self._entity_ids)

    @property
    def time_origin(self) -> str | None:
        return self._time_origin

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def entity_codes(self) -> np.ndarray:
        return self._ent_codes

    @property
    def activity_codes(self) -> np.ndarray:
        return self._act_codes

    @property
    def first_times(self) -> np.ndarray:
        """First event time per entity code (inf for entities with no events)."""
        return self._first_times

    def entity_code(self, entity_id: Any) -> int:
        try:
            return self._entity_ids.index(entity_id)
        except ValueError:
            raise KeyError(f"unknown entity {entity_id!r}") from None

    def event_attribute(self, name: str) -> np.ndarray:
        try:
            return self._event_attrs[name]
        except KeyError:
            raise SchemaError(f"no event attribute column {name!r}") from None

    def entity_attribute(self, name: str) -> np.ndarray:
        try:
            return self._entity_attrs[name]
        except KeyError:
            raise SchemaError(f"no entity attribute column {name!r}") from None

    def event_at(self, row: int) -> Event:
        attrs = {
            f.name: f.decode(self._event_attrs[f.name][row]) for f in self._event_schema
        }
        return Event(
            entity_id=self._entity_ids[self._ent_codes[row]],
            activity=self._alphabet[self._act_codes[row]],
            time=float(self._times[row]),
            attributes=attrs,
        )

    def __iter__(self) -> Iterator[Event]:
        for row in range(len(self)):
            yield self.event_at(row)

    # -- window operations -------------------------------------------------

    def window_bounds(self, window: TimeWindow) -> tuple[int, int]:
        """Row range [lo, hi) of events with start <= time < end."""
        lo = int(np.searchsorted(self._times, window.start, side="left"))
        hi = int(np.searchsorted(self._times, window.end, side="left"))
        return lo, hi

    def window_slice(self, window: TimeWindow) -> list[Event]:
        lo, hi = self.window_bounds(window)
        return [self.event_at(row) for row in range(lo, hi)]

    def entity_slice(self, window: TimeWindow, entity_id: Any) -> list[Event]:
        code = self.entity_code(entity_id)
        lo, hi = self.window_bounds(window)
        rows = np.nonzero(self._ent_codes[lo:hi] == code)[0] + lo
        return [self.event_at(int(row)) for row in rows]

    def entities_in_window(self, window: TimeWindow) -> np.ndarray:
        """Sorted entity codes of entities with at least one event in window."""
        lo, hi = self.window_bounds(window)
        return np.unique(self._ent_codes[lo:hi])


def activity_frequencies(events: Sequence[Event], alphabet: Sequence[str]) -> np.ndarray:
    """Relative frequency of each alphabet label among ``events``.

    Components sum to 1 for non-empty input; the empty sequence maps to the
    all-zeros vector (no renormalisation of nothing).
    """
    index = {a: i for i, a in enumerate(alphabet)}
    counts = np.zeros(len(alphabet))
    for e in events:
        try:
            counts[index[e.activity]] += 1.0
        except KeyError:
            raise SchemaError(f"activity {e.activity!r} not in alphabet") from None
    total = counts.sum()
    return counts / total if total else counts


def frequencies_from_codes(codes: np.ndarray, n_labels: int) -> np.ndarray:
    """Array variant of :func:`activity_frequencies` over activity codes."""
    counts = np.bincount(codes, minlength=n_labels).astype(float)
    total = counts.sum()
    return counts / total if total else counts
