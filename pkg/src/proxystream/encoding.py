"""Feature encodings for the two entity families.

Shopper entities become journey matrices (one column per week, one row per
visit aggregate or department frequency) summarised by per-row linear fits.
Invoice entities become prefix label frequencies plus fixed case attributes,
with a one-hot view for averaging and a mixed view for Gower distances.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .events import CATEGORICAL, EventStore
from .filtering import VCI_LABEL, label_times

JOURNEY_AGGREGATE_ROWS = (
    "freshness_mean",
    "item_value_mean",
    "product_density_mean",
    "total_value_sum",
    "total_item_count_sum",
    "visit_count",
)


def journey_row_names(alphabet: Sequence[str]) -> tuple[str, ...]:
    """Row labels of the journey matrix: aggregates, then label frequencies."""
    return JOURNEY_AGGREGATE_ROWS + tuple(f"freq_{a}" for a in alphabet)


def journey_row_count(n_labels: int) -> int:
    return len(JOURNEY_AGGREGATE_ROWS) + n_labels


def encode_journeys(store: EventStore, entity_codes: np.ndarray,
                    window_end: float, n_weeks: int) -> np.ndarray:
    """Journey matrices for a batch of entities.

    Week k of the result covers [window_end - n_weeks + k,
    window_end - n_weeks + k + 1). Weeks without visits are all-zero columns
    (means and frequencies included, no NaNs). Returns (m, F, n_weeks).
    """
    if n_weeks < 1:
        raise ValueError("n_weeks must be >= 1")
    entity_codes = np.asarray(entity_codes, dtype=np.int64)
    m = len(entity_codes)
    n_labels = len(store.alphabet)
    rows = journey_row_count(n_labels)
    out = np.zeros((m, rows, n_weeks))
    if m == 0:
        return out

    start = window_end - n_weeks
    lo = int(np.searchsorted(store.times, start, side="left"))
    hi = int(np.searchsorted(store.times, window_end, side="left"))
    if lo == hi:
        return out

    pos = np.full(store.entity_count, -1, dtype=np.int64)
    pos[entity_codes] = np.arange(m)
    ents = store.entity_codes[lo:hi]
    keep = pos[ents] >= 0
    if not keep.any():
        return out

    idx = np.nonzero(keep)[0] + lo
    week = np.floor(store.times[idx] - start).astype(np.int64)
    key = pos[store.entity_codes[idx]] * n_weeks + week
    size = m * n_weeks

    counts = np.bincount(key, minlength=size).astype(float)
    sums = {
        name: np.bincount(key, weights=store.event_attribute(name)[idx], minlength=size)
        for name in ("freshness", "item_value", "product_density",
                     "total_value", "total_item_count")
    }
    safe = np.where(counts > 0, counts, 1.0)
    shape = (m, n_weeks)
    out[:, 0] = (sums["freshness"] / safe).reshape(shape)
    out[:, 1] = (sums["item_value"] / safe).reshape(shape)
    out[:, 2] = (sums["product_density"] / safe).reshape(shape)
    out[:, 3] = sums["total_value"].reshape(shape)
    out[:, 4] = sums["total_item_count"].reshape(shape)
    out[:, 5] = counts.reshape(shape)

    label_key = key * n_labels + store.activity_codes[idx]
    label_counts = np.bincount(label_key, minlength=size * n_labels).astype(float)
    freqs = (label_counts.reshape(size, n_labels) / safe[:, None]).reshape(m, n_weeks, n_labels)
    out[:, len(JOURNEY_AGGREGATE_ROWS):] = np.swapaxes(freqs, 1, 2)
    return out


def encode_journey(store: EventStore, entity_id: Any,
                   window_end: float, n_weeks: int) -> np.ndarray:
    """Single-entity journey matrix (F, n_weeks); see :func:`encode_journeys`."""
    code = store.entity_code(entity_id)
    return encode_journeys(store, np.array([code]), window_end, n_weeks)[0]


def weekly_spend(store: EventStore, entity_codes: np.ndarray,
                 start: float, end: float) -> np.ndarray:
    """Sum of total_value per selected entity over [start, end)."""
    entity_codes = np.asarray(entity_codes, dtype=np.int64)
    lo = int(np.searchsorted(store.times, start, side="left"))
    hi = int(np.searchsorted(store.times, end, side="left"))
    totals = np.zeros(store.entity_count)
    np.add.at(totals, store.entity_codes[lo:hi],
              store.event_attribute("total_value")[lo:hi])
    return totals[entity_codes]


# -- linear-fit summaries --------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    """Per-row least-squares line over week indices 0..n_weeks-1.

    ``residual`` is the root mean squared residual of the fit, an RMSE over
    the window columns.
    """

    slope: np.ndarray
    intercept: np.ndarray
    residual: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.slope, self.intercept, self.residual])


def linear_fit_batch(matrices: np.ndarray) -> np.ndarray:
    """Fit each row of each matrix; returns (m, 3F) as [slopes|intercepts|residuals]."""
    matrices = np.asarray(matrices, dtype=float)
    if matrices.ndim == 2:
        matrices = matrices[None]
    n_weeks = matrices.shape[2]
    if n_weeks < 2:
        raise ValueError("need at least two week columns to fit a line")
    x = np.arange(n_weeks, dtype=float)
    xc = x - x.mean()
    var = float(xc @ xc)
    ym = matrices.mean(axis=2)
    slope = (matrices * xc).sum(axis=2) / var
    intercept = ym - slope * x.mean()
    fitted = slope[..., None] * x + intercept[..., None]
    residual = np.sqrt(((matrices - fitted) ** 2).mean(axis=2))
    return np.concatenate([slope, intercept, residual], axis=1)


def linear_fit(matrix: np.ndarray) -> LinearFit:
    """Single-matrix variant of :func:`linear_fit_batch`."""
    matrix = np.asarray(matrix, dtype=float)
    n_rows = matrix.shape[0]
    flat = linear_fit_batch(matrix[None])[0]
    return LinearFit(
        slope=flat[:n_rows],
        intercept=flat[n_rows:2 * n_rows],
        residual=flat[2 * n_rows:],
    )


def standardize_columns(x: np.ndarray) -> np.ndarray:
    """Z-score per column; constant columns map to zero."""
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    return (x - mu) / np.where(sd > 0, sd, 1.0)


# -- invoice features ------------------------------------------------------

@dataclass(frozen=True)
class InvoiceEncoding:
    """Two aligned views of the same invoice batch.

    ``mixed`` holds label frequencies plus raw category codes / boolean flags
    (for Gower distances, with ``categorical_mask`` marking the non-numeric
    columns); ``onehot`` expands the same attributes into indicator columns
    (for averaging into proxies).
    """

    mixed: np.ndarray
    onehot: np.ndarray
    categorical_mask: np.ndarray


def one_hot_width(store: EventStore) -> int:
    width = len(store.alphabet)
    for f in store.entity_schema:
        width += len(f.categories) if f.kind == CATEGORICAL else 1
    return width


def prefix_label_counts(store: EventStore, creation_times: np.ndarray) -> np.ndarray:
    """Per entity, counts of events strictly before its creation time.

    Entities with creation time inf count their whole history; the creation
    event itself is excluded by the strict inequality. Returns
    (entity_count, len(alphabet)).
    """
    n = store.entity_count
    n_labels = len(store.alphabet)
    mask = store.times < creation_times[store.entity_codes]
    key = store.entity_codes[mask] * n_labels + store.activity_codes[mask]
    return np.bincount(key, minlength=n * n_labels).reshape(n, n_labels).astype(float)


def invoice_encoding(store: EventStore, entity_codes: np.ndarray,
                     creation_times: np.ndarray | None = None,
                     prefix_counts: np.ndarray | None = None) -> InvoiceEncoding:
    """Encode a batch of invoice entities; see :class:`InvoiceEncoding`.

    ``creation_times`` and ``prefix_counts`` are per-entity-code arrays over
    the whole store; both are derived here when not supplied.
    """
    entity_codes = np.asarray(entity_codes, dtype=np.int64)
    if prefix_counts is None:
        if creation_times is None:
            creation_times = label_times(store, VCI_LABEL)
        prefix_counts = prefix_label_counts(store, creation_times)
    m = len(entity_codes)
    n_labels = len(store.alphabet)

    counts = prefix_counts[entity_codes]
    totals = counts.sum(axis=1, keepdims=True)
    freqs = counts / np.where(totals > 0, totals, 1.0)

    schema = store.entity_schema
    mixed = np.zeros((m, n_labels + len(schema)))
    mixed[:, :n_labels] = freqs
    cat_mask = np.zeros(n_labels + len(schema), dtype=bool)

    onehot = np.zeros((m, one_hot_width(store)))
    onehot[:, :n_labels] = freqs
    offset = n_labels
    for j, f in enumerate(schema):
        col = store.entity_attribute(f.name)[entity_codes]
        mixed[:, n_labels + j] = col
        cat_mask[n_labels + j] = True
        if f.kind == CATEGORICAL:
            onehot[np.arange(m), offset + col.astype(np.int64)] = 1.0
            offset += len(f.categories)
        else:
            onehot[:, offset] = col
            offset += 1
    return InvoiceEncoding(mixed=mixed, onehot=onehot, categorical_mask=cat_mask)


def encode_invoice(store: EventStore, entity_id: Any) -> tuple[np.ndarray, dict[str, Any]]:
    """Single-entity invoice features: (label frequency vector, attribute dict).

    Raises ValueError for an entity without a creation event.
    """
    code = store.entity_code(entity_id)
    creation = label_times(store, VCI_LABEL)
    if not np.isfinite(creation[code]):
        raise ValueError(f"entity {entity_id!r} has no {VCI_LABEL!r} event")
    enc = invoice_encoding(store, np.array([code]), creation_times=creation)
    n_labels = len(store.alphabet)
    attrs = {
        f.name: f.decode(store.entity_attribute(f.name)[code])
        for f in store.entity_schema
    }
    return enc.mixed[0, :n_labels], attrs
