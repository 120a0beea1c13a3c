"""Text channel: windows are described by short text items (an overall trend
sentence, one item per variable, and any overlapping calendar events), and
each distinct item owns a trainable embedding vector looked up by a stable
content hash.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nn import Module, derive_rng, EMBED_INIT_RANGE
from .tensor import Tensor, stack

TREND_LABELS = (
    "rising",
    "falling",
    "first rising then falling",
    "first falling then rising",
)

_TIE = 1e-9


def stable_text_id(category: str, content: str) -> str:
    """Content-addressed id: equal (category, content) pairs always collide."""
    digest = hashlib.sha256(f"{category}\x1f{content}".encode("utf-8")).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class TextItem:
    category: str   # "trend" | "variable" | "event"
    content: str

    @property
    def stable_id(self) -> str:
        return stable_text_id(self.category, self.content)


def _half_slope(seg: np.ndarray) -> float:
    if seg.size < 2:
        return 0.0
    t = np.arange(seg.size, dtype=np.float64)
    slope = np.polyfit(t, seg, 1)[0]
    return float(slope)


def label_trend(x_enc: np.ndarray) -> str:
    """Classify a window by the least-squares slopes of its two halves.

    The variable-averaged series is z-normalized first so the label is
    invariant under affine rescaling of the inputs; slopes within 1e-9 of
    zero count as non-negative.
    """
    x = np.asarray(x_enc, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DataError("label_trend needs at least 2 time steps")
    avg = x.mean(axis=1)
    std = avg.std()
    if std > 0:
        avg = (avg - avg.mean()) / std
    mid = avg.size // 2
    s1, s2 = _half_slope(avg[:mid]), _half_slope(avg[mid:])
    rising1 = s1 >= 0 or abs(s1) < _TIE
    rising2 = s2 >= 0 or abs(s2) < _TIE
    if rising1 and rising2:
        return TREND_LABELS[0]
    if not rising1 and not rising2:
        return TREND_LABELS[1]
    if rising1:
        return TREND_LABELS[2]
    return TREND_LABELS[3]


def build_text_set(x_enc: np.ndarray, variable_names: list[str],
                   events: list[str] | None = None) -> list[TextItem]:
    """One trend item, one item per variable, then any event items."""
    items = [TextItem("trend", f"The input window trend is {label_trend(x_enc)}.")]
    for name in variable_names:
        items.append(TextItem("variable", f"Time series variable {name}."))
    for content in events or []:
        items.append(TextItem("event", content))
    return items


@dataclass(frozen=True)
class Event:
    start_ts: str
    end_ts: str
    content: str


def load_events_csv(path) -> list[Event]:
    """Sidecar CSV with header start_ts,end_ts,content."""
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"start_ts", "end_ts", "content"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(f"{path}: events file needs columns start_ts,end_ts,content")
        for row in reader:
            events.append(Event(row["start_ts"].strip(), row["end_ts"].strip(),
                                row["content"].strip()))
    return events


def events_for_window(events: list[Event], win_start_ts: str, win_end_ts: str) -> list[str]:
    """Contents of events whose [start, end] overlaps the window's time span.

    Timestamps compare lexicographically, which matches chronological order
    for uniformly formatted ISO-8601 stamps.
    """
    picked = []
    for ev in events:
        if not (win_end_ts < ev.start_ts or ev.end_ts < win_start_ts):
            picked.append(ev.content)
    return picked


def attach_window_texts(samples, series, events: list[Event] | None = None) -> None:
    """Give every window its text set: trend sentence, variable items, and
    whichever events overlap the window's time span."""
    for s in samples:
        overlapping: list[str] = []
        if events:
            start_ts = series.timestamps[s.abs_start]
            end_ts = series.timestamps[s.abs_start + s.x_enc.shape[0] - 1]
            overlapping = events_for_window(events, start_ts, end_ts)
        s.texts = build_text_set(s.x_enc, series.variable_names, overlapping)


class TextEmbeddingStore(Module):
    """Trainable vector per stable text id.

    Unseen ids get a deterministic init derived from (seed, id), so lookup
    order never affects values; vectors may also be pre-loaded from CSV.
    """

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.table: dict[str, Tensor] = {}

    def embedding(self, item: TextItem) -> Tensor:
        sid = item.stable_id
        if sid not in self.table:
            rng = derive_rng(self.seed, f"text/{sid}")
            vec = rng.uniform(-EMBED_INIT_RANGE, EMBED_INIT_RANGE, size=self.dim)
            self.table[sid] = Tensor(vec, requires_grad=True)
        return self.table[sid]

    def import_csv(self, path) -> int:
        """Load initial vectors; columns stable_id,v0..v{dim-1}. Returns count."""
        n = 0
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or header[0] != "stable_id" or len(header) != self.dim + 1:
                raise DataError(f"{path}: expected header stable_id,v0..v{self.dim - 1}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != self.dim + 1:
                    raise DataError(f"{path}: row {lineno} has {len(row)} cells")
                try:
                    vec = np.asarray([float(c) for c in row[1:]], dtype=np.float64)
                except ValueError:
                    raise DataError(f"{path}: non-numeric value at row {lineno}") from None
                self.table[row[0]] = Tensor(vec, requires_grad=True)
                n += 1
        return n


def embed_texts(store: TextEmbeddingStore, items: list[TextItem]) -> Tensor:
    """Stack the items' vectors into an (N, dim) matrix."""
    if not items:
        raise DataError("cannot embed an empty text set")
    return stack([store.embedding(it) for it in items], axis=0)
