"""Categorical sequence containers, dataset loaders, and fold planning.

Sequences take values in {1, ..., n}. Missing observations are stored as
the sentinel ``MISSING`` (-1), never as a category code. Each sequence
carries an initial state y0 at position 0 that the likelihood conditions
on; positions 1..T are the modelled observations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MISSING = -1

_FORMATS = ("jsonl", "csv")


@dataclass(frozen=True)
class CategoricalSequence:
    """One observed sequence: id, initial state y0, and values over 1..T."""

    id: str
    y0: int
    values: tuple[int, ...]

    def __post_init__(self):
        if not self.id:
            raise ValueError("sequence id must be non-empty")
        if len(self.values) < 1:
            raise ValueError(f"sequence {self.id!r}: T must be >= 1")
        if self.y0 == MISSING:
            raise ValueError(f"sequence {self.id!r}: y0 may not be missing")
        if self.y0 < 1:
            raise ValueError(f"sequence {self.id!r}: y0 must be a category in 1..n")
        for v in self.values:
            if v != MISSING and v < 1:
                raise ValueError(
                    f"sequence {self.id!r}: values must be categories in 1..n "
                    f"or MISSING, got {v}"
                )

    @property
    def T(self) -> int:
        return len(self.values)

    @property
    def has_missing(self) -> bool:
        return MISSING in self.values

    @property
    def n_missing(self) -> int:
        return sum(1 for v in self.values if v == MISSING)

    def codes(self) -> np.ndarray:
        """0-based integer codes of length T+1: [y0-1, y1-1, ...], missing -> -1."""
        out = np.empty(self.T + 1, dtype=np.int64)
        out[0] = self.y0 - 1
        for j, v in enumerate(self.values, start=1):
            out[j] = -1 if v == MISSING else v - 1
        return out


@dataclass(frozen=True)
class SequenceDataset:
    """A collection of sequences over a shared alphabet {1..n}."""

    n: int
    sequences: tuple[CategoricalSequence, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("alphabet size n must be >= 1")
        if len(self.sequences) == 0:
            raise ValueError("dataset must contain at least one sequence")
        seen = set()
        for seq in self.sequences:
            if seq.id in seen:
                raise ValueError(f"duplicate sequence id {seq.id!r}")
            seen.add(seq.id)
            if seq.y0 > self.n:
                raise ValueError(
                    f"sequence {seq.id!r}: y0={seq.y0} category out of range 1..{self.n}"
                )
            for v in seq.values:
                if v != MISSING and v > self.n:
                    raise ValueError(
                        f"sequence {seq.id!r}: value {v} category out of range 1..{self.n}"
                    )

    @property
    def L(self) -> int:
        return len(self.sequences)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sequences)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(s.T for s in self.sequences)

    @property
    def total_length(self) -> int:
        return sum(s.T for s in self.sequences)

    def by_id(self, seq_id: str) -> CategoricalSequence:
        for s in self.sequences:
            if s.id == seq_id:
                return s
        raise KeyError(f"no sequence with id {seq_id!r}")

    def subset(self, ids) -> "SequenceDataset":
        """New dataset restricted to the given ids, in the given order."""
        return SequenceDataset(self.n, tuple(self.by_id(i) for i in ids))


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation folds: per fold, (train ids, test ids)."""

    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]

    def __post_init__(self):
        if len(self.folds) < 1:
            raise ValueError("fold plan must contain at least one fold")
        for train, test in self.folds:
            if len(test) == 0:
                raise ValueError("empty test set in fold plan")
            if set(train) & set(test):
                raise ValueError("train and test sets overlap")

    @property
    def F(self) -> int:
        return len(self.folds)

    @property
    def test_ids(self) -> tuple[tuple[str, ...], ...]:
        return tuple(test for _, test in self.folds)


def _open_source(source):
    if isinstance(source, (str, Path)):
        return open(source, "r"), True
    return source, False


def load_dataset(source, format: str = "jsonl", missing_token: str = "NA",
                 n: int | None = None) -> SequenceDataset:
    """Load a dataset from a file path or text stream.

    JSONL: one object per line with fields id, y0, values (null = missing);
    an optional first line {"n": <int>} declares the alphabet size.
    CSV: header ``sequence_id,position,value`` with 1-based contiguous
    positions per id; a position-0 row supplies y0, otherwise y0 defaults
    to the first observed value (recorded in the dataset warnings).
    ``missing_token`` marks missing values in CSV.
    """
    if format not in _FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {_FORMATS}")
    fh, owned = _open_source(source)
    try:
        if format == "jsonl":
            return _load_jsonl(fh, n)
        return _load_csv(fh, missing_token, n)
    finally:
        if owned:
            fh.close()


def _load_jsonl(fh, n: int | None) -> SequenceDataset:
    header_n = None
    sequences = []
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"line {lineno}: invalid JSON: {e}") from None
        if lineno == 1 and set(obj) == {"n"}:
            header_n = int(obj["n"])
            continue
        missing_fields = {"id", "y0", "values"} - set(obj)
        if missing_fields:
            raise ValueError(f"line {lineno}: missing fields {sorted(missing_fields)}")
        values = tuple(MISSING if v is None else int(v) for v in obj["values"])
        sequences.append(CategoricalSequence(str(obj["id"]), int(obj["y0"]), values))
    if n is not None and header_n is not None and n != header_n:
        raise ValueError(f"alphabet size mismatch: header n={header_n}, argument n={n}")
    size = n if n is not None else header_n
    if size is None:
        raise ValueError("alphabet size n not given (no JSONL header and no n argument)")
    return SequenceDataset(size, tuple(sequences))


def _load_csv(fh, missing_token: str, n: int | None) -> SequenceDataset:
    if n is None:
        raise ValueError("CSV input requires an explicit alphabet size n")
    header = fh.readline().strip()
    cols = [c.strip() for c in header.split(",")]
    if cols != ["sequence_id", "position", "value"]:
        raise ValueError(
            "CSV header must be 'sequence_id,position,value', got " + repr(header)
        )
    rows: dict[str, dict[int, int]] = {}
    order: list[str] = []
    for lineno, line in enumerate(fh, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        sid, pos_s, val_s = (p.strip() for p in parts)
        try:
            pos = int(pos_s)
        except ValueError:
            raise ValueError(f"line {lineno}: position {pos_s!r} is not an integer") from None
        if val_s == missing_token:
            val = MISSING
        else:
            try:
                val = int(val_s)
            except ValueError:
                raise ValueError(
                    f"line {lineno}: unknown category symbol {val_s!r}"
                ) from None
        if sid not in rows:
            rows[sid] = {}
            order.append(sid)
        if pos in rows[sid]:
            raise ValueError(f"line {lineno}: duplicate position {pos} for id {sid!r}")
        rows[sid][pos] = val
    if not rows:
        raise ValueError("CSV contains no data rows")
    sequences = []
    warnings = []
    for sid in order:
        by_pos = rows[sid]
        has_y0 = 0 in by_pos
        positions = sorted(p for p in by_pos if p != 0)
        if positions != list(range(1, len(positions) + 1)):
            raise ValueError(f"id {sid!r}: positions must be 1-based and contiguous")
        values = tuple(by_pos[p] for p in positions)
        if has_y0:
            y0 = by_pos[0]
        else:
            observed = [v for v in values if v != MISSING]
            if not observed:
                raise ValueError(f"id {sid!r}: cannot default y0, all values missing")
            y0 = observed[0]
            warnings.append(f"id {sid!r}: y0 absent, defaulted to first observed value {y0}")
        sequences.append(CategoricalSequence(sid, y0, values))
    return SequenceDataset(n, tuple(sequences), warnings=tuple(warnings))


def save_dataset(dataset: SequenceDataset, path) -> None:
    """Write the dataset as JSONL with a leading {"n": ...} header line."""
    from ._util import atomic_write_text, dump_json_line

    lines = [dump_json_line({"n": dataset.n})]
    for seq in dataset.sequences:
        values = [None if v == MISSING else v for v in seq.values]
        lines.append(dump_json_line({"id": seq.id, "y0": seq.y0, "values": values}))
    atomic_write_text(path, "\n".join(lines) + "\n")


def dataset_to_csv(dataset: SequenceDataset, path, missing_token: str = "NA") -> None:
    """Write the dataset as CSV (position 0 rows carry y0)."""
    from ._util import write_csv

    def rows():
        for seq in dataset.sequences:
            yield (seq.id, 0, seq.y0)
            for pos, v in enumerate(seq.values, start=1):
                yield (seq.id, pos, missing_token if v == MISSING else v)

    write_csv(path, ["sequence_id", "position", "value"], rows())


def make_folds(dataset: SequenceDataset, F: int, strategy: str = "hold_one_out",
               seed: int = 0) -> FoldPlan:
    """Plan cross-validation folds over whole sequences.

    ``hold_one_out`` produces L single-sequence test sets in dataset order
    (F must equal L or be omitted by passing L). ``random_partition``
    shuffles ids with the given seed and splits them into F test sets whose
    sizes differ by at most one.
    """
    ids = list(dataset.ids)
    L = len(ids)
    if strategy == "hold_one_out":
        if F != L:
            raise ValueError(f"hold_one_out requires F == L ({L}), got {F}")
        test_sets = [[i] for i in ids]
    elif strategy == "random_partition":
        if not (2 <= F <= L):
            raise ValueError(f"random_partition requires 2 <= F <= L, got F={F}, L={L}")
        rng = np.random.default_rng(seed)
        perm = [ids[k] for k in rng.permutation(L)]
        base, extra = divmod(L, F)
        test_sets = []
        start = 0
        for f in range(F):
            size = base + (1 if f < extra else 0)
            test_sets.append(perm[start:start + size])
            start += size
    else:
        raise ValueError(f"unknown fold strategy {strategy!r}")
    folds = []
    for test in test_sets:
        train = tuple(i for i in ids if i not in set(test))
        folds.append((train, tuple(test)))
    return FoldPlan(tuple(folds))
