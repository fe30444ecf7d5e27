"""Connection records, the dotted-quad/decimal IPv4 codec and CSV ingestion."""
from __future__ import annotations

import csv
import enum
import io
import ipaddress
import re
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import IO, Iterable, Optional

import numpy as np

IP_MAX = 2**32 - 1
PORT_MAX = 65535

# Inclusive (low, high) per attribute.
FIELD_RANGES: dict[str, tuple[int, int]] = {
    "src_ip": (0, IP_MAX),
    "dst_ip": (0, IP_MAX),
    "src_port": (0, PORT_MAX),
    "dst_port": (0, PORT_MAX),
    "duration": (0, 99_999_999),
    "state": (1, 20),
    "protocol": (1, 9),
    "bytes_src": (0, 9_999_999_999),
    "bytes_dst": (0, 9_999_999_999),
}
NUMERIC_FIELDS = tuple(FIELD_RANGES)
CSV_COLUMNS = NUMERIC_FIELDS + ("label",)

_OCTET = re.compile(r"0|[1-9][0-9]{0,2}")
_INTEGER = re.compile(r"-?[0-9]+")


class IpParseError(ValueError):
    """Raised for malformed dotted-quad text."""


class IngestError(ValueError):
    """Raised when a CSV row fails validation. ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


class Label(str, enum.Enum):
    NORMAL = "normal"
    ANOMALOUS = "anomalous"

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown label {text!r}") from None


def ip_to_decimal(addr: str) -> int:
    """Convert ``a.b.c.d`` to ``a*2**24 + b*2**16 + c*2**8 + d``.

    Only canonical text is accepted: four decimal octets, no leading zeros,
    no surrounding whitespace.
    """
    if not isinstance(addr, str):
        raise IpParseError(f"expected dotted-quad text, got {type(addr).__name__}")
    parts = addr.split(".")
    if len(parts) != 4:
        raise IpParseError(f"{addr!r}: expected 4 octets, found {len(parts)}")
    value = 0
    for pos, part in enumerate(parts, start=1):
        if not _OCTET.fullmatch(part):
            raise IpParseError(f"{addr!r}: octet {pos} ({part!r}) is not a canonical decimal")
        octet = int(part)
        if octet > 255:
            raise IpParseError(f"{addr!r}: octet {pos} ({part}) out of range 0-255")
        value = (value << 8) | octet
    return value


def decimal_to_ip(v: int) -> str:
    if not 0 <= v <= IP_MAX:
        raise ValueError(f"{v} is not a 32-bit unsigned integer")
    return str(ipaddress.IPv4Address(int(v)))


@dataclass(frozen=True)
class ConnectionRecord:
    """One observed connection. ``label`` is None only for unlabeled input."""

    src_ip: int
    dst_ip: int
    src_port: int
    dst_port: int
    duration: int
    state: int
    protocol: int
    bytes_src: int
    bytes_dst: int
    label: Optional[Label] = None

    def __post_init__(self):
        for name in NUMERIC_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            lo, hi = FIELD_RANGES[name]
            if not lo <= value <= hi:
                raise ValueError(f"{name} out of range [{lo}, {hi}]: {value}")
            object.__setattr__(self, name, int(value))
        if self.label is not None and not isinstance(self.label, Label):
            object.__setattr__(self, "label", Label.parse(self.label))

    @property
    def is_anomalous(self) -> bool:
        return self.label is Label.ANOMALOUS


@dataclass(frozen=True)
class Dataset:
    """Immutable, ordered collection of connection records."""

    records: tuple[ConnectionRecord, ...] = ()
    n_normal: int = field(init=False)
    n_anomalous: int = field(init=False)

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        n_anom = sum(1 for r in records if r.label is Label.ANOMALOUS)
        n_norm = sum(1 for r in records if r.label is Label.NORMAL)
        object.__setattr__(self, "n_anomalous", n_anom)
        object.__setattr__(self, "n_normal", n_norm)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def labeled(self) -> bool:
        return self.n_normal + self.n_anomalous == len(self.records)

    @cached_property
    def columns(self) -> dict[str, np.ndarray]:
        """Read-only int64 column arrays plus boolean ``anomalous``/``normal`` masks."""
        cols = {
            name: np.fromiter((getattr(r, name) for r in self.records), dtype=np.int64, count=len(self.records))
            for name in NUMERIC_FIELDS
        }
        cols["anomalous"] = np.fromiter((r.is_anomalous for r in self.records), dtype=bool, count=len(self.records))
        cols["normal"] = np.fromiter((r.label is Label.NORMAL for r in self.records), dtype=bool, count=len(self.records))
        for arr in cols.values():
            arr.flags.writeable = False
        return cols

    def subset(self, keep: Iterable[bool]) -> "Dataset":
        return Dataset(tuple(r for r, k in zip(self.records, keep) if k))


@dataclass(frozen=True)
class DatasetSummary:
    n_normal: int
    n_anomalous: int
    minima: Optional[dict[str, int]]
    maxima: Optional[dict[str, int]]


def summarize(ds: Dataset) -> DatasetSummary:
    if len(ds) == 0:
        return DatasetSummary(ds.n_normal, ds.n_anomalous, None, None)
    cols = ds.columns
    return DatasetSummary(
        ds.n_normal,
        ds.n_anomalous,
        {k: int(cols[k].min()) for k in NUMERIC_FIELDS},
        {k: int(cols[k].max()) for k in NUMERIC_FIELDS},
    )


def _parse_int(text: str, name: str) -> int:
    text = text.strip()
    if not _INTEGER.fullmatch(text):
        raise ValueError(f"{name} is not a base-10 integer: {text!r}")
    return int(text)


def load_dataset(source, *, require_label: bool = True) -> Dataset:
    """Parse a labeled-connection CSV.

    ``source`` may be a path, a text stream or a binary stream (decoded as
    UTF-8). The header must list the columns in ``CSV_COLUMNS`` order; with
    ``require_label=False`` the trailing ``label`` column may be omitted.
    Any invalid row aborts the whole load with an :class:`IngestError`.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_dataset(fh, require_label=require_label)
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise IngestError(1, "missing header row") from None
    has_label = header == list(CSV_COLUMNS)
    if not has_label:
        if require_label or header != list(NUMERIC_FIELDS):
            missing = [c for c in CSV_COLUMNS if c not in header]
            if missing and (require_label or missing != ["label"]):
                raise IngestError(1, f"missing column {missing[0]!r}")
            raise IngestError(1, f"columns must be {', '.join(CSV_COLUMNS)} in order")
    expected = len(header)

    records = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != expected:
            raise IngestError(line, f"expected {expected} fields, found {len(row)}")
        values = {}
        try:
            values["src_ip"] = ip_to_decimal(row[0].strip())
            values["dst_ip"] = ip_to_decimal(row[1].strip())
        except IpParseError as exc:
            raise IngestError(line, f"malformed IP: {exc}") from None
        try:
            for name, text in zip(NUMERIC_FIELDS[2:], row[2:]):
                value = _parse_int(text, name)
                lo, hi = FIELD_RANGES[name]
                if not lo <= value <= hi:
                    raise ValueError(f"{name} out of range [{lo}, {hi}]: {value}")
                values[name] = value
            label = Label.parse(row[-1]) if has_label else None
        except ValueError as exc:
            raise IngestError(line, str(exc)) from None
        records.append(ConnectionRecord(label=label, **values))
    return Dataset(tuple(records))


def write_dataset(ds: Dataset, sink: IO[str], *, include_label: bool = True) -> None:
    """Write ``ds`` in the ingest CSV format (labels lowercase)."""
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_COLUMNS if include_label else NUMERIC_FIELDS)
    for r in ds.records:
        row = [decimal_to_ip(r.src_ip), decimal_to_ip(r.dst_ip)]
        row += [getattr(r, f.name) for f in fields(r)[2:9]]
        if include_label:
            row.append(r.label.value if r.label is not None else "")
        writer.writerow(row)
