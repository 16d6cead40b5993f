"""Detector time-tag streams and their on-disk formats.

Binary format (bit-exact): the file starts with magic b"TTAG", one u8
version byte (currently 1) and a little-endian u32 record count (0 means
unknown / streamed), followed by 9-byte little-endian records of u8 channel
plus u64 time in picoseconds.  Records are sorted by time.  The CSV
alternative has the header ``channel,time_ps``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

TTAG_MAGIC = b"TTAG"
TTAG_VERSION = 1

_RECORD_DTYPE = np.dtype([("channel", "u1"), ("time_ps", "<u8")])
assert _RECORD_DTYPE.itemsize == 9


@dataclass(frozen=True)
class TagStream:
    """All tags of one detector channel, times in integer picoseconds."""

    channel: int
    times_ps: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.times_ps, dtype=np.int64)
        object.__setattr__(self, "times_ps", t)
        if not 0 <= self.channel <= 255:
            raise ValueError(f"channel must fit in a byte, got {self.channel}")
        if t.size and t[0] < 0:
            raise ValueError("tag times must be non-negative")
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise ValueError("tag times must be sorted non-decreasing")

    def __len__(self) -> int:
        return int(self.times_ps.size)

    def shifted(self, offset_ps: int) -> "TagStream":
        return TagStream(self.channel, self.times_ps + int(offset_ps))


def _merge_records(streams) -> np.ndarray:
    total = sum(len(s) for s in streams)
    rec = np.empty(total, dtype=_RECORD_DTYPE)
    pos = 0
    for s in streams:
        rec["channel"][pos:pos + len(s)] = s.channel
        rec["time_ps"][pos:pos + len(s)] = s.times_ps.astype(np.uint64)
        pos += len(s)
    order = np.argsort(rec["time_ps"], kind="stable")
    return rec[order]


def write_ttag(path, streams) -> None:
    """Write one or more TagStreams merged and time-sorted."""
    if isinstance(streams, TagStream):
        streams = [streams]
    rec = _merge_records(streams)
    count = rec.size if rec.size <= 0xFFFFFFFF else 0
    with open(path, "wb") as fh:
        fh.write(TTAG_MAGIC)
        fh.write(struct.pack("<BI", TTAG_VERSION, count))
        fh.write(rec.tobytes())


def read_ttag(path) -> dict[int, TagStream]:
    """Read a TTAG file; returns {channel: TagStream} with sorted times."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != TTAG_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}, expected {TTAG_MAGIC!r}")
        head = fh.read(5)
        if len(head) != 5:
            raise DataFormatError(f"{path}: truncated header")
        version, count = struct.unpack("<BI", head)
        if version != TTAG_VERSION:
            raise DataFormatError(
                f"{path}: unsupported format version {version} (expected {TTAG_VERSION})")
        payload = fh.read()
    if len(payload) % _RECORD_DTYPE.itemsize:
        raise DataFormatError(f"{path}: payload is not a whole number of records")
    rec = np.frombuffer(payload, dtype=_RECORD_DTYPE)
    if count and rec.size != count:
        raise DataFormatError(
            f"{path}: header promises {count} records, file holds {rec.size}")
    out = {}
    for ch in np.unique(rec["channel"]):
        times = np.sort(rec["time_ps"][rec["channel"] == ch]).astype(np.int64)
        out[int(ch)] = TagStream(int(ch), times)
    return out


def write_tag_csv(path, streams) -> None:
    if isinstance(streams, TagStream):
        streams = [streams]
    rec = _merge_records(streams)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("channel,time_ps\n")
        for ch, t in zip(rec["channel"], rec["time_ps"]):
            fh.write(f"{ch},{t}\n")


def read_tag_csv(path) -> dict[int, TagStream]:
    chans: dict[int, list[int]] = {}
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "channel,time_ps":
            raise DataFormatError(f"{path}: unexpected header {header!r}")
        for ln, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cols = line.strip().split(",")
            if len(cols) != 2:
                raise DataFormatError(f"{path}:{ln}: expected two columns")
            try:
                chans.setdefault(int(cols[0]), []).append(int(cols[1]))
            except ValueError as exc:
                raise DataFormatError(f"{path}:{ln}: {exc}") from exc
    return {ch: TagStream(ch, np.sort(np.array(ts, dtype=np.int64)))
            for ch, ts in chans.items()}


def read_tags(path) -> dict[int, TagStream]:
    """Dispatch on file content: TTAG binary or CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == TTAG_MAGIC:
        return read_ttag(path)
    return read_tag_csv(path)
