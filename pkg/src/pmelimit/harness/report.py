"""Check records, run reports and CSV output."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, str)) or x is None:
        return str(x)
    if isinstance(x, int):
        return str(x)
    return "%.17g" % float(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def _json_num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass
class CheckRecord:
    name: str
    anchor: str
    value: float
    bound: float
    passed: bool
    note: str = ""

    def __post_init__(self):
        if not self.anchor:
            raise ValueError("a check needs a nonempty anchor (or 'plumbing')")

    @property
    def slack(self) -> float:
        return self.bound - self.value

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "value": _json_num(float(self.value)),
            "bound": _json_num(float(self.bound)),
            "slack": _json_num(float(self.slack)),
            "passed": bool(self.passed),
            "note": self.note,
        }


CHECK_COLUMNS = ("name", "anchor", "value", "bound", "slack", "passed")


@dataclass
class RunReport:
    command: str
    config_digest: str
    checks: list[CheckRecord] = field(default_factory=list)
    files: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> list[str]:
        return [f"{c.name} [{c.anchor}]" for c in self.checks if not c.passed]

    def add(self, *records: CheckRecord) -> None:
        self.checks.extend(records)

    def to_dict(self, with_timings: bool = True) -> dict:
        d = {
            "command": self.command,
            "config_digest": self.config_digest,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "files": sorted(self.files),
            "meta": self.meta,
        }
        if with_timings:
            d["timings"] = self.timings
        return d

    def checks_csv(self) -> str:
        return csv_text(CHECK_COLUMNS, ((c.name, c.anchor, c.value, c.bound, c.slack, c.passed) for c in self.checks))

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "checks.csv").write_text(self.checks_csv())
        if "checks.csv" not in self.files:
            self.files.append("checks.csv")
        (out / "run.json").write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2))


def digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


MASK_MAGIC = b"MESAMASK"


def mask_bytes(mask) -> bytes:
    """16-byte header (magic, two little-endian u32 dims) then packed row-major bits."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim == 1:
        m = m[:, None]
    header = MASK_MAGIC + np.array(m.shape, dtype="<u4").tobytes()
    return header + np.packbits(m.ravel(order="C")).tobytes()


def read_mask(data: bytes):
    if data[:8] != MASK_MAGIC:
        raise ValueError("not a mask file")
    nx, ny = np.frombuffer(data[8:16], dtype="<u4")
    bits = np.unpackbits(np.frombuffer(data[16:], dtype=np.uint8))[: nx * ny]
    return bits.astype(bool).reshape(int(nx), int(ny))
