"""Record files: CSV measurement records, their JSON sidecars, and JSON reports.

Record CSV header: ``setting_a,setting_b,outcome_a,outcome_b``. Settings are
``X`` / ``P`` or an analyzer angle in radians (0 reads as X, pi/2 as P).
Schwinger-readout files may add the raw count columns
``n_plus_a,n_minus_a,n_plus_b,n_minus_b``. A sidecar ``<file>.json`` may carry
``"units": "particles"`` plus the readout scale.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distributions import SampleRecord, Setting
from .errors import SchemaError

REQUIRED_COLUMNS = ("setting_a", "setting_b", "outcome_a", "outcome_b")
COUNT_COLUMNS = ("n_plus_a", "n_minus_a", "n_plus_b", "n_minus_b")
ANGLE_TOL = 1e-9
UNITS = ("quadrature", "particles")


def parse_setting(text: str) -> float:
    """Setting label to analyzer angle in radians."""
    label = text.strip()
    if label.upper() == "X":
        return 0.0
    if label.upper() == "P":
        return math.pi / 2
    try:
        angle = float(label)
    except ValueError:
        raise ValueError(f"setting {text!r} is neither X, P nor an angle") from None
    if not math.isfinite(angle):
        raise ValueError(f"setting angle {text!r} is not finite")
    return angle


def format_setting(angle: float) -> str:
    if angle == 0.0:
        return "X"
    if angle == math.pi / 2:
        return "P"
    return repr(float(angle))


def setting_of_angle(angle: float) -> Setting | None:
    if abs(angle) <= ANGLE_TOL:
        return Setting.X
    if abs(angle - math.pi / 2) <= ANGLE_TOL:
        return Setting.P
    return None


@dataclass
class RecordTable:
    """Column-oriented records; settings held as angles."""

    angle_a: np.ndarray
    angle_b: np.ndarray
    outcome_a: np.ndarray
    outcome_b: np.ndarray
    counts: np.ndarray | None = None
    sources: list[dict] = field(default_factory=list)
    sidecar: dict = field(default_factory=dict)

    def __len__(self):
        return self.outcome_a.size

    def select(self, setting: Setting | str) -> tuple[np.ndarray, np.ndarray]:
        """(Alice, Bob) outcomes at the matched pair ``(setting, setting)``."""
        target = 0.0 if Setting(setting) is Setting.X else math.pi / 2
        mask = (np.abs(self.angle_a - target) <= ANGLE_TOL) & (np.abs(self.angle_b - target) <= ANGLE_TOL)
        return self.outcome_a[mask], self.outcome_b[mask]

    def select_counts(self, setting: Setting | str) -> np.ndarray | None:
        if self.counts is None:
            return None
        target = 0.0 if Setting(setting) is Setting.X else math.pi / 2
        mask = (np.abs(self.angle_a - target) <= ANGLE_TOL) & (np.abs(self.angle_b - target) <= ANGLE_TOL)
        return self.counts[mask]

    def to_sample_records(self) -> list[SampleRecord]:
        out = []
        for aa, ab, oa, ob in zip(self.angle_a, self.angle_b, self.outcome_a, self.outcome_b):
            sa, sb = setting_of_angle(aa), setting_of_angle(ab)
            if sa is not None and sb is not None:
                out.append(SampleRecord(sa, sb, oa, ob))
        return out

    @classmethod
    def from_sample_records(cls, records: Iterable[SampleRecord]) -> "RecordTable":
        records = list(records)
        angle = {Setting.X: 0.0, Setting.P: math.pi / 2}
        return cls(
            np.array([angle[r.setting_a] for r in records], dtype=float),
            np.array([angle[r.setting_b] for r in records], dtype=float),
            np.array([r.outcome_a for r in records], dtype=float),
            np.array([r.outcome_b for r in records], dtype=float),
        )

    @property
    def units(self) -> str:
        return self.sidecar.get("units", "quadrature")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_one(path: Path):
    angle_a, angle_b, out_a, out_b, counts = [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file", line=1) from None
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}", line=1)
        col = {name: header.index(name) for name in header}
        has_counts = all(c in col for c in COUNT_COLUMNS)
        idx = [col[c] for c in REQUIRED_COLUMNS]
        cidx = [col[c] for c in COUNT_COLUMNS] if has_counts else []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                aa = parse_setting(row[idx[0]])
                ab = parse_setting(row[idx[1]])
                oa = float(row[idx[2]])
                ob = float(row[idx[3]])
            except ValueError as exc:
                raise SchemaError(f"{path}: {exc}", line=lineno) from None
            if not (math.isfinite(oa) and math.isfinite(ob)):
                raise SchemaError(f"{path}: non-finite outcome", line=lineno)
            angle_a.append(aa)
            angle_b.append(ab)
            out_a.append(oa)
            out_b.append(ob)
            if has_counts:
                try:
                    c = [int(row[i]) for i in cidx]
                except ValueError:
                    raise SchemaError(f"{path}: counts must be integers", line=lineno) from None
                if min(c) < 0:
                    raise SchemaError(f"{path}: counts must be nonnegative", line=lineno)
                counts.append(c)
    arrays = [np.asarray(x, dtype=float) for x in (angle_a, angle_b, out_a, out_b)]
    count_arr = np.asarray(counts, dtype=np.int64).reshape(-1, 4) if has_counts else None
    return arrays, count_arr


def read_sidecar(path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        return {}
    try:
        data = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{side}: invalid JSON ({exc.msg})", line=exc.lineno) from None
    units = data.get("units", "quadrature")
    if units not in UNITS:
        raise SchemaError(f"{side}: units must be one of {UNITS}, got {units!r}")
    return data


def read_records(paths: Sequence) -> RecordTable:
    """Read and concatenate record files; all inputs must share one unit system."""
    parts, counts, sources, sidecars = [], [], [], []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise SchemaError(f"{p}: no such file")
        arrays, cnt = _read_one(p)
        parts.append(arrays)
        counts.append(cnt)
        sidecars.append(read_sidecar(p))
        sources.append({"path": str(p), "sha256": file_sha256(p), "rows": int(arrays[0].size)})
    if not parts:
        raise SchemaError("no input files given")
    units = {s.get("units", "quadrature") for s in sidecars}
    if len(units) > 1:
        raise SchemaError(f"inputs mix unit systems {sorted(units)}")
    merged = [np.concatenate([p[k] for p in parts]) for k in range(4)]
    all_counts = np.concatenate(counts) if all(c is not None for c in counts) else None
    sidecar = dict(sidecars[0])
    return RecordTable(*merged, counts=all_counts, sources=sources, sidecar=sidecar)


def write_records(path, table: RecordTable, sidecar: dict | None = None) -> Path:
    """Write a record CSV and, if given, its sidecar. Returns the sidecar path."""
    path = Path(path)
    header = list(REQUIRED_COLUMNS) + (list(COUNT_COLUMNS) if table.counts is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        labels_a = [format_setting(a) for a in table.angle_a.tolist()]
        labels_b = [format_setting(a) for a in table.angle_b.tolist()]
        rows = zip(labels_a, labels_b, map(repr, table.outcome_a.tolist()), map(repr, table.outcome_b.tolist()))
        if table.counts is None:
            w.writerows(rows)
        else:
            w.writerows(r + tuple(c) for r, c in zip(rows, table.counts.tolist()))
    side = sidecar_path(path)
    if sidecar is not None:
        write_json(sidecar, side)
    return side


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    # Python's float repr is the shortest string that round-trips exactly
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path=None) -> str:
    text = dumps(obj)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text


@dataclass(frozen=True)
class ReportedValue:
    kind: str  # "epsilon" or "D"
    value: float
    label: str
    source: str


def reported_values() -> list[ReportedValue]:
    """Published epsilon and D values shipped as annotated example inputs."""
    text = (resources.files("mesoepr") / "data" / "reported_values.csv").read_text()
    rows = csv.DictReader(text.splitlines())
    return [ReportedValue(r["kind"], float(r["value"]), r["label"], r["source"]) for r in rows]
