"""Knowledge Base (complete designs) and Experience Base (per-stage
indicators) kept as append-only JSON-lines files with top-k retrieval."""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluator import CandidateDesign, SimReport
from .spec import DesignSpec

SCHEMA_VERSION = 1
KB_FILE = "kb.jsonl"
EB_FILE = "eb.jsonl"

# similarity dimensions: (name, weight, range over the benchmark rows)
SIM_DIMS = (
    ("log_fc", 2.0, math.log(50.0) - math.log(10.0)),
    ("fbw", 2.0, 80.0 - 10.0),
    ("power", 1.0, 30.0 - 15.0),
    ("gain", 1.0, 25.0 - 20.0),
    ("nf_max", 1.0, 5.0 - 2.5),
    ("ip1db_min", 1.0, -15.0 - -25.0),
)

TEMPLATES = {
    "success": ("Met every target: NF {system_nf:.2f} dB (first stage {first_stage_nf:.2f} dB), "
                "gains {gains} dB, IP1dB per stage {ips} dBm."),
    "partial": ("Closest attempt missed {violated}: NF {system_nf:.2f} dB, gains {gains} dB, "
                "IP1dB per stage {ips} dBm."),
    "infeasible": "Declared infeasible ({violated}); first-stage NF {first_stage_nf:.2f} dB, gains {gains} dB.",
}


class NoExperience(LookupError):
    pass


class StorageError(OSError):
    def __init__(self, message, path):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def _feature(spec: DesignSpec, name: str) -> float:
    return math.log(spec.fc) if name == "log_fc" else float(getattr(spec, name))


def similarity(a: DesignSpec, b: DesignSpec) -> float:
    """1 - weighted L1 distance with each dimension scaled by its benchmark range.

    Infinite thresholds count as maximally distant from finite ones and
    equal to each other.
    """
    total = sum(w for _, w, _ in SIM_DIMS)
    dist = 0.0
    for name, w, span in SIM_DIMS:
        x, y = _feature(a, name), _feature(b, name)
        if x == y:
            continue
        d = abs(x - y) / span if math.isfinite(x) and math.isfinite(y) else 1.0
        dist += w * min(d, 1.0)
    return float(min(1.0, max(0.0, 1.0 - dist / total)))


def _digest(obj) -> str:
    return hashlib.sha1(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class KBRecord:
    spec: DesignSpec
    candidate: CandidateDesign
    report: SimReport
    created_at: float = 0.0
    run_id: str = ""
    candidate_hash: str = ""
    id: int | None = None

    def __post_init__(self):
        if not self.candidate_hash:
            self.candidate_hash = self.candidate.digest()
        if self.candidate_hash != self.candidate.digest():
            raise ValueError("candidate_hash does not match the candidate")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "id": self.id, "spec": self.spec.to_dict(),
                "candidate": self.candidate.to_dict(), "report": self.report.to_dict(),
                "created_at": self.created_at, "run_id": self.run_id, "candidate_hash": self.candidate_hash}

    @classmethod
    def from_dict(cls, data: dict) -> "KBRecord":
        return cls(DesignSpec.from_dict(data["spec"]), CandidateDesign.from_dict(data["candidate"]),
                   SimReport.from_dict(data["report"]), data.get("created_at", 0.0), data.get("run_id", ""),
                   data.get("candidate_hash", ""), data.get("id"))


@dataclass
class EBRecord:
    spec: DesignSpec
    system_nf: float
    first_stage_nf: float
    per_stage_ip1db: list
    per_stage_gain: list
    template_id: str
    notes: str = ""
    power_split: list = field(default_factory=list)
    headroom: dict = field(default_factory=dict)  # attained margin per constraint
    system_ip1db: float = -math.inf
    run_id: str = ""
    id: int | None = None

    def __post_init__(self):
        if len(self.per_stage_ip1db) != self.spec.stages or len(self.per_stage_gain) != self.spec.stages:
            raise ValueError("per-stage lists must have one entry per stage")
        if self.template_id not in TEMPLATES:
            raise ValueError(f"unknown template {self.template_id!r}")

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "id": self.id, "spec": self.spec.to_dict(),
                "system_nf": self.system_nf, "first_stage_nf": self.first_stage_nf,
                "per_stage_ip1db": list(self.per_stage_ip1db), "per_stage_gain": list(self.per_stage_gain),
                "template_id": self.template_id, "notes": self.notes, "power_split": list(self.power_split),
                "headroom": dict(self.headroom), "system_ip1db": self.system_ip1db,
                "run_id": self.run_id}

    @classmethod
    def from_dict(cls, data: dict) -> "EBRecord":
        data = {k: v for k, v in data.items() if k != "schema_version"}
        data["spec"] = DesignSpec.from_dict(data["spec"])
        return cls(**data)

    @classmethod
    def from_report(cls, spec: DesignSpec, report: SimReport, template_id: str, power_split=(),
                    run_id: str = "") -> "EBRecord":
        violated = ", ".join(f"{k} by {v:.2f}" for k, v in report.violations.items() if v > 0) or "nothing"
        gains = [round(g, 2) for g in report.per_stage_gain_db]
        ips = [round(p, 2) for p in report.per_stage_ip1db_dbm]
        first_nf = report.per_stage_nf_db[0] if report.per_stage_nf_db else math.inf
        notes = TEMPLATES[template_id].format(system_nf=report.nf_db, first_stage_nf=first_nf, gains=gains,
                                              ips=ips, violated=violated)
        band = report.in_band
        g = np.asarray(report.gain_db)[band]
        headroom = {"nf": spec.nf_max - report.nf_db, "ip1db": report.ip1db_dbm - spec.ip1db_min,
                    "gain": 3.0 - abs(spec.gain - float(g.min())) if g.size else -math.inf,
                    "power": spec.power - report.power_ma}
        return cls(spec, report.nf_db, first_nf, list(report.per_stage_ip1db_dbm),
                   list(report.per_stage_gain_db), template_id, notes, list(power_split),
                   {k: float(v) for k, v in headroom.items()}, float(report.ip1db_dbm), run_id)


class _Log:
    """One append-only JSON-lines file plus its in-memory index."""

    def __init__(self, path: Path, ident):
        self.path = path
        self.ident = ident  # record dict -> idempotence key
        self.lines: list[str] = []
        self.by_key: dict = {}
        if path.exists():
            try:
                with open(path) as fh:
                    for line in fh:
                        if line.strip():
                            self._index(line.rstrip("\n"))
            except (OSError, json.JSONDecodeError) as exc:
                raise StorageError(str(exc), path) from exc

    def _index(self, line: str) -> None:
        data = json.loads(line)
        self.by_key.setdefault(self.ident(data), data["id"])
        self.lines.append(line)

    def put(self, data: dict) -> int:
        key = self.ident(data)
        if key in self.by_key:
            return self.by_key[key]
        data = dict(data)
        data["id"] = len(self.lines)
        line = json.dumps(data, sort_keys=True)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(str(exc), self.path) from exc
        self._index(line)
        return data["id"]

    def raw(self, rid: int) -> str:
        if not 0 <= rid < len(self.lines):
            raise KeyError(rid)
        return self.lines[rid]


class MemoryStore:
    """KB and EB under one directory; a single writer, any number of readers.

    Readers opened earlier keep the snapshot they loaded.
    """

    def __init__(self, directory):
        self.dir = Path(directory)
        self._lock = threading.Lock()
        self._kb = _Log(self.dir / KB_FILE, lambda d: (d["run_id"], d["candidate_hash"]))
        self._eb = _Log(self.dir / EB_FILE, lambda d: (d["run_id"], _digest(
            {k: v for k, v in d.items() if k not in ("id", "run_id")})))

    # writes
    def kb_put(self, record: KBRecord) -> int:
        with self._lock:
            record.id = self._kb.put(record.to_dict())
            return record.id

    def eb_put(self, record: EBRecord) -> int:
        with self._lock:
            record.id = self._eb.put(record.to_dict())
            return record.id

    # reads
    def kb_raw(self, rid: int) -> str:
        return self._kb.raw(rid)

    def eb_raw(self, rid: int) -> str:
        return self._eb.raw(rid)

    def kb_get(self, rid: int) -> KBRecord:
        return KBRecord.from_dict(json.loads(self._kb.raw(rid)))

    def eb_get(self, rid: int) -> EBRecord:
        return EBRecord.from_dict(json.loads(self._eb.raw(rid)))

    def kb_records(self) -> list:
        return [self.kb_get(i) for i in range(len(self._kb.lines))]

    def eb_records(self) -> list:
        return [self.eb_get(i) for i in range(len(self._eb.lines))]

    def __len__(self):
        return len(self._kb.lines)

    def kb_query(self, spec: DesignSpec, k: int) -> list:
        return kb_query(self.kb_records(), spec, k)

    def eb_hints(self, spec: DesignSpec, k: int) -> dict:
        return eb_hints(self.eb_records(), spec, k)


def kb_query(records, spec: DesignSpec, k: int) -> list:
    """Top-k records by similarity; ties go to the most recent (highest id)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(records, key=lambda r: (-similarity(spec, r.spec), -(r.id or 0)))
    return ranked[:k]


def eb_hints(records, spec: DesignSpec, k: int) -> dict:
    """Similarity-weighted per-stage distributions of the top-k EB records.

    headroom_estimates holds, per constraint, the smallest margin any
    retrieved record attained against ``spec``'s thresholds.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not records:
        raise NoExperience("the experience base is empty")
    top = sorted(records, key=lambda r: (-similarity(spec, r.spec), -(r.id or 0)))[:k]
    w = np.array([similarity(spec, r.spec) for r in top])
    if w.sum() <= 0:
        w = np.ones(len(top))
    w = w / w.sum()

    def mean(lists):
        arr = np.asarray(lists, dtype=float)
        return [float(v) for v in w @ arr]

    splits = [r.power_split for r in top if r.power_split]
    split_w = np.array([wi for wi, r in zip(w, top) if r.power_split])
    split_hint = None
    if splits and len({len(s) for s in splits}) == 1:
        split_hint = [float(v) for v in (split_w / split_w.sum()) @ np.asarray(splits, dtype=float)]
    margins = {
        "nf": min(spec.nf_max - r.system_nf for r in top),
        "ip1db": min(r.system_ip1db - spec.ip1db_min for r in top),
        "gain": min(sum(r.per_stage_gain) - spec.gain for r in top),
    }
    return {
        "power_split_hint": split_hint,
        "per_stage_gain_hint": mean([r.per_stage_gain for r in top]),
        "per_stage_ip1db_hint": mean([r.per_stage_ip1db for r in top]),
        "headroom_estimates": {k2: float(v) for k2, v in margins.items()},
        "weights": [float(v) for v in w],
    }
