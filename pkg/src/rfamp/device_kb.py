"""Synthetic active-device lookup tables and the active sizing/biasing step.

The tables stand in for characterized PDK sweeps.  Every record follows a
square-law model so the values are smooth and monotone in width and bias:

    Id = kappa * W * (Vgs - Vth)^2        [mA, W in um, V in volts]
    gm = 2 * kappa * W * (Vgs - Vth)      [mS]
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

VTH_MV = 280.0
CIN_FF_PER_UM = 1.1
COUT_FF_PER_UM = 0.55
RIN_OHM_UM = 2.0e5  # gate-side parallel resistance times width
VDD = 1.0  # volts, used for dc power
REF_FREQS_GHZ = tuple(float(f) for f in np.geomspace(1.0, 100.0, 21))
DEFAULT_SEED = 7


class DeviceKind(str, Enum):
    CASCODE = "CascodeSingleEnded"
    DIFF_CS = "DiffCommonSource"


KAPPA = {DeviceKind.CASCODE: 0.9, DeviceKind.DIFF_CS: 1.1}


class InfeasibleBudget(ValueError):
    pass


@dataclass(frozen=True)
class DeviceClass:
    kind: DeviceKind
    width_grid: tuple
    vbias_grid: tuple

    def __post_init__(self):
        for name in ("width_grid", "vbias_grid"):
            grid = getattr(self, name)
            if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing and non-empty")


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step)) + 1
    return tuple(float(lo + i * step) for i in range(n))


VBIAS_GRID = _grid(300, 500, 25)
CASCODE = DeviceClass(DeviceKind.CASCODE, _grid(45, 180, 9), VBIAS_GRID)
DIFF_CS = DeviceClass(DeviceKind.DIFF_CS, _grid(45, 117, 9), VBIAS_GRID)
CLASSES = {DeviceKind.CASCODE: CASCODE, DeviceKind.DIFF_CS: DIFF_CS}


@dataclass(frozen=True)
class DeviceRecord:
    """One characterized (width, bias) point.

    ``zin``/``zout`` hold complex impedances on ``REF_FREQS_GHZ``; both are
    exact R||C networks, so the equivalent elements are recoverable.
    """

    kind: DeviceKind
    width: float  # um
    vbias: float  # mV
    id: float  # mA
    gm: float  # mS
    zin: tuple  # complex ohm per REF_FREQS_GHZ
    zout: tuple
    rs_out: float  # ohm
    cs_out: float  # fF
    cin: float  # fF
    nf_min: float  # dB
    ip1db_stage: float  # dBm

    @property
    def rin(self) -> float:
        """Parallel input resistance behind ``zin``."""
        return 1.0 / (1.0 / self.zin[0]).real

    @property
    def key(self) -> tuple:
        return (self.kind.value, self.width, self.vbias)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["class"] = self.kind.value
        del data["kind"]
        data["zin"] = [[z.real, z.imag] for z in self.zin]
        data["zout"] = [[z.real, z.imag] for z in self.zout]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceRecord":
        data = dict(data)
        kind = DeviceKind(data.pop("class"))
        data["zin"] = tuple(complex(re, im) for re, im in data["zin"])
        data["zout"] = tuple(complex(re, im) for re, im in data["zout"])
        return cls(kind=kind, **data)


def square_law(kind: DeviceKind, width: float, vbias: float) -> tuple[float, float]:
    """(Id [mA], gm [mS]) of the synthetic device; zero below threshold."""
    vov = max(vbias - VTH_MV, 0.0) / 1000.0
    kappa = KAPPA[kind]
    return kappa * width * vov * vov, 2.0 * kappa * width * vov


def _rc_impedance(r, c_ff):
    w = 2 * math.pi * np.asarray(REF_FREQS_GHZ) * 1e9
    return tuple(complex(z) for z in r / (1 + 1j * w * r * c_ff * 1e-15))


def make_record(kind: DeviceKind, width: float, vbias: float, scatter=(0.0, 0.0)) -> DeviceRecord:
    i_d, gm = square_law(kind, width, vbias)
    cin = CIN_FF_PER_UM * width
    cs_out = COUT_FF_PER_UM * width
    rs_out = 22000.0 / i_d
    rin = RIN_OHM_UM / width
    return DeviceRecord(
        kind=kind,
        width=float(width),
        vbias=float(vbias),
        id=i_d,
        gm=gm,
        zin=_rc_impedance(rin, cin),
        zout=_rc_impedance(rs_out, cs_out),
        rs_out=rs_out,
        cs_out=cs_out,
        cin=cin,
        nf_min=0.9 + 40.0 / gm + scatter[0],
        ip1db_stage=10.0 * math.log10(2.2 * i_d) - 2.0 + scatter[1],
    )


def generate_table(seed: int, cls: DeviceClass) -> list[DeviceRecord]:
    """Characterize every (width, vbias) point of ``cls``.

    The seed drives a +-0.05 dB process scatter on ``nf_min`` and
    ``ip1db_stage`` only; current and transconductance are exact model values.
    """
    kind_index = list(DeviceKind).index(cls.kind)
    rng = np.random.default_rng([int(seed), kind_index])
    n = len(cls.width_grid) * len(cls.vbias_grid)
    scatter = rng.uniform(-0.05, 0.05, size=(n, 2))
    records = []
    for i, (w, v) in enumerate((w, v) for w in cls.width_grid for v in cls.vbias_grid):
        records.append(make_record(cls.kind, w, v, tuple(scatter[i])))
    return records


@lru_cache(maxsize=16)
def _cached_table(seed: int, kind: DeviceKind) -> tuple:
    return tuple(generate_table(seed, CLASSES[kind]))


def default_tables(seed: int = DEFAULT_SEED) -> dict:
    return {kind: list(_cached_table(seed, kind)) for kind in DeviceKind}


def dump_tables(tables: dict, path) -> None:
    records = [r.to_dict() for kind in DeviceKind for r in tables.get(kind, [])]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=1)


def load_tables(path) -> dict:
    with open(path) as fh:
        records = [DeviceRecord.from_dict(d) for d in json.load(fh)]
    tables = {kind: [] for kind in DeviceKind}
    for r in records:
        tables[r.kind].append(r)
    return tables


def lookup_by_current(table: Sequence[DeviceRecord], i_max: float) -> list[DeviceRecord]:
    if not i_max > 0:
        raise ValueError("i_max must be positive")
    hits = [r for r in table if r.id <= i_max]
    return sorted(hits, key=lambda r: (r.width, r.vbias))


def find_record(table: Sequence[DeviceRecord], width: float, vbias: float) -> DeviceRecord | None:
    for r in table:
        if r.width == width and r.vbias == vbias:
            return r
    return None


def realizations(table: Sequence[DeviceRecord], i_max: float) -> list[DeviceRecord]:
    """Per width, the feasible record drawing the most current (ties: lower bias)."""
    best = {}
    for r in lookup_by_current(table, i_max):
        cur = best.get(r.width)
        if cur is None or r.id > cur.id:
            best[r.width] = r
    return [best[w] for w in sorted(best)]


@dataclass(frozen=True)
class ActiveConfig:
    records: tuple
    power_split: tuple
    total_budget: float
    choice: tuple = field(default=())  # ("large"|"small", "large"|"small") per group

    def __post_init__(self):
        if abs(sum(self.power_split) - 1.0) > 1e-9:
            raise ValueError("power_split must sum to 1")
        if any(not 0 < p < 1 for p in self.power_split) and len(self.power_split) > 1:
            raise ValueError("power_split entries must lie in (0, 1)")
        if sum(r.id for r in self.records) > self.total_budget * (1 + 1e-9):
            raise ValueError("configuration exceeds the current budget")

    @property
    def total_current(self) -> float:
        return sum(r.id for r in self.records)


def allocate(
    power_ratio_list: Sequence[float],
    budget: float,
    stage_classes: Sequence[DeviceClass],
    tables: dict | None = None,
    critical: Sequence[int] = (0,),
) -> list[ActiveConfig]:
    """Turn a current split into at most four extreme device configurations.

    Stages are grouped into critical (default: stage 0) and non-critical;
    each group keeps only its largest- and smallest-width realization.
    """
    ratios = [float(x) for x in power_ratio_list]
    if len(ratios) != len(stage_classes):
        raise ValueError("one ratio per stage is required")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("power ratios must sum to 1")
    if not budget > 0:
        raise ValueError("budget must be positive")
    tables = default_tables() if tables is None else tables

    extremes = []
    for i, (ratio, cls) in enumerate(zip(ratios, stage_classes)):
        options = realizations(tables[cls.kind], ratio * budget) if ratio > 0 else []
        if not options:
            raise InfeasibleBudget(
                f"stage {i + 1}: no {cls.kind.value} device fits {ratio * budget:.4g} mA"
            )
        extremes.append({"large": options[-1], "small": options[0]})

    groups = [list(critical), [i for i in range(len(ratios)) if i not in critical]]
    groups = [g for g in groups if g]
    choices = [("large", "small")] * len(groups)

    configs, seen = [], set()
    for combo in _product(choices):
        pick = {}
        for group, which in zip(groups, combo):
            for i in group:
                pick[i] = extremes[i][which]
        records = tuple(pick[i] for i in range(len(ratios)))
        sig = tuple(r.key for r in records)
        if sig in seen:
            continue
        seen.add(sig)
        configs.append(ActiveConfig(records, tuple(ratios), float(budget), tuple(combo)))
    return configs


def _product(choices):
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for tail in _product(choices[1:]):
            yield (head,) + tail


def stage_classes(stages: int = 3) -> list[DeviceClass]:
    return [CASCODE] + [DIFF_CS] * (stages - 1)
