"""Design query types shared by every layer: the user spec and the output load."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

GRID_POINTS = 21


class SpecError(ValueError):
    """A design spec or suite file failed validation; ``path`` names the field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class LoadModel:
    r_load: float = 1787.0  # ohm
    c_load: float = 62.0  # fF

    def __post_init__(self):
        if not self.r_load > 0:
            raise SpecError("r_load must be positive", "load.r_load")
        if not self.c_load >= 0:
            raise SpecError("c_load must be non-negative", "load.c_load")

    def admittance(self, omega):
        return 1.0 / self.r_load + 1j * omega * self.c_load * 1e-15


@dataclass(frozen=True)
class DesignSpec:
    """One benchmark row: band, current budget and the three performance targets.

    Thresholds may be infinite to express a vacuous constraint.
    """

    fc: float  # GHz
    fbw: float  # percent
    power: float  # mA
    gain: float  # dB
    nf_max: float  # dB
    ip1db_min: float  # dBm
    stages: int = 3
    load: LoadModel = field(default_factory=LoadModel)
    name: str = ""

    def __post_init__(self):
        if not self.fc > 0:
            raise SpecError("fc must be positive", "fc")
        if not 0 < self.fbw < 100:
            raise SpecError("fbw must lie in (0, 100)", "fbw")
        if not self.power > 0:
            raise SpecError("power must be positive", "power")
        if self.stages < 1:
            raise SpecError("stages must be >= 1", "stages")
        for name in ("gain", "nf_max", "ip1db_min"):
            if math.isnan(getattr(self, name)):
                raise SpecError("threshold is NaN", name)

    @property
    def f_low(self) -> float:
        return self.fc * (1.0 - self.fbw / 200.0)

    @property
    def f_high(self) -> float:
        return self.fc * (1.0 + self.fbw / 200.0)

    @property
    def bandwidth_ghz(self) -> float:
        return self.f_high - self.f_low

    def freq_grid(self) -> np.ndarray:
        """21 log-spaced points over [0.8 f_L, 1.2 f_H] with f_c at the middle index."""
        half = GRID_POINTS // 2
        lo = np.geomspace(0.8 * self.f_low, self.fc, half + 1)
        hi = np.geomspace(self.fc, 1.2 * self.f_high, half + 1)
        return np.concatenate([lo, hi[1:]])

    def band_mask(self, grid=None) -> np.ndarray:
        grid = self.freq_grid() if grid is None else np.asarray(grid)
        tol = 1e-9 * self.fc
        return (grid >= self.f_low - tol) & (grid <= self.f_high + tol)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict, path: str = "") -> "DesignSpec":
        prefix = f"{path}." if path else ""
        if not isinstance(data, dict):
            raise SpecError("expected an object", path or "spec")
        required = ("fc", "fbw", "power", "gain", "nf_max", "ip1db_min")
        for key in required:
            if key not in data:
                raise SpecError("missing field", prefix + key)
            if not isinstance(data[key], (int, float)) or isinstance(data[key], bool):
                raise SpecError("expected a number", prefix + key)
        load = data.get("load") or {}
        try:
            load_model = LoadModel(**{k: float(v) for k, v in load.items()})
        except TypeError as exc:
            raise SpecError(str(exc), prefix + "load") from exc
        except SpecError as exc:
            raise SpecError(str(exc), prefix + exc.path) from exc
        try:
            return cls(
                fc=float(data["fc"]),
                fbw=float(data["fbw"]),
                power=float(data["power"]),
                gain=float(data["gain"]),
                nf_max=float(data["nf_max"]),
                ip1db_min=float(data["ip1db_min"]),
                stages=int(data.get("stages", 3)),
                load=load_model,
                name=str(data.get("name", "")),
            )
        except SpecError as exc:
            raise SpecError(str(exc).split(": ", 1)[-1], prefix + exc.path) from exc

    def replace(self, **changes) -> "DesignSpec":
        data = {**self.__dict__, **changes}
        return DesignSpec(**data)
