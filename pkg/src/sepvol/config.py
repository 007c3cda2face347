"""Run configuration: validation, key=value / JSON round trip, digest, presets."""
from __future__ import annotations

import configparser
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from . import param
from .lds import KINDS, SCRAMBLES
from .metrics import ALL_METRICS, DEFAULT_FLOOR

METRIC_TAGS = tuple(m.value for m in ALL_METRICS)
HYPERAREA_MODES = ("independent", "projection")
WORKERS_ENV = "SEPVOL_WORKERS"

# fields that may change between a run and its resumption
_NOT_DIGESTED = ("points", "shards", "workers", "out_dir", "label")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    N: int = 6
    dims: tuple = (2, 3)
    strata: tuple = (0, 1)
    metrics: tuple = METRIC_TAGS
    points: int = 1_000_000
    block: int = 1_000_000
    kind: str = "faure"
    base: int | None = None
    seed: int = 0
    scramble: str = "faure-tezuka"
    angle_map: str = "haar"
    hyperarea_mode: str = "independent"
    eps: float = 0.0
    floor: float = DEFAULT_FLOOR
    shards: int = 1
    workers: int = 0
    out_dir: str = ""
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "strata", tuple(int(s) for s in self.strata))
        object.__setattr__(self, "metrics", tuple(str(m).lower() for m in self.metrics))
        self.validate()

    def validate(self) -> None:
        if len(self.dims) != 2 or self.dims[0] * self.dims[1] != self.N:
            raise ConfigError(f"dims {self.dims} do not factor N={self.N}")
        if self.N not in (4, 6):
            raise ConfigError("separability tests support N=4 (2x2) and N=6 (2x3)")
        if not self.strata or any(not 0 <= s <= self.N - 1 for s in self.strata):
            raise ConfigError(f"invalid strata {self.strata} for N={self.N}")
        if len(set(self.strata)) != len(self.strata):
            raise ConfigError("duplicate strata")
        if not self.metrics:
            raise ConfigError("metrics must be nonempty")
        bad = [m for m in self.metrics if m not in METRIC_TAGS]
        if bad:
            raise ConfigError(f"unknown metrics {bad}; expected tags from {METRIC_TAGS}")
        if len(set(self.metrics)) != len(self.metrics):
            raise ConfigError("duplicate metrics")
        if self.points <= 0:
            raise ConfigError("points must be > 0")
        if self.block <= 0:
            raise ConfigError("block must be > 0")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown sequence kind {self.kind!r}")
        if self.scramble not in SCRAMBLES:
            raise ConfigError(f"unknown scramble {self.scramble!r}")
        if self.angle_map not in param.ANGLE_MAPS:
            raise ConfigError(f"unknown angle map {self.angle_map!r}")
        if self.hyperarea_mode not in HYPERAREA_MODES:
            raise ConfigError(f"unknown hyperarea mode {self.hyperarea_mode!r}")
        if self.hyperarea_mode == "projection" and 0 not in self.strata:
            raise ConfigError("projection mode needs stratum 0 as the source sequence")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if not self.floor > 0:
            raise ConfigError("floor must be > 0")
        if self.shards < 1:
            raise ConfigError("shards must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["strata"] = list(self.strata)
        d["metrics"] = list(self.metrics)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_ini(self) -> str:
        d = self.to_dict()
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keep "N" distinct from the rank defect "n"
        cp["state"] = {"N": d["N"], "dims": _fmt(d["dims"]), "strata": _fmt(d["strata"])}
        cp["integrand"] = {"metrics": _fmt(d["metrics"]), "angle_map": d["angle_map"],
                           "eps": repr(d["eps"]), "floor": repr(d["floor"])}
        cp["sequence"] = {"kind": d["kind"], "base": "" if d["base"] is None else d["base"],
                          "seed": d["seed"], "scramble": d["scramble"],
                          "hyperarea_mode": d["hyperarea_mode"]}
        cp["run"] = {"points": d["points"], "block": d["block"], "shards": d["shards"],
                     "workers": d["workers"], "out_dir": d["out_dir"], "label": d["label"]}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"bad config file: {exc}") from None
        d = {}
        for sec in cp.sections():
            for k, v in cp[sec].items():
                if k in d:
                    raise ConfigError(f"key {k!r} given twice")
                d[k] = v
        return cls.from_dict(_coerce(d))

    @property
    def digest(self) -> str:
        """Hex digest of the fields that determine the numbers produced."""
        d = {k: v for k, v in self.to_dict().items() if k not in _NOT_DIGESTED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.blake2b(blob, digest_size=16).hexdigest()

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def effective_workers(self) -> int:
        if self.workers:
            return self.workers
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
        return 1


def _fmt(seq) -> str:
    return ",".join(str(x) for x in seq)


_INT = {"N", "points", "block", "seed", "shards", "workers"}
_FLOAT = {"eps", "floor"}
_LIST_INT = {"dims", "strata"}


def _coerce(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        try:
            if k in _INT:
                out[k] = int(float(v)) if "e" in v.lower() else int(v)
            elif k in _FLOAT:
                out[k] = float(v)
            elif k in _LIST_INT:
                out[k] = tuple(int(x) for x in v.split(",") if x.strip())
            elif k == "metrics":
                out[k] = tuple(x.strip() for x in v.split(",") if x.strip())
            elif k == "base":
                out[k] = int(v) if v.strip() else None
            else:
                out[k] = v
        except ValueError:
            raise ConfigError(f"bad value for {k!r}: {v!r}") from None
    return out


def load(path: str) -> RunConfig:
    """Read a ``.json`` or key=value config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.endswith(".json") or text.lstrip().startswith("{"):
        try:
            return RunConfig.from_dict(_jsonable(json.loads(text)))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON config: {exc}") from None
    return RunConfig.from_ini(text)


def _jsonable(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


PRESETS = {
    # qubit-qubit, all metrics
    "n4-desk": RunConfig(N=4, dims=(2, 2), strata=(0, 1), points=10_000_000, block=200_000),
    "n4-hs-fit": RunConfig(N=4, dims=(2, 2), strata=(0, 1), metrics=("bures", "hs"),
                           points=10_000_000, block=200_000),
    # qubit-qutrit
    "n6-smoke": RunConfig(N=6, strata=(0, 1), points=1_000_000, block=100_000),
    "n6-volume": RunConfig(N=6, strata=(0,), points=100_000_000, block=1_000_000),
    "n6-hyperarea": RunConfig(N=6, strata=(0, 1), points=100_000_000, block=1_000_000),
    "n6-rank4": RunConfig(N=6, strata=(0, 1, 2), points=100_000_000, block=1_000_000),
}


def preset(name: str) -> RunConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
