"""Run configuration and metric report containers.

A :class:`MetricReport` is the single output format shared by every metric:
scalar values with uncertainties, fit diagnostics, the raw measured series,
a snapshot of the configuration that produced them, the noise-model digest,
and start/end stamps on both the backend's virtual clock and the wall clock.
Reports serialize to JSON and round-trip losslessly; two runs of the same
config and seed on the emulator agree byte-for-byte outside the wall-clock
stamps and tool version (see :meth:`MetricReport.reproducible_dict`).

A :class:`RunConfig` is the schema-checked description of one metric run:
which backend, which noise model, which metric, its parameters, the seed,
and where to write the report.  Unknown keys are rejected so that typos
fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .fit import FitResult

__all__ = [
    "MetricReport",
    "MetricFitError",
    "ReportBuilder",
    "RunConfig",
    "fit_summary",
    "open_report",
]


class MetricFitError(RuntimeError):
    """Raised when a metric's curve fit fails; carries the raw series."""

    def __init__(self, message: str, series: dict[str, Any]):
        super().__init__(message)
        self.series = series


def _plain(obj: Any) -> Any:
    """Recursively convert to JSON-serializable built-in types."""
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_plain(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def fit_summary(result: FitResult) -> dict[str, Any]:
    """Flatten a fit result into the diagnostics block of a report."""
    return {
        "model": result.model,
        "params": dict(result.params),
        "stderr": dict(result.stderr),
        "rss": result.rss,
        "converged": result.converged,
        "n_iterations": result.n_iterations,
        "flags": list(result.flags),
    }


@dataclass
class MetricReport:
    """Self-contained record of one metric evaluation."""

    metric: str
    values: dict[str, float]
    uncertainties: dict[str, float] = field(default_factory=dict)
    fit: dict[str, Any] | None = None
    series: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    model_digest: str | None = None
    seed: int | None = None
    virtual_start_ns: float | None = None
    virtual_end_ns: float | None = None
    wall_start: str = ""
    wall_end: str = ""
    version: str = __version__
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.values = {str(k): _plain(v) for k, v in self.values.items()}
        self.uncertainties = {str(k): _plain(v) for k, v in self.uncertainties.items()}
        self.series = _plain(self.series)
        self.config = _plain(self.config)
        if self.fit is not None:
            self.fit = _plain(self.fit)
        self.flags = tuple(str(f) for f in self.flags)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric,
            "values": self.values,
            "uncertainties": self.uncertainties,
            "fit": self.fit,
            "series": self.series,
            "config": self.config,
            "model_digest": self.model_digest,
            "seed": self.seed,
            "virtual_start_ns": self.virtual_start_ns,
            "virtual_end_ns": self.virtual_end_ns,
            "wall_start": self.wall_start,
            "wall_end": self.wall_end,
            "version": self.version,
            "flags": list(self.flags),
        }

    def reproducible_dict(self) -> dict[str, Any]:
        """Report content minus wall-clock stamps and tool version."""
        out = self.to_dict()
        for key in ("wall_start", "wall_end", "version"):
            out.pop(key)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricReport":
        return cls(
            metric=data["metric"],
            values=dict(data["values"]),
            uncertainties=dict(data.get("uncertainties", {})),
            fit=data.get("fit"),
            series=dict(data.get("series", {})),
            config=dict(data.get("config", {})),
            model_digest=data.get("model_digest"),
            seed=data.get("seed"),
            virtual_start_ns=data.get("virtual_start_ns"),
            virtual_end_ns=data.get("virtual_end_ns"),
            wall_start=data.get("wall_start", ""),
            wall_end=data.get("wall_end", ""),
            version=data.get("version", __version__),
            flags=tuple(data.get("flags", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "MetricReport":
        return cls.from_json(Path(path).read_text())


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def _virtual_clock(backend: Any) -> float | None:
    clock = getattr(backend, "clock_ns", None)
    return float(clock) if clock is not None else None


def _model_digest(backend: Any) -> str | None:
    model = getattr(backend, "model", None)
    digest = getattr(model, "digest", None)
    return digest() if callable(digest) else None


@dataclass
class ReportBuilder:
    """Captures timing/provenance at metric start; finished into a report."""

    metric: str
    backend: Any
    config: dict[str, Any]
    seed: int | None
    wall_start: str = field(default_factory=_now_iso)
    virtual_start_ns: float | None = None

    def __post_init__(self) -> None:
        self.virtual_start_ns = _virtual_clock(self.backend)

    def finish(
        self,
        *,
        values: dict[str, float],
        uncertainties: dict[str, float] | None = None,
        fit: dict[str, Any] | None = None,
        series: dict[str, Any] | None = None,
        flags: tuple[str, ...] = (),
    ) -> MetricReport:
        return MetricReport(
            metric=self.metric,
            values=values,
            uncertainties=uncertainties or {},
            fit=fit,
            series=series or {},
            config=self.config,
            model_digest=_model_digest(self.backend),
            seed=self.seed,
            virtual_start_ns=self.virtual_start_ns,
            virtual_end_ns=_virtual_clock(self.backend),
            wall_start=self.wall_start,
            wall_end=_now_iso(),
            flags=flags,
        )


def open_report(metric: str, backend: Any, config: Any, seed: int | None) -> ReportBuilder:
    """Start a report: snapshots the config and both clocks."""
    if dataclasses.is_dataclass(config) and not isinstance(config, type):
        snapshot = _plain(dataclasses.asdict(config))
    else:
        snapshot = _plain(config) if config is not None else {}
    if not isinstance(snapshot, dict):
        snapshot = {"value": snapshot}
    return ReportBuilder(metric=metric, backend=backend, config=snapshot, seed=seed)


_RUN_CONFIG_KEYS = {
    "backend",
    "noise_model",
    "metric",
    "params",
    "seed",
    "shots",
    "out_dir",
}

_KNOWN_BACKENDS = ("reference", "noiseless", "model-file")


@dataclass(frozen=True)
class RunConfig:
    """One metric run: backend choice, model source, metric id and knobs."""

    metric: str
    seed: int
    backend: str = "reference"
    noise_model: str | dict[str, Any] | None = None
    params: dict[str, Any] = field(default_factory=dict)
    shots: int | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.metric, str) or not self.metric:
            raise ValueError("metric id must be a non-empty string")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer (and is mandatory)")
        if self.backend not in _KNOWN_BACKENDS:
            raise ValueError(
                f"unknown backend {self.backend!r}; expected one of {_KNOWN_BACKENDS}"
            )
        if self.backend == "model-file" and not isinstance(self.noise_model, (str, dict)):
            raise ValueError("backend 'model-file' requires a noise_model path or mapping")
        if self.shots is not None and (not isinstance(self.shots, int) or self.shots <= 0):
            raise ValueError("shots must be a positive integer")
        if not isinstance(self.params, dict):
            raise ValueError("params must be a mapping")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        unknown = set(data) - _RUN_CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "metric" not in data:
            raise ValueError("config must name a metric")
        if "seed" not in data:
            raise ValueError("config must set a seed")
        return cls(
            metric=data["metric"],
            seed=data["seed"],
            backend=data.get("backend", "reference"),
            noise_model=data.get("noise_model"),
            params=dict(data.get("params", {})),
            shots=data.get("shots"),
            out_dir=data.get("out_dir"),
        )

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError("config file must contain a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_yaml(Path(path).read_text())

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric,
            "seed": self.seed,
            "backend": self.backend,
            "noise_model": self.noise_model,
            "params": dict(self.params),
            "shots": self.shots,
            "out_dir": self.out_dir,
        }
