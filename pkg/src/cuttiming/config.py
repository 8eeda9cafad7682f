"""Run configuration: defaults, then an INI-style config file, then flags."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .control import ControlParams
from .dataio import SmoothingConfig
from .detect import DetectionConfig
from .timing import TimingParams

SECTIONS = {
    "smoothing": SmoothingConfig,
    "detect": DetectionConfig,
    "control": ControlParams,
    "timing": TimingParams,
}


@dataclass(frozen=True)
class RunConfig:
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    detect: DetectionConfig = field(default_factory=DetectionConfig)
    control: ControlParams = field(default_factory=ControlParams)
    timing: TimingParams = field(default_factory=TimingParams)
    grid_cell: float = 1.0
    jobs: int = 1
    out_dir: str = "out"


RUN_KEYS = {"grid_cell": float, "jobs": int, "out_dir": str}


def _coerce(kind: type, text: str):
    if kind is bool:
        return text.strip().lower() in ("1", "true", "yes", "on")
    return kind(text.strip())


def _section(cls, values: dict):
    types = {f.name: type(f.default) for f in fields(cls)}
    kwargs = {}
    for key, text in values.items():
        if key not in types:
            raise ValueError(f"unknown {cls.__name__} key {key!r}")
        kwargs[key] = _coerce(types[key], text)
    return kwargs


def load_config(path: str | Path | None = None, base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep case, e.g. dT
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    changes = {}
    for name in parser.sections():
        values = dict(parser.items(name))
        if name == "run":
            for key, text in values.items():
                if key not in RUN_KEYS:
                    raise ValueError(f"unknown run key {key!r}")
                changes[key] = _coerce(RUN_KEYS[key], text)
        elif name in SECTIONS:
            changes[name] = replace(getattr(cfg, name), **_section(SECTIONS[name], values))
        else:
            raise ValueError(f"unknown config section [{name}]")
    return replace(cfg, **changes)


def apply_flags(cfg: RunConfig, jobs=None, grid_cell=None, v_disc=None, out_dir=None) -> RunConfig:
    changes = {}
    if jobs is not None:
        changes["jobs"] = int(jobs)
    if grid_cell is not None:
        changes["grid_cell"] = float(grid_cell)
    if out_dir is not None:
        changes["out_dir"] = str(out_dir)
    if v_disc is not None:
        changes["timing"] = replace(cfg.timing, v_disc=float(v_disc))
    return replace(cfg, **changes)


def dump_config(cfg: RunConfig) -> str:
    """Every effective parameter, in the same format ``load_config`` reads."""
    lines = ["[run]"]
    lines += [f"{key} = {getattr(cfg, key)}" for key in RUN_KEYS]
    for name in SECTIONS:
        lines += ["", f"[{name}]"]
        section = getattr(cfg, name)
        lines += [f"{f.name} = {getattr(section, f.name)}" for f in fields(section)]
    return "\n".join(lines) + "\n"
