"""Run configuration stored as a flat ``key = value`` file.

The file has a single ``[run]`` section.  Every key carries a comment with its
unit, and floats are written with ``repr`` so that reading a written file
gives back the identical configuration.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .conventions import Tolerances

SECTION = "run"

_COMMENTS = {
    "degree": "line bundle degree d (integer)",
    "seed": "base RNG seed (64-bit unsigned integer)",
    "n_starts": "oracle multistart count (integer)",
    "workers": "scan worker processes (integer, 1 = sequential)",
    "out": "output directory (path)",
    "svg": "optional SVG path (path, empty = none)",
    "rtol": "integrator relative tolerance (dimensionless)",
    "bs_tol": "holonomy phase defect bound (radians)",
    "arg_tol": "circular deviation bound of arg alpha (radians)",
    "area_tol": "distance of an area to the nearest integer (units of the Kahler area, total d)",
    "hausdorff_tol": "loop coincidence distance (chordal, unit sphere)",
    "epsilon_zero": "exclusion radius around zeros of s (chordal, unit sphere)",
}


@dataclass(frozen=True)
class RunConfig:
    degree: int = 2
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    n_starts: int = 20
    workers: int = 1
    out: str = "out"
    svg: str = ""

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.n_starts < 1 or self.workers < 1:
            raise ValueError("n_starts and workers must be positive")

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "tolerances"}
        out["tolerances"] = self.tolerances.to_dict()
        return out

    def to_text(self) -> str:
        flat = {k: v for k, v in self.to_dict().items() if k != "tolerances"}
        flat.update(self.tolerances.to_dict())
        lines = [f"[{SECTION}]"]
        for key, value in flat.items():
            text = repr(float(value)) if isinstance(value, float) else str(value)
            lines.append(f"# {_COMMENTS[key]}")
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        parser.read_string(text)
        if not parser.has_section(SECTION):
            raise ValueError(f"config has no [{SECTION}] section")
        sec = parser[SECTION]
        unknown = set(sec) - set(_COMMENTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        tol_kw = {f.name: sec.getfloat(f.name) for f in fields(Tolerances) if f.name in sec}
        return cls(
            degree=sec.getint("degree", base.degree),
            tolerances=Tolerances(**tol_kw),
            seed=sec.getint("seed", base.seed),
            n_starts=sec.getint("n_starts", base.n_starts),
            workers=sec.getint("workers", base.workers),
            out=sec.get("out", base.out),
            svg=sec.get("svg", base.svg),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())
