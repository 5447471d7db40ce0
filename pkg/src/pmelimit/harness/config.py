"""JSON run configuration with a closed catalog of drifts and profiles."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from ..errors import ConfigError
from ..geometry import Grid, VectorFieldSpec

DRIFT_KINDS = ("zero", "constant", "linear", "radial", "rotational", "potential_bump")
PROFILE_KINDS = ("zero", "constant", "bump", "step", "plateau")
REACTION_KINDS = ("none", "source", "linear", "quadratic", "sine")


def _num(x) -> float | str:
    """Canonical JSON number; infinities become strings."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _parse_num(x, where: str) -> float:
    if isinstance(x, bool):
        raise ConfigError(f"{where}: expected a number, got {x!r}")
    if isinstance(x, str) and x in ("inf", "-inf"):
        return float(x)
    if isinstance(x, (int, float)):
        v = float(x)
        if math.isnan(v):
            raise ConfigError(f"{where}: NaN is not allowed")
        return v
    raise ConfigError(f"{where}: expected a number, got {x!r}")


def _vec(x, where: str) -> list[float]:
    if isinstance(x, (int, float, str)) and not isinstance(x, bool):
        return [_parse_num(x, where)]
    if not isinstance(x, list):
        raise ConfigError(f"{where}: expected a number or a list")
    return [_parse_num(v, f"{where}[{i}]") for i, v in enumerate(x)]


@dataclass
class Profile:
    kind: str = "zero"
    amplitude: float = 0.0
    center: list[float] = field(default_factory=lambda: [0.5])
    width: float = 0.1
    ramp: float = 0.05

    def evaluate(self, grid: Grid) -> np.ndarray:
        x = grid.cell_centers()
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (grid.dim,))
        if self.kind == "zero":
            return np.zeros(grid.shape)
        if self.kind == "constant":
            return np.full(grid.shape, self.amplitude)
        r = np.sqrt(np.sum((x - c) ** 2, axis=-1))
        if self.kind == "bump":
            return self.amplitude * np.exp(-((r / self.width) ** 2))
        if self.kind == "step":
            return np.where(x[..., 0] < c[0], self.amplitude, 0.0)
        if self.kind == "plateau":
            return self.amplitude * np.clip((self.width - r) / self.ramp, 0.0, 1.0)
        raise ConfigError(f"unknown profile kind {self.kind!r}")


@dataclass
class DriftSpec:
    """V(x) = A (x - c) + b and friends, selected by ``kind``."""

    kind: str = "zero"
    scale: float = 1.0
    matrix: list[list[float]] | None = None
    center: list[float] = field(default_factory=lambda: [0.5])
    offset: list[float] = field(default_factory=lambda: [0.0])
    width: float = 0.25

    def build(self, grid: Grid) -> VectorFieldSpec:
        d = grid.dim
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (d,))
        b = np.broadcast_to(np.asarray(self.offset, dtype=float), (d,))
        s = self.scale
        if self.kind == "zero":
            return VectorFieldSpec.zero(grid)
        if self.kind == "constant":
            fn = lambda X: np.broadcast_to(s * b, X.shape).copy()  # noqa: E731
        elif self.kind == "linear":
            A = np.eye(d) if self.matrix is None else np.asarray(self.matrix, dtype=float)
            if A.shape != (d, d):
                raise ConfigError(f"drift.matrix must be {d}x{d}")
            fn = lambda X: s * ((X - c) @ A.T) + b  # noqa: E731
        elif self.kind == "radial":
            fn = lambda X: s * (X - c)  # noqa: E731
        elif self.kind == "rotational":
            if d != 2:
                raise ConfigError("drift.kind 'rotational' needs a 2D grid")
            fn = lambda X: s * np.stack([-(X[..., 1] - c[1]), X[..., 0] - c[0]], axis=-1)  # noqa: E731
        elif self.kind == "potential_bump":
            # V = -grad of s * exp(-|x-c|^2 / w^2): outward for s > 0
            w2 = self.width**2

            def fn(X):
                g = np.exp(-np.sum((X - c) ** 2, axis=-1, keepdims=True) / w2)
                return s * 2.0 * (X - c) / w2 * g
        else:
            raise ConfigError(f"unknown drift kind {self.kind!r}")
        return VectorFieldSpec.from_callable(grid, fn, name=self.kind)


@dataclass
class ReactionConfig:
    kind: str = "none"
    coefficient: float = 0.0
    source: Profile = field(default_factory=Profile)


@dataclass
class RunConfig:
    cells: list[int] = field(default_factory=lambda: [64])
    extent: list[list[float]] = field(default_factory=lambda: [[0.0, 1.0]])
    drift: DriftSpec = field(default_factory=DriftSpec)
    m: float = 2.0
    ms: list[float] = field(default_factory=list)
    lam: float = 0.1
    T: float = 0.5
    steps: int = 20
    levels: int = 3
    u0: Profile = field(default_factory=Profile)
    f: Profile = field(default_factory=Profile)
    f2: Profile | None = None
    reaction: ReactionConfig = field(default_factory=ReactionConfig)
    cutoff_h: float = 0.2
    tol: float = 1e-8
    solver_tol: float = 1e-11
    mask_threshold: float = 1e-8
    out: str | None = None
    seed: int = 0

    def grid(self) -> Grid:
        return Grid(tuple(self.cells), tuple(tuple(e) for e in self.extent))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m"] = _num(self.m)
        d["ms"] = [_num(m) for m in self.ms]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return parse_config(data)


def _profile(d: Any, where: str) -> Profile:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    _unknown(d, Profile, where)
    kind = d.get("kind", "zero")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"{where}.kind: unknown profile {kind!r}; choose from {PROFILE_KINDS}")
    p = Profile(
        kind=kind,
        amplitude=_parse_num(d.get("amplitude", 0.0), f"{where}.amplitude"),
        center=_vec(d.get("center", [0.5]), f"{where}.center"),
        width=_parse_num(d.get("width", 0.1), f"{where}.width"),
        ramp=_parse_num(d.get("ramp", 0.05), f"{where}.ramp"),
    )
    if p.width <= 0 or p.ramp <= 0:
        raise ConfigError(f"{where}: width and ramp must be positive")
    return p


def _unknown(d: dict, cls, where: str) -> None:
    known = set(cls.__dataclass_fields__)
    extra = sorted(set(d) - known)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {extra}")


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be an object")
    _unknown(data, RunConfig, "config")
    cfg = RunConfig()
    if "cells" in data:
        cells = data["cells"]
        if isinstance(cells, int):
            cells = [cells]
        if not isinstance(cells, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in cells):
            raise ConfigError("cells: expected an integer or a list of integers")
        cfg.cells = list(cells)
    if "extent" in data:
        ext = data["extent"]
        if not isinstance(ext, list) or not all(isinstance(e, list) and len(e) == 2 for e in ext):
            raise ConfigError("extent: expected a list of [a, b] pairs")
        cfg.extent = [[_parse_num(a, f"extent[{i}][0]"), _parse_num(b, f"extent[{i}][1]")] for i, (a, b) in enumerate(ext)]
    elif len(cfg.cells) != 1:
        cfg.extent = [[0.0, 1.0] for _ in cfg.cells]
    try:
        grid = cfg.grid()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    if "drift" in data:
        d = data["drift"]
        if not isinstance(d, dict):
            raise ConfigError("drift: expected an object")
        _unknown(d, DriftSpec, "drift")
        kind = d.get("kind", "zero")
        if kind not in DRIFT_KINDS:
            raise ConfigError(f"drift.kind: unknown drift {kind!r}; choose from {DRIFT_KINDS}")
        mat = d.get("matrix")
        if mat is not None:
            if not isinstance(mat, list) or not all(isinstance(r, list) for r in mat):
                raise ConfigError("drift.matrix: expected a list of rows")
            mat = [_vec(r, f"drift.matrix[{i}]") for i, r in enumerate(mat)]
        cfg.drift = DriftSpec(
            kind=kind,
            scale=_parse_num(d.get("scale", 1.0), "drift.scale"),
            matrix=mat,
            center=_vec(d.get("center", [0.5]), "drift.center"),
            offset=_vec(d.get("offset", [0.0]), "drift.offset"),
            width=_parse_num(d.get("width", 0.25), "drift.width"),
        )
        if cfg.drift.width <= 0:
            raise ConfigError("drift.width must be positive")

    for key in ("lam", "T", "cutoff_h", "tol", "solver_tol", "mask_threshold"):
        if key in data:
            v = _parse_num(data[key], key)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigError(f"{key}: must be a positive finite number, got {data[key]!r}")
            setattr(cfg, key, v)
    if "m" in data:
        cfg.m = _parse_num(data["m"], "m")
        if not cfg.m >= 1:
            raise ConfigError("m: must be >= 1 (or \"inf\")")
    if "ms" in data:
        cfg.ms = _vec(data["ms"], "ms")
        if any(m < 1 for m in cfg.ms) or any(b <= a for a, b in zip(cfg.ms, cfg.ms[1:])):
            raise ConfigError("ms: must be strictly increasing values >= 1")
    for key in ("steps", "levels", "seed"):
        if key in data:
            v = data[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "seed" else 1):
                raise ConfigError(f"{key}: expected a {'nonnegative' if key == 'seed' else 'positive'} integer")
            setattr(cfg, key, v)
    if cfg.levels < 2 and "levels" in data:
        raise ConfigError("levels: need at least 2 for a convergence trace")
    for key in ("u0", "f"):
        if key in data:
            setattr(cfg, key, _profile(data[key], key))
    if data.get("f2") is not None:
        cfg.f2 = _profile(data["f2"], "f2")
    if "reaction" in data:
        r = data["reaction"]
        if not isinstance(r, dict):
            raise ConfigError("reaction: expected an object")
        _unknown(r, ReactionConfig, "reaction")
        kind = r.get("kind", "none")
        if kind not in REACTION_KINDS:
            raise ConfigError(f"reaction.kind: unknown reaction {kind!r}; choose from {REACTION_KINDS}")
        cfg.reaction = ReactionConfig(
            kind=kind,
            coefficient=_parse_num(r.get("coefficient", 0.0), "reaction.coefficient"),
            source=_profile(r.get("source", {}), "reaction.source"),
        )
    if data.get("out") is not None:
        if not isinstance(data["out"], str):
            raise ConfigError("out: expected a string path")
        cfg.out = data["out"]
    half = 0.5 * min(b - a for a, b in grid.extent)
    if not cfg.cutoff_h < half:
        raise ConfigError(f"cutoff_h: must be below {half}")
    return cfg
