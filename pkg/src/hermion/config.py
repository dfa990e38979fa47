"""INI run configuration: one section per module, typed keys, canonical re-serialization."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from .datum import DatumSpec, FileDatum, Gaussian, HermiteCoeffs, RoughExample
from .nonlinearity import BoxSpec, Hartree, RealEntireSeries, gaussian_multiplier
from .solver import HartreeLaw, PowerLaw, SeriesLaw, SolverConfig
from .tf_analysis import TFLattice


class ConfigError(ValueError):
    """Invalid or empty configuration (usage error)."""


DEFAULT_CUTOFF = {1: 64, 2: 32, 3: 16}

# section -> key -> (type, default); None default means "derived" or "absent"
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {"dim": ("int", 1), "seed": ("int", 0), "output": ("str", "hermion-out"),
            "snapshots": ("bool", False)},
    "grid": {"cutoff": ("int", None), "box_half_width": ("float", 14.0), "box_points": ("int", 256)},
    "lattice": {"x_step": ("float", 0.25), "y_step": ("float", 0.25), "x_extent": ("float", 12.0),
                "y_extent": ("float", 12.0), "window_width": ("float", 1.0)},
    "solver": {"horizon": ("float", 1.0), "dt": ("float", 1e-3), "scheme": ("str", "strang"),
               "picard_iters": ("int", 30), "time_quadrature_nodes": ("int", 8), "time_samples": ("int", 16),
               "fixed_point_tol": ("float", 1e-12), "conservation_tol": ("float", 1e-9), "sign": ("int", -1),
               "snapshot_interval": ("float", 0.1), "monitor_p": ("floats", (1.0, 2.0)),
               "monitors": ("bool", True)},
    "nonlinearity": {"type": ("str", "none"), "k": ("int", 1), "sign": ("int", 1), "coupling": ("float", 1.0),
                     "lambda": ("float", 1.0), "gamma": ("float", 0.4), "width": ("float", 0.05),
                     "path": ("str", ""), "coeffs": ("str", "")},
    "datum": {"type": ("str", "hermite_coeffs"), "coeffs": ("complexes", (1.0,)), "center": ("floats", (0.0,)),
              "width": ("float", 1.0), "momentum": ("floats", (0.0,)), "q": ("float", 2.0),
              "epsilon": ("float", 0.1), "kmax": ("int", 8), "path": ("str", "")},
    "verify": {"family_size": ("int", 20), "family_cutoff": ("int", 8), "family_decay": ("float", 0.4),
               "tamper_mode": ("int", -1),
               "seeds": ("ints", (0, 1, 2))},
}


def _parse(kind: str, text: str, where: str):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "floats":
            return tuple(float(v) for v in text.split(",") if v.strip())
        if kind == "ints":
            return tuple(int(v) for v in text.split(",") if v.strip())
        if kind == "complexes":
            return tuple(complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip())
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot read {text!r} as {kind}") from exc


def _format(kind: str, value) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind in ("floats", "ints"):
        return ", ".join(repr(v) for v in value)
    if kind == "complexes":
        return ", ".join(repr(complex(v)).strip("()") for v in value)
    return str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def dim(self) -> int:
        return self.values["run"]["dim"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def cutoff(self) -> int:
        return self.values["grid"]["cutoff"]

    @property
    def output(self) -> Path:
        out = Path(self.values["run"]["output"])
        if not out.is_absolute() and self.source:
            out = Path(self.source).resolve().parent / out
        return out

    def box(self) -> BoxSpec:
        g = self.values["grid"]
        return BoxSpec(g["box_half_width"], g["box_points"])

    def lattice(self) -> TFLattice:
        return TFLattice(dim=self.dim, **self.values["lattice"])

    def nonlinearity(self):
        n = self.values["nonlinearity"]
        kind = n["type"]
        if kind == "none":
            return None
        if kind == "power":
            return PowerLaw(n["k"], n["sign"], n["coupling"])
        if kind == "hartree":
            kernel = Hartree(n["lambda"], n["gamma"])
            kernel.check(self.dim)
            return HartreeLaw(kernel, n["k"], n["coupling"], self.box())
        if kind == "gaussian":
            return HartreeLaw(gaussian_multiplier(n["width"], self.dim), n["k"], n["coupling"], self.box())
        if kind == "grid":
            from .io import read_grid_kernel
            return HartreeLaw(read_grid_kernel(self._resolve(n["path"])), n["k"], n["coupling"], self.box())
        if kind == "series":
            return SeriesLaw(parse_series(n["coeffs"]))
        raise ConfigError(f"[nonlinearity] unknown type {kind!r}")

    def solver(self) -> SolverConfig:
        s = dict(self.values["solver"])
        try:
            return SolverConfig(nonlinearity=self.nonlinearity(), **s)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from exc

    def datum(self) -> DatumSpec:
        d = self.values["datum"]
        kind = d["type"]
        if kind == "hermite_coeffs":
            return HermiteCoeffs(d["coeffs"])
        if kind == "gaussian":
            return Gaussian(d["center"], d["width"], d["momentum"])
        if kind == "rough_example":
            return RoughExample(d["q"], d["epsilon"], d["kmax"])
        if kind == "file":
            return FileDatum(str(self._resolve(d["path"])))
        raise ConfigError(f"[datum] unknown type {kind!r}")

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        if not path.is_absolute() and self.source:
            path = Path(self.source).resolve().parent / path
        return path

    def serialize(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (kind, _) in keys.items():
                lines.append(f"{key} = {_format(kind, self.values[section][key])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def parse_series(text: str) -> RealEntireSeries:
    """'m n value; m n value' -> RealEntireSeries with those a_mn."""
    import numpy as np
    entries = []
    for chunk in text.split(";"):
        if chunk.strip():
            parts = chunk.split()
            if len(parts) != 3:
                raise ConfigError(f"series term {chunk.strip()!r} must read 'm n value'")
            entries.append((int(parts[0]), int(parts[1]), complex(parts[2])))
    if not entries:
        raise ConfigError("series nonlinearity needs at least one term")
    size = max(max(m, n) for m, n, _ in entries) + 1
    a = np.zeros((size, size), dtype=complex)
    for m, n, v in entries:
        a[m, n] += v
    try:
        return RealEntireSeries(a)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str, source: str = "") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not cp.sections():
        raise ConfigError("config is empty; at least one section such as [run] is required")
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (kind, default) in keys.items():
            if cp.has_option(section, key):
                values[section][key] = _parse(kind, cp.get(section, key), f"[{section}] {key}")
            else:
                values[section][key] = default
    dim = values["run"]["dim"]
    if dim not in DEFAULT_CUTOFF:
        raise ConfigError("dimension must be 1, 2 or 3")
    if values["grid"]["cutoff"] is None:
        values["grid"]["cutoff"] = DEFAULT_CUTOFF[dim]
    if values["grid"]["cutoff"] < 1:
        raise ConfigError("[grid] cutoff must be positive")
    snap = values["solver"]["snapshot_interval"]
    if not (snap > 0 and math.isfinite(snap)):
        raise ConfigError("[solver] snapshot_interval must be positive")
    cfg = RunConfig(values, source)
    try:
        cfg.lattice()
        cfg.box()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    """Read and parse; OSError propagates so callers can map it to an I/O failure."""
    text = Path(path).read_text()
    return parse_config(text, str(path))
