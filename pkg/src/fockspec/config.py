"""Flat key = value experiment configuration.

Lines are ``key = value``; ``#`` starts a comment.  The symbol may be given
as one list (``symbol = 0, 1``) or one coefficient per key (``symbol.2 = 0.5j``).
Every key can be overridden by an environment variable ``FOCKSPEC_<KEY>``
with dots written as double underscores.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .hankel import SymbolPoly
from .weights import WeightSpec, weight_from_mapping

ENV_PREFIX = "FOCKSPEC_"

_DEFAULTS: dict[str, str] = {
    "kind": "radial_power",
    "m": "2",
    "symbol": "0, 1",
    "N": "200",
    "p_grid": "3, 3.5, 4.5, 5, 6",
    "box": "-2, 2, -2, 2",
    "source": "0",
    "nodes_per_rho": "8",
    "rho_grid": "41",
    "rho_tol": "1e-10",
    "grid_cap": "4000000",
    "eps": "auto",
    "alpha": "0.25",
    "kernel_n_max": "400",
    "sample_radius": "3",
    "ladder_octaves": "12",
    "envelope_octaves": "10",
    "out": "out",
}

_FLOAT_KEYS = {"m", "nodes_per_rho", "rho_tol", "alpha", "sample_radius"}
_INT_KEYS = {"N", "rho_grid", "grid_cap", "kernel_n_max", "ladder_octaves", "envelope_octaves"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def parse_text(text: str) -> tuple[dict[str, str], dict[str, int]]:
    """Raw key -> value strings plus the line each key came from."""
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key.count(".") > 1:
            raise ConfigError("only one nesting level is allowed", lineno, key)
        if key in values:
            raise ConfigError(f"duplicate key (first set on line {lines[key]})", lineno, key)
        values[key] = value
        lines[key] = lineno
    return values, lines


def _env_overrides(environ) -> dict[str, str]:
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].replace("__", ".")
            match = [k for k in _DEFAULTS if k.lower() == key.lower()]
            out[match[0] if match else key.lower()] = value
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.replace(";", ",").split(",") if s.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    weight: WeightSpec
    symbol: SymbolPoly
    N: int
    p_grid: tuple
    box: tuple
    source: complex
    nodes_per_rho: float
    rho_grid: int
    rho_tol: float
    grid_cap: int
    eps: float | None
    alpha: float
    kernel_n_max: int
    sample_radius: float
    ladder_octaves: int
    envelope_octaves: int
    out: Path
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sha256(self) -> str:
        canon = "\n".join(f"{k}={self.raw[k]}" for k in sorted(self.raw) if k not in ("out", "density_table"))
        canon += f"\nweight={self.weight.weight_id}"
        return hashlib.sha256(canon.encode()).hexdigest()


def build(values: dict[str, str], lines: dict[str, int] | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    lines = lines or {}
    merged = dict(_DEFAULTS)
    merged.update(values)
    known = set(_DEFAULTS) | {"density_table"}
    sym_keys = sorted((k for k in merged if k.startswith("symbol.")), key=lambda k: k)
    for k in merged:
        if k not in known and not k.startswith("symbol."):
            raise ConfigError("unknown key", lines.get(k), k)

    def conv(key, fn):
        try:
            return fn(merged[key])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad value {merged.get(key)!r} ({exc})", lines.get(key), key) from None

    for key in _FLOAT_KEYS:
        conv(key, float)
    for key in _INT_KEYS:
        conv(key, int)

    try:
        weight = weight_from_mapping({k: merged[k] for k in ("kind", "m", "density_table") if k in merged}, base_dir)
    except (KeyError, ValueError, OSError) as exc:
        key = "density_table" if "density_table" in merged else "kind"
        raise ConfigError(str(exc), lines.get(key), key) from None

    if sym_keys:
        if "symbol" in values:
            raise ConfigError("give the symbol either as a list or per coefficient, not both", lines.get(sym_keys[0]), sym_keys[0])
        coeffs: dict[int, complex] = {}
        for k in sym_keys:
            try:
                coeffs[int(k.split(".", 1)[1])] = complex(merged[k].replace(" ", ""))
            except ValueError:
                raise ConfigError("symbol coefficients need an integer index and a number", lines.get(k), k) from None
        deg = max(coeffs)
        symbol = SymbolPoly(tuple(coeffs.get(a, 0.0) for a in range(deg + 1)))
        merged["symbol"] = ", ".join(repr(c) for c in symbol.coeffs)
        for k in sym_keys:
            merged.pop(k)
    else:
        symbol = conv("symbol", SymbolPoly.parse)

    p_grid = conv("p_grid", _floats)
    if list(p_grid) != sorted(p_grid):
        raise ConfigError("p grid must be sorted", lines.get("p_grid"), "p_grid")
    box = conv("box", _floats)
    if len(box) != 4 or not (box[1] > box[0] and box[3] > box[2]):
        raise ConfigError("box needs xmin, xmax, ymin, ymax with max > min", lines.get("box"), "box")
    N = int(merged["N"])
    if N < 16:
        raise ConfigError("N must be at least 16", lines.get("N"), "N")
    for key in ("rho_tol", "nodes_per_rho", "alpha", "sample_radius"):
        if not float(merged[key]) > 0:
            raise ConfigError("must be positive", lines.get(key), key)
    eps_text = merged["eps"].strip().lower()
    eps = None if eps_text == "auto" else conv("eps", float)
    if eps is not None and not 0 < eps <= 1:
        raise ConfigError("eps must lie in (0, 1]", lines.get("eps"), "eps")
    return ExperimentConfig(
        weight=weight, symbol=symbol, N=N, p_grid=p_grid, box=box,
        source=conv("source", lambda s: complex(s.replace(" ", ""))),
        nodes_per_rho=float(merged["nodes_per_rho"]), rho_grid=int(merged["rho_grid"]),
        rho_tol=float(merged["rho_tol"]), grid_cap=int(merged["grid_cap"]), eps=eps,
        alpha=float(merged["alpha"]), kernel_n_max=int(merged["kernel_n_max"]),
        sample_radius=float(merged["sample_radius"]), ladder_octaves=int(merged["ladder_octaves"]),
        envelope_octaves=int(merged["envelope_octaves"]), out=Path(merged["out"]), raw=merged,
    )


def load(path: str | os.PathLike | None = None, environ=None, overrides: dict | None = None) -> ExperimentConfig:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    base = None
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        values, lines = parse_text(text)
        base = p.parent
    env = _env_overrides(os.environ if environ is None else environ)
    values.update(env)
    for k in env:
        lines.pop(k, None)
    if overrides:
        values.update({k: str(v) for k, v in overrides.items()})
    return build(values, lines, base)
