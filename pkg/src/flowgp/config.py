"""Run configuration: defaults, a flat ``key = value`` file format and
the manifest written next to every output."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .design import Box
from .dynamics import DIVERGENCE_THRESHOLD, SystemSpec
from .errors import InputError

OUTPUT_ENV = "FLOWGP_OUTPUT_DIR"
SECTION = "run"

# Training boxes enclose the attractor (or transient) explored from the
# reference initial conditions; benchmark initial conditions are drawn
# from ``ic_box`` instead.
DEFAULT_BOX = {
    "lorenz": ([-10.0, -25.0, -30.0], [50.0, 25.0, 30.0]),
    "vanderpol": ([-3.0, -10.0], [3.0, 10.0]),
    "hindmarshrose": ([-2.5, -20.0, 0.0], [2.5, 2.0, 4.0]),
}
DEFAULT_X0 = {"lorenz": [1.0, 1.0, 1.0], "vanderpol": [1.0, 1.0], "hindmarshrose": [1.0, 1.0, 1.0]}
DEFAULT_T = {"lorenz": 20.0, "vanderpol": 20.0, "hindmarshrose": 100.0}


def _vec(text):
    if text is None or isinstance(text, (list, tuple, np.ndarray)):
        return None if text is None else [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _fmt_vec(v):
    return ",".join(format(float(x), ".17g") for x in v)


@dataclass
class RunConfig:
    """Every knob of a run. ``None`` means "system default" until :meth:`resolved`."""

    system: str = "lorenz"
    params: dict = field(default_factory=dict)
    box_lower: list = None
    box_upper: list = None
    ic_lower: list = None
    ic_upper: list = None
    x0: list = None
    n: int = None
    dt: float = 0.01
    T: float = None
    M: int = 250
    S: int = 100
    seed: int = 0
    master_seed: int = 0
    lhs_iterations: int = 1000
    substeps: int = 1
    n_inits: int = 100
    bench_seed: int = 0
    workers: int = 1
    log_sd: bool = False
    penalty: float = 3.0
    cp_variance: float = 1.0
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    warn_outside_box: bool = False
    output_dir: str = None

    def spec(self):
        return SystemSpec(self.system, self.params)

    def resolved(self):
        """Copy with system defaults filled in and values validated."""
        sys = self.spec()
        d = sys.dim
        lo, hi = DEFAULT_BOX[sys.kind]
        out = replace(
            self,
            system=sys.kind,
            params=dict(sys.params),
            box_lower=_vec(self.box_lower) or list(lo),
            box_upper=_vec(self.box_upper) or list(hi),
            ic_lower=_vec(self.ic_lower) or [-10.0] * d,
            ic_upper=_vec(self.ic_upper) or [10.0] * d,
            x0=_vec(self.x0) or list(DEFAULT_X0[sys.kind]),
            n=int(self.n) if self.n is not None else 15 * d,
            T=float(self.T) if self.T is not None else DEFAULT_T[sys.kind],
            output_dir=self.output_dir or os.environ.get(OUTPUT_ENV) or "flowgp-out",
        )
        for name in ("box_lower", "box_upper", "ic_lower", "ic_upper", "x0"):
            if len(getattr(out, name)) != d:
                raise InputError(f"{name} must have {d} entries for {sys.kind}")
        out.box()
        out.ic_box()
        if out.dt <= 0 or out.T < out.dt:
            raise InputError("need T >= dt > 0")
        for name in ("M", "S", "substeps", "workers", "n_inits"):
            if int(getattr(out, name)) < 1:
                raise InputError(f"{name} must be positive")
        if out.n < 1:
            raise InputError("n must be positive")
        return out

    def box(self):
        return Box(self.box_lower, self.box_upper)

    def ic_box(self):
        return Box(self.ic_lower, self.ic_upper)

    def horizon_kwargs(self):
        return {"log_transform": bool(self.log_sd), "penalty": float(self.penalty),
                "variance": None if self.cp_variance is None or self.cp_variance <= 0 else float(self.cp_variance)}

    def to_items(self):
        items = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "params":
                for k in sorted(v):
                    items[f"param_{k}"] = format(float(v[k]), ".17g")
            elif v is None:
                continue
            elif isinstance(v, list):
                items[f.name] = _fmt_vec(v)
            elif isinstance(v, float):
                items[f.name] = format(v, ".17g")
            else:
                items[f.name] = str(v)
        return items

    def write(self, path, extra=None):
        """Write a manifest that :func:`load_config` reads back."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp[SECTION] = self.to_items()
        if extra:
            cp["outputs"] = {k: str(v) for k, v in extra.items()}
        path = Path(path)
        with path.open("w") as fh:
            cp.write(fh)
        return path


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    kind = _TYPES[name]
    if name in ("box_lower", "box_upper", "ic_lower", "ic_upper", "x0"):
        return _vec(value)
    if kind == "bool":
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def config_from_mapping(mapping, base=None):
    """Apply ``key -> value`` strings on top of ``base`` (or the defaults)."""
    cfg = replace(base) if base is not None else RunConfig()
    params = dict(cfg.params)
    for key, value in mapping.items():
        if value is None:
            continue
        if key.startswith("param_"):
            params[key[len("param_"):]] = float(value)
        elif key in _TYPES and key != "params":
            try:
                setattr(cfg, key, _coerce(key, value))
            except ValueError as err:
                raise InputError(f"bad value for {key}: {value!r}") from err
        else:
            raise InputError(f"unknown configuration key {key!r}")
    cfg.params = params
    return cfg


def load_config(path, base=None):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with Path(path).open() as fh:
            cp.read_file(fh)
    except OSError as err:
        raise InputError(f"cannot read config {path}: {err}") from err
    except configparser.Error as err:
        raise InputError(f"malformed config {path}: {err}") from err
    if SECTION not in cp:
        raise InputError(f"config {path} has no [{SECTION}] section")
    return config_from_mapping(dict(cp[SECTION]), base)
