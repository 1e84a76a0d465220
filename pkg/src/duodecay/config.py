"""Plain-text run configuration: flat ``key = value`` lines under ``[section]`` headers.

Every key has a type and a default in ``SCHEMA``; unknown keys are errors.
Floats are written with 17 significant digits so a parse/print cycle is
lossless, and the canonical text is what gets hashed.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field

from .model import ModelError, ModelParams


def _fmt_float(x):
    return format(float(x), ".17g")


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_opt_float(s):
    s = s.strip()
    return None if s in ("", "none", "auto") else float(s)


def _parse_opt_int(s):
    s = s.strip()
    return None if s in ("", "none", "auto") else int(s)


def _parse_floats(s):
    return [float(v) for v in s.replace(",", " ").split()]


def _parse_words(s):
    return [v for v in s.replace(",", " ").split()]


_PARSE = {
    "float": float,
    "int": int,
    "str": lambda s: s.strip(),
    "bool": _parse_bool,
    "ofloat": _parse_opt_float,
    "oint": _parse_opt_int,
    "floats": _parse_floats,
    "words": _parse_words,
}


def _show(kind, v):
    if v is None:
        return "auto"
    if kind in ("float", "ofloat"):
        return _fmt_float(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind == "floats":
        return ", ".join(_fmt_float(x) for x in v)
    if kind == "words":
        return ", ".join(v)
    return str(v)


SCHEMA = {
    "model": {
        "J": ("float", 1.0),
        "g": ("float", 0.3),
        "delta": ("float", 0.0),
        "L": ("int", 41),
        "x1": ("oint", None),
        "x2": ("oint", None),
        "boundary": ("str", "open"),
        "sector": ("int", 2),
    },
    "grid": {
        "t_max": ("float", 20.0),
        "n_samples": ("int", 201),
    },
    "engine": {
        "engine": ("str", "krylov"),
        "tol": ("float", 1e-10),
        "levels": ("int", 4),
        "h_coarse": ("ofloat", None),
        "absorber_width": ("int", 0),
        "absorber_strength": ("float", 0.2),
    },
    "initial": {
        "state": ("str", "ee"),
    },
    "output": {
        "format": ("str", "csv"),
    },
    "compare": {
        "tol": ("float", 1e-4),
        "reconstruct": ("bool", True),
    },
    "fit": {
        "observable": ("str", "single-continuum"),
        "sigma": ("int", 1),
        "producer": ("str", "analytic"),
        "t_min": ("float", 10.0),
        "t_max": ("float", 1000.0),
        "centers": ("int", 60),
        "burst": ("int", 20),
        "tie": ("float", 6.0),
        "floor": ("float", 1e-3),
    },
    "markov": {
        "gamma_t_max": ("float", 5.0),
        "n_samples": ("int", 101),
        "constant": ("float", 1.0),
    },
    "sweep": {
        "command": ("str", "simulate"),
        "key": ("str", "model.g"),
        "values": ("floats", []),
    },
    "plot": {
        "columns": ("words", []),
        "title": ("str", ""),
        "log_y": ("bool", False),
    },
    "debug": {
        "corrupt_metadata": ("str", ""),
    },
}


class ConfigError(ModelError):
    pass


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
        for s, kv in self.values.items():
            if s not in SCHEMA:
                raise ConfigError("invalid-config", f"unknown section [{s}]")
            for k, v in kv.items():
                if k not in SCHEMA[s]:
                    raise ConfigError("invalid-config", f"unknown key {s}.{k}")
                full[s][k] = v
        self.values = full

    def __getitem__(self, dotted):
        s, k = dotted.split(".")
        return self.values[s][k]

    def set(self, dotted, value):
        s, k = dotted.split(".")
        if s not in SCHEMA or k not in SCHEMA[s]:
            raise ConfigError("invalid-config", f"unknown key {dotted}")
        kind = SCHEMA[s][k][0]
        if isinstance(value, str):
            value = _PARSE[kind](value)
        elif kind == "int":
            value = int(round(value))
        vals = {sec: dict(kv) for sec, kv in self.values.items()}
        vals[s][k] = value
        return RunConfig(vals)

    def section(self, name):
        return dict(self.values[name])

    def model_params(self):
        m = self.values["model"]
        return ModelParams(
            J=m["J"], g=m["g"], delta=m["delta"], L=m["L"], x1=m["x1"], x2=m["x2"],
            boundary=m["boundary"], n_excitations=m["sector"],
        )

    def to_text(self):
        """Canonical text: every key, schema order, 17-digit floats."""
        lines = []
        for s, keys in SCHEMA.items():
            lines.append(f"[{s}]")
            for k, (kind, _) in keys.items():
                lines.append(f"{k} = {_show(kind, self.values[s][k])}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text):
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=None)
        cp.optionxform = str  # keys are case-sensitive (J, L)
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError("invalid-config", str(e).splitlines()[0]) from None
        vals = {}
        for s in cp.sections():
            if s not in SCHEMA:
                raise ConfigError("invalid-config", f"unknown section [{s}]")
            vals[s] = {}
            for k, raw in cp.items(s):
                if k not in SCHEMA[s]:
                    raise ConfigError("invalid-config", f"unknown key {s}.{k}")
                kind = SCHEMA[s][k][0]
                try:
                    vals[s][k] = _PARSE[kind](raw)
                except ValueError as e:
                    raise ConfigError("invalid-config", f"{s}.{k}: {e}") from None
        return cls(vals)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())
