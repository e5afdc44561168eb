"""JSON parameter files (format version 1).

A SUN file holds ``version, family="sun", d, m, xi, omega, delta, tau,
gamma_bar``; a CSN file holds ``version, family="csn", d, m, mu, sigma,
delta, nu, delta_c``. Matrices are full, row-major nested lists. ``delta``
is ``d x m`` for SUN and ``m x d`` (the matrix ``D``) for CSN. An optional
``qmc`` object overrides the orthant integration settings.

Floats are written with Python's shortest round-trip representation, so
``parse(serialize(p)) == p`` bitwise.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .core import CsnParams, SunParams
from .errors import DimensionMismatch, ParseError
from .gauss import QmcConfig

FORMAT_VERSION = 1
_SUN_KEYS = ("xi", "omega", "delta", "tau", "gamma_bar")
_CSN_KEYS = ("mu", "sigma", "delta", "nu", "delta_c")
_QMC_KEYS = ("target_abs_error", "max_points", "shifts", "seed")

Params = Union[SunParams, CsnParams]


@dataclass(frozen=True)
class ParamFile:
    params: Params
    qmc: Optional[QmcConfig] = None

    @property
    def family(self) -> str:
        return "sun" if isinstance(self.params, SunParams) else "csn"


def _reject_constant(name):
    raise ParseError(f"non-finite number {name} in parameter file")


def _array(doc, key, shape):
    if key not in doc:
        raise ParseError(f"missing field {key!r}")
    try:
        a = np.array(doc[key], dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field {key!r} is not a numeric array") from None
    if a.shape != shape:
        raise DimensionMismatch(f"field {key!r} has shape {a.shape}, expected {shape}")
    return a


def _int(doc, key):
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ParseError(f"field {key!r} must be a positive integer")
    return v


def parse_params(text: str) -> ParamFile:
    """Parse and validate a parameter document."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ParseError("parameter file must hold a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}")
    family = doc.get("family")
    d, m = _int(doc, "d"), _int(doc, "m")
    if family == "sun":
        params = SunParams(
            _array(doc, "xi", (d,)),
            _array(doc, "omega", (d, d)),
            _array(doc, "delta", (d, m)),
            _array(doc, "tau", (m,)),
            _array(doc, "gamma_bar", (m, m)),
        )
    elif family == "csn":
        params = CsnParams(
            _array(doc, "mu", (d,)),
            _array(doc, "sigma", (d, d)),
            _array(doc, "delta", (m, d)),
            _array(doc, "nu", (m,)),
            _array(doc, "delta_c", (m, m)),
        )
    else:
        raise ParseError(f"family must be 'sun' or 'csn', got {family!r}")

    qmc = None
    if "qmc" in doc:
        q = doc["qmc"]
        if not isinstance(q, dict) or set(q) - set(_QMC_KEYS):
            raise ParseError(f"qmc must be an object with keys among {_QMC_KEYS}")
        try:
            qmc = QmcConfig(**q)
        except (TypeError, ValueError) as e:
            raise ParseError(f"invalid qmc block: {e}") from None
    return ParamFile(params, qmc)


def load_params(path) -> ParamFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}") from None
    return parse_params(text)


def _check_finite(p: Params):
    for a in p.fields():
        if not np.all(np.isfinite(a)):
            raise ValueError("only finite parameters can be serialized")


def params_to_dict(p: Params, qmc: Optional[QmcConfig] = None) -> dict:
    _check_finite(p)
    keys = _SUN_KEYS if isinstance(p, SunParams) else _CSN_KEYS
    doc = {
        "version": FORMAT_VERSION,
        "family": "sun" if isinstance(p, SunParams) else "csn",
        "d": p.d,
        "m": p.m,
    }
    for k, a in zip(keys, p.fields()):
        doc[k] = np.asarray(a, dtype=float).tolist()
    if qmc is not None:
        doc["qmc"] = asdict(qmc)
    return doc


def serialize_params(p: Params, qmc: Optional[QmcConfig] = None) -> str:
    return json.dumps(params_to_dict(p, qmc), indent=2, allow_nan=False) + "\n"


def write_params(path, p: Params, qmc: Optional[QmcConfig] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_params(p, qmc))


def floats_equal_bitwise(a, b) -> bool:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return a.shape == b.shape and a.tobytes() == b.tobytes()


def format_float(x: float) -> str:
    """Shortest round-trip text for ``x``."""
    return "nan" if math.isnan(x) else repr(float(x))
