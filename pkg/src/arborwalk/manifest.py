"""Experiment manifest loading and validation.

A manifest is a small versioned JSON document that fully determines a
run; validation errors carry the offending field path.
"""

import json
import os

from .errors import ManifestError

SCHEMA_VERSION = 1

KINDS = ("return_prob", "wiener", "green_moments", "lyapunov",
         "diagram_q3", "diagram_q4", "blocks", "covariance", "paths_audit")

COIN_FAMILIES = ("q3_delocalizing", "q3_localizing", "q4_reducing",
                 "q4_propagating", "q4_localizing", "permutation", "boundary")


def _require(doc: dict, field: str, types, path: str = ""):
    loc = f"{path}{field}"
    if field not in doc:
        raise ManifestError(loc, "missing required field")
    value = doc[field]
    if not isinstance(value, types):
        raise ManifestError(loc, f"expected {types}, got {type(value).__name__}")
    return value


def _opt(doc: dict, field: str, types, default, path: str = ""):
    if field not in doc:
        return default
    return _require(doc, field, types, path)


def _validate_coin(doc: dict, q: int, path: str = "coin."):
    family = _require(doc, "family", str, path)
    base = family.rsplit("_", 1)[0] if family[-1].isdigit() else family
    if base not in COIN_FAMILIES and family not in COIN_FAMILIES:
        raise ManifestError(path + "family", f"unknown family {family!r}")
    if family.startswith("q3") and q != 3:
        raise ManifestError(path + "family", f"{family} requires q=3, manifest has q={q}")
    if family.startswith("q4") and q != 4:
        raise ManifestError(path + "family", f"{family} requires q=4, manifest has q={q}")
    params = _opt(doc, "params", dict, {}, path)
    for key, value in params.items():
        if not isinstance(value, (int, float)):
            raise ManifestError(f"{path}params.{key}", "parameters must be numbers")
    if family == "permutation":
        perm = _require(doc, "perm", list, path)
        if sorted(perm) != list(range(q)):
            raise ManifestError(path + "perm", f"not a permutation of 0..{q - 1}")
    phases = _opt(doc, "phases", list, None, path)
    if phases is not None and len(phases) != q:
        raise ManifestError(path + "phases", f"need {q} phases")


def validate(doc: dict) -> dict:
    """Validate a manifest document; returns it with defaults filled in."""
    if not isinstance(doc, dict):
        raise ManifestError("", "manifest must be a JSON object")
    version = _require(doc, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ManifestError("schema_version", f"unsupported version {version}")
    kind = _require(doc, "kind", str)
    if kind not in KINDS:
        raise ManifestError("kind", f"unknown kind {kind!r}; expected one of {KINDS}")
    q = _require(doc, "q", int)
    if q < 3:
        raise ManifestError("q", "tree degree must be >= 3")
    doc.setdefault("seed", 0)
    _require(doc, "seed", int)
    doc.setdefault("realizations", 1)
    if _require(doc, "realizations", int) < 1:
        raise ManifestError("realizations", "must be >= 1")

    grid = _opt(doc, "grid", dict, {})
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ManifestError(f"grid.{key}", "grid entries must be non-empty lists")

    if kind in ("return_prob", "wiener", "green_moments", "blocks",
                "covariance", "diagram_q4"):
        _validate_coin(_require(doc, "coin", dict), q)
    if kind in ("return_prob", "wiener"):
        if _require(doc, "nmax", int) < 1:
            raise ManifestError("nmax", "must be >= 1")
    if kind in ("wiener", "green_moments"):
        ell = _opt(doc, "L", int, None)
        if ell is not None and (ell < 1 or ell % 2 == 0):
            raise ManifestError("L", "finite-volume radius must be odd and >= 1")
    if kind == "green_moments":
        _require(doc, "L", int)
        s = _require(doc, "s", (int, float))
        if not 0 < s < 1:
            raise ManifestError("s", "fractional exponent must lie in (0, 1)")
        z = _require(doc, "z", list)
        if len(z) != 2:
            raise ManifestError("z", "z must be [re, im]")
    if kind in ("lyapunov", "diagram_q3"):
        if q != 3:
            raise ManifestError("q", f"{kind} requires q=3")
        if "r" not in grid and "r" not in doc:
            raise ManifestError("grid.r", "need an r value or grid")
        doc.setdefault("n_matrices", 100_000)
        if _require(doc, "n_matrices", int) < 1000:
            raise ManifestError("n_matrices", "must be >= 1000")
    if kind == "covariance":
        doc.setdefault("translations", 20)
        doc.setdefault("radius", 2)
    if kind == "paths_audit":
        if q % 2 == 0:
            raise ManifestError("q", "paths_audit requires odd q")
        steps = _require(doc, "steps", list)
        for s in steps:
            if not isinstance(s, int) or s % 2 or s > 12:
                raise ManifestError("steps", "entries must be even integers <= 12")
    if kind == "blocks":
        doc.setdefault("radius", 3)
    return doc


def load(path: str) -> dict:
    if not os.path.exists(path):
        raise ManifestError(path, "manifest file not found")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(path, f"invalid JSON: {exc}") from None
    return validate(doc)
