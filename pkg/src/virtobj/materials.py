"""Material labels and their elastic and damping parameters.

The shipped table holds typical handbook-level values for the seven material
categories. They are defaults of this package only and may be shadowed
field-by-field with a plain-text override file::

    # comments and blank lines are ignored
    wood.youngs_modulus = 1.2e10
    wood.rayleigh_alpha = 40
    bronze.density = 8800        # new materials must set all five fields
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace


class MaterialError(ValueError):
    """Unknown material or invalid parameter values."""


class OverrideParseError(MaterialError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class MaterialRecord:
    name: str
    density: float  # kg/m^3
    youngs_modulus: float  # Pa
    poisson_ratio: float
    rayleigh_alpha: float  # 1/s
    rayleigh_beta: float  # s

    def validate(self) -> "MaterialRecord":
        vals = (self.density, self.youngs_modulus, self.poisson_ratio,
                self.rayleigh_alpha, self.rayleigh_beta)
        if not all(math.isfinite(v) for v in vals):
            raise MaterialError(f"{self.name}: parameters must be finite")
        if self.density <= 0:
            raise MaterialError(f"{self.name}: density must be > 0")
        if self.youngs_modulus <= 0:
            raise MaterialError(f"{self.name}: youngs_modulus must be > 0")
        if not 0.0 < self.poisson_ratio < 0.5:
            raise MaterialError(f"{self.name}: poisson_ratio must lie in (0, 0.5)")
        if self.rayleigh_alpha < 0:
            raise MaterialError(f"{self.name}: rayleigh_alpha must be >= 0")
        if self.rayleigh_beta < 0:
            raise MaterialError(f"{self.name}: rayleigh_beta must be >= 0")
        return self


FIELDS = tuple(f.name for f in fields(MaterialRecord) if f.name != "name")

DEFAULTS = {
    "ceramic": MaterialRecord("ceramic", 2700.0, 7.2e10, 0.19, 6.0, 1e-7),
    "glass": MaterialRecord("glass", 2600.0, 6.2e10, 0.20, 1.0, 1e-7),
    "wood": MaterialRecord("wood", 750.0, 1.1e10, 0.25, 60.0, 2e-6),
    "plastic": MaterialRecord("plastic", 1070.0, 1.4e9, 0.35, 30.0, 1e-6),
    "iron": MaterialRecord("iron", 7870.0, 2.1e11, 0.28, 5.0, 3e-8),
    "polycarbonate": MaterialRecord("polycarbonate", 1190.0, 2.4e9, 0.37, 0.5, 4e-7),
    "steel": MaterialRecord("steel", 7850.0, 2.0e11, 0.29, 5.0, 3e-8),
}

for _rec in DEFAULTS.values():
    _rec.validate()


def parse_overrides(text: str, path=None) -> dict:
    """Parse ``material.field = value`` lines into ``{material: {field: value}}``."""
    out: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise OverrideParseError("expected 'material.field = value'", path, line_no)
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise OverrideParseError(f"bad key {key!r}", path, line_no)
        mat, fld = (s.strip() for s in key.split("."))
        if not mat:
            raise OverrideParseError("empty material name", path, line_no)
        if fld not in FIELDS:
            raise OverrideParseError(
                f"unknown field {fld!r} (expected one of {', '.join(FIELDS)})", path, line_no
            )
        try:
            num = float(value)
        except ValueError:
            raise OverrideParseError(f"value {value!r} is not a number", path, line_no) from None
        out.setdefault(mat.lower(), {})[fld] = num
    return out


def load_overrides(path) -> dict:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise MaterialError(f"cannot read override file {path}: {exc.strerror}") from exc
    return parse_overrides(text, path)


def lookup(name: str, overrides: dict | None = None) -> MaterialRecord:
    """Material record for ``name`` with optional overrides applied."""
    key = name.strip().lower()
    extra = (overrides or {}).get(key)
    base = DEFAULTS.get(key)
    if base is None:
        if not extra:
            known = ", ".join(sorted(DEFAULTS))
            raise MaterialError(f"unknown material {name!r} (known: {known})")
        missing = [f for f in FIELDS if f not in extra]
        if missing:
            raise MaterialError(f"{key}: new material must define {', '.join(missing)}")
        return MaterialRecord(key, **{f: extra[f] for f in FIELDS}).validate()
    if extra:
        return replace(base, **extra).validate()
    return base
