"""Temperature-dependent refractive index from bundled dispersion tables.

Tables live as plain-text key/value files under ``epstreak/data``; each one
declares its own wavelength/temperature validity window which is enforced on
every evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ValidityError


@dataclass(frozen=True)
class SellmeierTable:
    table_id: str
    version: int
    wavelength_min_nm: float
    wavelength_max_nm: float
    temperature_min_C: float
    temperature_max_C: float
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float
    n1: tuple  # dn/dT polynomial coefficients, powers of 1/lambda_um
    n2: tuple  # d2n/dT2 polynomial coefficients


def _parse_table(text: str) -> SellmeierTable:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    return SellmeierTable(
        table_id=kv["id"],
        version=int(kv["version"]),
        wavelength_min_nm=float(kv["wavelength_min_nm"]),
        wavelength_max_nm=float(kv["wavelength_max_nm"]),
        temperature_min_C=float(kv["temperature_min_C"]),
        temperature_max_C=float(kv["temperature_max_C"]),
        A=float(kv["A"]),
        B=float(kv["B"]),
        C=float(kv["C"]),
        D=float(kv["D"]),
        E=float(kv["E"]),
        F=float(kv["F"]),
        n1=tuple(float(kv[f"n1_{i}"]) for i in range(4)),
        n2=tuple(float(kv[f"n2_{i}"]) for i in range(4)),
    )


def _load_tables() -> dict:
    tables = {}
    pkg = resources.files(__package__) / "data"
    for entry in pkg.iterdir():
        if entry.name.startswith("sellmeier_") and entry.name.endswith(".txt"):
            table = _parse_table(entry.read_text())
            tables[table.table_id] = table
    return tables


TABLES = _load_tables()


def get_table(sellmeier_id: str) -> SellmeierTable:
    try:
        return TABLES[sellmeier_id]
    except KeyError:
        raise ValidityError(
            f"unknown sellmeier_id {sellmeier_id!r}; available: {sorted(TABLES)}"
        ) from None


def refractive_index(wavelength_nm, temperature_C, sellmeier_id="ktp-z"):
    """Refractive index n(lambda, T) for the named coefficient set.

    Accepts scalars or arrays for ``wavelength_nm``. Raises ValidityError if
    any wavelength or the temperature falls outside the table's declared
    window.
    """
    tab = get_table(sellmeier_id)
    lam_nm = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam_nm < tab.wavelength_min_nm) or np.any(lam_nm > tab.wavelength_max_nm):
        raise ValidityError(
            f"wavelength outside validity window "
            f"[{tab.wavelength_min_nm}, {tab.wavelength_max_nm}] nm of {sellmeier_id!r}"
        )
    if not (tab.temperature_min_C <= temperature_C <= tab.temperature_max_C):
        raise ValidityError(
            f"temperature {temperature_C} C outside validity window "
            f"[{tab.temperature_min_C}, {tab.temperature_max_C}] C of {sellmeier_id!r}"
        )
    lam = lam_nm * 1e-3  # um
    lam2 = lam * lam
    n2 = tab.A + tab.B / (1.0 - tab.C / lam2) + tab.D / (1.0 - tab.E / lam2) - tab.F * lam2
    n25 = np.sqrt(n2)
    inv = 1.0 / lam
    p1 = tab.n1[0] + tab.n1[1] * inv + tab.n1[2] * inv**2 + tab.n1[3] * inv**3
    p2 = tab.n2[0] + tab.n2[1] * inv + tab.n2[2] * inv**2 + tab.n2[3] * inv**3
    dT = temperature_C - 25.0
    n = n25 + p1 * dT + p2 * dT * dT
    if n.ndim == 0:
        return float(n)
    return n
