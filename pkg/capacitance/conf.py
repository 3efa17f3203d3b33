from __future__ import annotations

from django.conf import settings

from .constants import EPSILON_0

DEFAULTS = {
    "EPSILON_0": EPSILON_0,
    "MEMORY_CAP_GIB": 4.0,
    "ASSEMBLY_CHUNK_PAIRS": 65536,
    "ASSEMBLY_WORKERS": 1,
    "KERNEL_DTYPE": "longdouble",
    "OUTPUT_DIR": "runs",
    "QUADRATURE": {"points": 4, "max_levels": 5, "tolerance": 1e-12},
    "MONTE_CARLO": {"samples": 200_000, "block": 50_000},
    "VERIFY_TRIALS": 200,
}


def solver_setting(name: str):
    """Read a key of ``settings.CAPACITANCE``, falling back to DEFAULTS.

    Works without a configured settings module so the numerical modules stay
    importable from plain scripts.
    """
    if settings.configured:
        overrides = getattr(settings, "CAPACITANCE", {}) or {}
    else:
        overrides = {}
    if name in overrides:
        value = overrides[name]
        default = DEFAULTS.get(name)
        if isinstance(default, dict) and isinstance(value, dict):
            return {**default, **value}
        return value
    return DEFAULTS[name]
