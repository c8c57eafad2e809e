"""Backend selection: compiled core when available, NumPy fallback otherwise.

The QGSAGE_BACKEND environment variable ("compiled" or "python") pins
the choice; by default the compiled extension wins whenever its build
artifact imports cleanly. Both backends expose the same two functions
over the flat circuit plan:

* circuit_value(plan, theta, x) -> float
* circuit_value_and_grad(plan, theta, x) -> (value, dtheta, dx)
"""

from __future__ import annotations

import os

from . import _core_py

try:
    from . import _core_cy  # type: ignore[attr-defined]
except ImportError:
    _core_cy = None

BACKENDS = ("compiled", "python")


def have_compiled() -> bool:
    return _core_cy is not None


def active_backend() -> str:
    """Name of the backend picked when none is requested explicitly."""
    forced = os.environ.get("QGSAGE_BACKEND")
    if forced:
        if forced not in BACKENDS:
            raise ValueError(f"QGSAGE_BACKEND must be one of {BACKENDS}, got {forced!r}")
        return forced
    return "compiled" if have_compiled() else "python"


def get_backend(name: str | None = None):
    name = name or active_backend()
    if name == "python":
        return _core_py
    if name == "compiled":
        if _core_cy is None:
            raise RuntimeError(
                "compiled backend requested but the extension is not built; "
                "run pip install -e . --no-build-isolation with a C compiler available"
            )
        return _core_cy
    raise ValueError(f"unknown backend {name!r}, expected one of {BACKENDS}")


def circuit_value(plan, theta, x) -> float:
    return get_backend().circuit_value(plan, theta, x)


def circuit_value_and_grad(plan, theta, x):
    return get_backend().circuit_value_and_grad(plan, theta, x)
