"""Engine selection: compiled event loop when available, pure Python otherwise.

The default is resolved once at import: the compiled extension if it
built, else the pure-Python fallback. Override per call via
simulate(..., engine="python"|"cython") or globally with the
PACKETGRAPH_ENGINE environment variable ("python", "cython", "auto").
"""

from __future__ import annotations

import os
from typing import Optional

from . import _engine_py
from .errors import SimulationError

try:
    from . import _simcore
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - build-environment dependent
    _simcore = None
    HAVE_COMPILED = False


def _env_choice() -> str:
    return os.environ.get("PACKETGRAPH_ENGINE", "auto").lower()


def default_engine() -> str:
    choice = _env_choice()
    if choice in ("auto", ""):
        return "cython" if HAVE_COMPILED else "python"
    return choice


def run_engine(setup: dict, engine: Optional[str] = None) -> tuple[dict, str]:
    name = (engine or default_engine()).lower()
    if name == "cython":
        if not HAVE_COMPILED:
            raise SimulationError(
                "compiled engine requested but packetgraph._simcore is not built"
            )
        return _simcore.run_simulation(setup), "cython"
    if name == "python":
        return _engine_py.run_simulation(setup), "python"
    raise SimulationError(f"unknown engine {name!r} (use 'python' or 'cython')")
