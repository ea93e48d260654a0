"""Central numerical tolerances.

No other module hard-codes a tolerance: they read :func:`current`.  Experiment
configs may override fields for the duration of a run via :func:`override`.
"""
from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-10        # hermiticity, trace, norm, orthonormality
    spectral: float = 1e-8          # eigen-reconstruction, relative max-norm
    unitarity: float = 1e-9         # U^dagger U - I
    decomposition: float = 1e-9     # macrospace orthogonality / identity resolution
    shell_edge: float = 1e-12       # closed energy-window boundaries
    node_relative: float = 1e-12    # velocity zeroed below this * max diag
    slice_norm: float = 1e-12       # conditional slices
    degenerate_density: float = 1e-14
    collapse_retries: int = 100
    macro_delta: float = 0.1        # assigned iff max p_nu > 1 - delta
    significance: float = 0.01
    tv_threshold: float = 0.05
    speed_cap_factor: float = 10.0
    dimension_cap: int = 4096


DEFAULT = Tolerances()
_active: contextvars.ContextVar[Tolerances] = contextvars.ContextVar("tolerances", default=DEFAULT)


def current() -> Tolerances:
    return _active.get()


@contextlib.contextmanager
def override(**changes):
    """Temporarily replace tolerance fields, e.g. ``override(tv_threshold=0.02)``."""
    unknown = set(changes) - {f.name for f in dataclasses.fields(Tolerances)}
    if unknown:
        raise KeyError(f"unknown tolerance fields: {sorted(unknown)}")
    token = _active.set(dataclasses.replace(_active.get(), **changes))
    try:
        yield _active.get()
    finally:
        _active.reset(token)
