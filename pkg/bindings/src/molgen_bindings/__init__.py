"""Thin scripting bindings over the molgen kernels.

Everything here converts plain arrays and index lists at the boundary and
calls straight into the installed ``molgen`` package; no metric or sampler
logic is re-implemented, so results are numerically identical to the
primary implementation (bit-exact for its deterministic operations).
"""

import molgen as _molgen

from . import metrics, samplers  # noqa: F401
from .metrics import BoundMolecule  # noqa: F401

# the binding layer tracks the primary component's version exactly
__version__ = _molgen.__version__


def bind_metrics(name: str, *args, **kwargs):
    """Dispatch into the metrics namespace by name (scripting convenience)."""
    fn = getattr(metrics, name, None)
    if fn is None or name.startswith("_"):
        raise AttributeError(f"no bound metric named {name!r}")
    return fn(*args, **kwargs)


def bind_sampler(name: str, *args, **kwargs):
    """Dispatch into the samplers namespace by name (scripting convenience)."""
    fn = getattr(samplers, name, None)
    if fn is None or name.startswith("_"):
        raise AttributeError(f"no bound sampler named {name!r}")
    return fn(*args, **kwargs)
