"""Element kernel backend selection.

The hot per-iteration work (element loops for the degraded elastic terms,
the damage gradient term and pointwise scalar integrands) is implemented
twice: a vectorized numpy fallback and a compiled Cython extension.  The
compiled one is used when importable; set KVDAMAGE_KERNELS=python or
=compiled to force a backend.
"""

import os

_requested = os.environ.get("KVDAMAGE_KERNELS", "auto")

if _requested not in ("auto", "compiled", "python"):
    raise RuntimeError(
        f"KVDAMAGE_KERNELS must be auto, compiled or python, got {_requested!r}"
    )

if _requested in ("auto", "compiled"):
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        from . import python as _impl
        BACKEND = "python"
else:
    from . import python as _impl
    BACKEND = "python"

elastic_terms = _impl.elastic_terms
plap_terms = _impl.plap_terms
scalar_field_terms = _impl.scalar_field_terms
