"""Backend selection for hot kernels.

The compiled extension is used when importable; set ``EXACTSEM_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _energy_py

if os.environ.get("EXACTSEM_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _energy as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
permutation_energy = (_compiled or _energy_py).permutation_energy
permutation_labels = (_compiled or _energy_py).permutation_labels
