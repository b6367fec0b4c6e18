"""Backend selection for the assembly kernels.

The compiled module ``dmpfem._kernels`` is used when it was built; otherwise the
numpy implementation in ``dmpfem._kernels_py`` takes over. Setting
``DMP_FEM_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("DMP_FEM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

element_arrays = _impl.element_arrays
csr_from_triplets = _impl.csr_from_triplets


def available_backends():
    """Map backend name -> kernel module for every backend importable here."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
