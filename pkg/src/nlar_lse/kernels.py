"""Backend selection for the inner loops.

The compiled extension is used when it imports; otherwise the pure-Python
twin. ``NLAR_LSE_BACKEND=python`` forces the fallback.
"""
import os

from . import _pykernels

if os.environ.get("NLAR_LSE_BACKEND", "").lower() == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND

rls_update = _impl.rls_update
jacobi_eigenvalues = _impl.jacobi_eigenvalues
simulate_linear = _impl.simulate_linear
simulate_exar = _impl.simulate_exar
simulate_tar = _impl.simulate_tar

G_CODES = {"identity": 0, "one": 1, "square": 2, "abs": 3, "cube": 4}


def available_backends():
    mods = {"python": _pykernels}
    try:
        from . import _ckernels
        mods["cython"] = _ckernels
    except ImportError:
        pass
    return mods
