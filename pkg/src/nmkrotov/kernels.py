"""Backend selection for the propagation kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise (or when
``NMKROTOV_PURE_PYTHON=1``) the numpy implementation in ``_pykernels`` is used.
"""
import os

from . import _pykernels

python = _pykernels
compiled = None

if os.environ.get("NMKROTOV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

step_matrices = _impl.step_matrices
chain_forward = _impl.chain_forward
chain_backward = _impl.chain_backward
forward = _impl.forward
backward = _impl.backward
krotov_sweep = _impl.krotov_sweep
