"""Backend selection for the CSR kernels.

The compiled Cython module is preferred when it imported cleanly; the
NumPy implementation in ``pure`` is the fallback. Set the environment
variable ``FASTCLUSTER_BACKEND`` to ``python`` or ``cython`` before
import to force one explicitly. Both backends compute the same values
up to floating-point rounding; ``benchmarks/bench_backends.py``
compares their speed.
"""

from __future__ import annotations

import os

from . import pure

try:
    from . import _ckernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": pure}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}, available: {available_backends()}"
        ) from None


_forced = os.environ.get("FASTCLUSTER_BACKEND", "").strip().lower()
if _forced:
    _active = get_backend(_forced)
else:
    _active = _compiled if _compiled is not None else pure

ACTIVE_BACKEND = _active.NAME

csr_matvec = _active.csr_matvec
csr_matmat = _active.csr_matmat
csr_spmm = _active.csr_spmm
