"""Kernel backend selection.

Hot inner loops (Eikonal sweeps, semi-Lagrangian node scans, particle
stepping) ship in two flavours: a numba ``@njit`` version and a pure-numpy
vectorized fallback.  The active flavour is picked from the environment
variable ``ADJOINT_FP_BACKEND``:

    auto   use numba when importable (default)
    numba  require numba, raise if missing
    numpy  force the pure-numpy path

``ADJOINT_FP_THREADS`` caps numba's internal thread pool.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

_VALID = ("auto", "numba", "numpy")
_requested = os.environ.get("ADJOINT_FP_BACKEND", "auto").strip().lower()
if _requested not in _VALID:
    raise RuntimeError(
        f"ADJOINT_FP_BACKEND must be one of {_VALID}, got {_requested!r}"
    )
if _requested == "numba" and not _HAVE_NUMBA:
    raise RuntimeError("ADJOINT_FP_BACKEND=numba but numba is not importable")

_active = "numpy" if (_requested == "numpy" or not _HAVE_NUMBA) else "numba"

_threads = os.environ.get("ADJOINT_FP_THREADS")
if _threads and _HAVE_NUMBA:
    try:
        numba.set_num_threads(max(1, int(_threads)))
    except ValueError:
        raise RuntimeError(f"ADJOINT_FP_THREADS must be an integer, got {_threads!r}")


def use_numba() -> bool:
    """True when numba kernels are the active implementation."""
    return _active == "numba"


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    """Override the backend at runtime (used by tests and the benchmark)."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"backend must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name


def njit(*args, **kwargs):
    """numba.njit passthrough; kernels decorated with this are always
    compiled when numba is importable, dispatch happens at call sites."""
    if not _HAVE_NUMBA:  # pragma: no cover
        def identity(fn):
            return fn

        return identity if not args else args[0]
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
