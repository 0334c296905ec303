"""Backend selection.

Hot kernels are compiled with numba when it is importable. Setting
``BERNOULLI_DIFFUSE_BACKEND=numpy`` before import forces the pure-numpy path.
"""
import os

BACKEND_ENV = "BERNOULLI_DIFFUSE_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def requested_backend():
    value = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if value not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {value!r}")
    return value


BACKEND = "numba" if (HAVE_NUMBA and requested_backend() == "numba") else "numpy"
