"""Integrator kernel selection: compiled extension if present, numpy otherwise."""

from . import _lindblad_py

try:
    from . import _lindblad_cy

    _impl = _lindblad_cy
    BACKEND = "cython"
except ImportError:
    _impl = _lindblad_py
    BACKEND = "python"

propagate = _impl.propagate

# Always exported from the numpy module; the compiled kernel only accelerates
# the structured batched propagation.
dopri5 = _lindblad_py.dopri5
rk4 = _lindblad_py.rk4
make_structured_rhs = _lindblad_py.make_structured_rhs


def available_backends() -> dict:
    """Name -> propagate callable, for the kernel benchmark and tests."""
    out = {"python": _lindblad_py.propagate}
    if BACKEND == "cython":
        out["cython"] = _impl.propagate
    return out
