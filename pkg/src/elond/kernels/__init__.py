"""Hot loops behind the procedures and the simulation lab.

The compiled backend (``_ckernels``) is used when it was built; otherwise,
or when ``ELOND_PURE_PYTHON`` is set to a non-empty value, the pure-Python
twin in ``_pykernels`` is used. Both return bit-identical results.
"""
import os

from . import _pykernels

ELOND = _pykernels.ELOND
LOND = _pykernels.LOND
RLOND_BY = _pykernels.RLOND_BY
URLOND_BY = _pykernels.URLOND_BY

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_NAMES = ("lond_family_run", "lordstar_run", "coupled_stopping", "wcs_evalues")


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_module(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("the Cython kernels are not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def use_backend(name):
    """Switch the module-level kernel functions to ``name``."""
    global BACKEND
    mod = get_module(name)
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(mod, fn)
    BACKEND = name


BACKEND = "python"
use_backend("cython" if _ckernels is not None and not os.environ.get("ELOND_PURE_PYTHON") else "python")
