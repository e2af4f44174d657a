"""Backend selection for the optimizer's inner bisection loop.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded. ``use_backend`` switches explicitly (tests and the
benchmark use it to compare the two).
"""

import importlib
import logging

log = logging.getLogger(__name__)

_BACKENDS = {
    "compiled": "robust_assort._kernels",
    "python": "robust_assort._kernels_py",
}

feasible_witness = None
bisect_opt = None
bisect_opt_many = None
BACKEND = None


def available_backends():
    out = []
    for name, modname in _BACKENDS.items():
        try:
            importlib.import_module(modname)
        except ImportError:
            continue
        out.append(name)
    return out


def load(name):
    """Import and return the kernel module for backend ``name``."""
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    return importlib.import_module(_BACKENDS[name])


def use_backend(name):
    global feasible_witness, bisect_opt, bisect_opt_many, BACKEND
    mod = load(name)
    feasible_witness = mod.feasible_witness
    bisect_opt = mod.bisect_opt
    bisect_opt_many = mod.bisect_opt_many
    BACKEND = name


try:
    use_backend("compiled")
except ImportError:
    log.debug("compiled kernels unavailable, using pure-Python fallback")
    use_backend("python")
