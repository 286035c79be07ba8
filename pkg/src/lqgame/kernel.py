"""Selects the episode kernel: compiled if importable, numpy otherwise.

Set ``LQGAME_KERNEL=python`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _kernel_py

BACKEND = "python"
simulate_kernel = _kernel_py.simulate_kernel

if os.environ.get("LQGAME_KERNEL", "").lower() != "python":
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        simulate_kernel = _compiled.simulate_kernel
