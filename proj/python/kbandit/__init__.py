"""Experimental design, robust IPS estimation, rounding and kernel bandits.

Thin python surface over the compiled core; see the project README for the
operation catalogue.
"""

import os
import sys

try:
    from ._kbandit import *  # noqa: F401,F403
    from ._kbandit import __doc__ as _core_doc  # noqa: F401
except ImportError:  # development layout: extension built by CMake out of tree
    _ext_dir = os.environ.get("KBANDIT_EXT_DIR")
    if _ext_dir:
        sys.path.insert(0, _ext_dir)
    from _kbandit import *  # noqa: F401,F403
