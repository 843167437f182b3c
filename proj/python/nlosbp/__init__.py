"""Transient NLOS back-projection: Python bindings for the C++ core."""

try:
    from ._nlosbp import *  # noqa: F401,F403
    from ._nlosbp import __doc__  # noqa: F401
except ImportError:  # in-tree builds keep the extension next to this package
    from _nlosbp import *  # noqa: F401,F403
