"""cdyn: numerical potential theory for plane polynomial dynamics.

Escape-rate Green functions with certified error bounds, periodic point
solvers, critical-orbit machinery for the marked degree-d polynomial family,
and the separation/finiteness probes built on top of them.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
