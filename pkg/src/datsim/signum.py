"""Componentwise signum with optional boundary-layer smoothing.

This lives in its own module so both the plain-numpy controller functions
and the compiled kernels share one definition.
"""

import numpy as np


def sgn_policy(z, eps=0.0):
    """Componentwise signum of ``z``; ``sgn(0) = 0``.

    With ``eps > 0`` the hard switch is replaced by the boundary-layer
    approximation ``z / (|z| + eps)``, which suppresses chattering in
    discrete time at the cost of a steady offset inside the layer.
    """
    if eps == 0.0:
        return np.sign(z)
    return z / (np.abs(z) + eps)
