"""Discrete L2 norms by trapezoid quadrature."""
from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid

from .errors import ZeroDenominator


def l2_norm(values, *axes_nodes) -> float:
    """L2 norm of ``values`` sampled on a tensor grid given by ``axes_nodes``.

    The last axis of ``values`` pairs with the last node array, and so on.
    """
    sq = np.asarray(values, float) ** 2
    for nodes in reversed(axes_nodes):
        sq = trapezoid(sq, np.asarray(nodes, float), axis=-1)
    return float(np.sqrt(sq))


def relative_l2_error(a, b, *axes_nodes) -> float:
    """||a - b|| / ||b|| on a common grid."""
    denom = l2_norm(b, *axes_nodes)
    if denom == 0.0:
        raise ZeroDenominator("reference field has zero L2 norm")
    return l2_norm(np.asarray(a, float) - np.asarray(b, float), *axes_nodes) / denom
