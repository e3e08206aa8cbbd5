"""Relative error metrics and observed convergence orders."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateInputError


def compute_errors(values, reference) -> tuple[float, float]:
    """``(err2, err_inf)`` of values along the computed trajectory against the
    reference values.

    ``err2`` is the ratio of the sums of squares, with no square root taken.
    """
    V = np.asarray(values, dtype=float)
    v = np.asarray(reference, dtype=float)
    if V.shape != v.shape:
        raise ValueError("value sequences differ in length")
    ref2 = np.sum(v**2)
    ref_inf = np.max(np.abs(v)) if v.size else 0.0
    if not ref2 > 0 or not ref_inf > 0:
        raise DegenerateInputError("reference values vanish identically")
    diff = np.abs(V - v)
    return float(np.sum(diff**2) / ref2), float(np.max(diff) / ref_inf)


def convergence_order(err_coarse: float, err_fine: float) -> float | None:
    """``log2(err_coarse / err_fine)``; ``None`` when either error is not positive."""
    if not (err_coarse > 0 and err_fine > 0):
        return None
    return math.log2(err_coarse / err_fine)
