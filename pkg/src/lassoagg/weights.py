"""Combinatorial prior weights over supports, computed in log-space.

A support of size k receives weight 1 / (H_p * C(p, k) * e^k) with
H_p = (e - e^{-p}) / (e - 1).  Only log(1/weight) is ever consumed
downstream; the weights themselves underflow for moderate p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import InvalidInputError


def log_hp(p: int) -> float:
    return math.log((math.e - math.exp(-p)) / (math.e - 1.0))


def log_binomial(p: int, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return gammaln(p + 1) - gammaln(k + 1) - gammaln(p - k + 1)


def log_inv_weight(p: int, k: int) -> float:
    """log(1/weight) for any support of size k: log H_p + log C(p,k) + k."""
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    if not 0 <= k <= p:
        raise InvalidInputError(f"support size k={k} out of range [0, {p}]")
    return float(log_hp(p) + log_binomial(p, k) + k)


@dataclass(frozen=True)
class WeightTable:
    p: int
    log_H_p: float
    log_inv_weight_by_size: np.ndarray  # entry k = log(1/weight) for |T| = k


def weight_table(p: int) -> WeightTable:
    if p < 1:
        raise InvalidInputError("p must be >= 1")
    ks = np.arange(p + 1)
    table = log_hp(p) + log_binomial(p, ks) + ks
    table.setflags(write=False)
    return WeightTable(p=p, log_H_p=log_hp(p), log_inv_weight_by_size=table)


def verify_weight_bounds(p: int) -> bool:
    """Check k <= log(1/weight) <= 1/2 + 2k*log(ep/(k v 1)) for k = 0..p."""
    if not 1 <= p <= 64:
        raise InvalidInputError("verify_weight_bounds is a test utility for 1 <= p <= 64")
    for k in range(p + 1):
        w = log_inv_weight(p, k)
        upper = 0.5 + 2.0 * k * math.log(math.e * p / max(k, 1))
        if not (k <= w <= upper):
            return False
    return True


def total_mass(p: int) -> float:
    """Sum over all supports of their weights; equals 1 by construction."""
    if not 1 <= p <= 30:
        raise InvalidInputError("total_mass is a test utility for 1 <= p <= 30")
    ks = np.arange(p + 1)
    tbl = weight_table(p).log_inv_weight_by_size
    # C(p,k) supports of size k, each of weight exp(-log_inv_weight).
    return float(np.exp(logsumexp(log_binomial(p, ks) - tbl)))
