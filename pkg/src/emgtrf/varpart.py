"""Unique and shared explained variance of two feature families (A, P)."""

from __future__ import annotations

from dataclasses import dataclass

from .crossval import pearson_r


@dataclass(frozen=True)
class VariancePartition:
    r2_a: float
    r2_p: float
    r2_ap: float
    unique_a: float
    unique_p: float
    shared: float


def partition(r2_a: float, r2_p: float, r2_ap: float) -> VariancePartition:
    """Split the joint model's r^2. Negative components are kept as they are."""
    return VariancePartition(
        r2_a, r2_p, r2_ap,
        unique_a=r2_ap - r2_p,
        unique_p=r2_ap - r2_a,
        shared=r2_a + r2_p - r2_ap,
    )


def r_squared(pred, obs) -> float:
    """Square of the held-out Pearson correlation (not 1 - SSE/SST)."""
    return pearson_r(pred, obs) ** 2
