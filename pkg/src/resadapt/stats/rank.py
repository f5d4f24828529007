"""Rank statistics: Kruskal-Wallis with tie correction, eta-squared, Pearson r."""

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .special import chi2_sf


@dataclass
class KwResult:
    h: float
    df: int
    p: float
    eta_squared: float | None
    k: int
    n: int


def _midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # positions i..j share ranks (i+1)..(j+1); assign the mean
        ranks[order[i:j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def kruskal_wallis(groups) -> KwResult:
    """Kruskal-Wallis H test across k groups of numeric samples.

    Mid-ranks are used for ties and H is divided by the standard tie
    correction; the p-value comes from the chi-square survival function
    with k-1 degrees of freedom.
    """
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    k = len(groups)
    if k < 2:
        raise ValidationError(f"Kruskal-Wallis needs at least 2 groups, got {k}")
    for i, g in enumerate(groups):
        if g.size == 0:
            raise ValidationError(f"group {i} is empty")
    pooled = np.concatenate(groups)
    n = pooled.size
    if np.all(pooled == pooled[0]):
        raise ValidationError("all observations identical: tie correction denominator is zero")

    ranks = _midranks(pooled)
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start:start + g.size]
        h += r.sum() ** 2 / g.size
        start += g.size
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)

    _, counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - float(np.sum(counts**3 - counts)) / (n**3 - n)
    h /= correction

    return KwResult(
        h=float(h),
        df=k - 1,
        p=chi2_sf(float(h), k - 1),
        eta_squared=eta_squared(float(h), k, n) if n > k else None,
        k=k,
        n=int(n),
    )


def eta_squared(h: float, k: int, n: int) -> float:
    """Effect size for a Kruskal-Wallis result: (H - k + 1) / (n - k)."""
    if k < 2:
        raise ValidationError(f"need at least 2 groups, got {k}")
    if n <= k:
        raise ValidationError(f"need more observations than groups (n={n}, k={k})")
    return (h - k + 1.0) / (n - k)


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("series must be 1-D and equally long")
    if x.size < 2:
        raise ValidationError("need at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("correlation undefined for a constant series")
    r = float(np.sum(dx * dy)) / (sx * sy)
    return max(-1.0, min(1.0, r))
