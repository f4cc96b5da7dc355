"""Persistence-diagram descriptors and per-landslide feature vectors.

Nine descriptor families are evaluated per homology dimension: entropy
(PE), average lifetime (AL), pair count (NP), Betti-curve norm (BC),
landscape norm (LS), Wasserstein amplitude (WA), bottleneck amplitude
(BA), heat-kernel norm (HK), and persistence-image norm (PI). Dimension
suffixes: `_C` for connected components (H0), `_H` for holes (H1).

Every descriptor of an empty diagram is 0, so feature tables stay total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .persistence import PersistenceDiagram

_FAMILIES = ("PE", "AL", "NP", "BC", "LS", "WA", "BA", "HK", "PI")
_DIM_SUFFIX = {0: "C", 1: "H"}

#: Canonical feature-table column order: family-major, components then holes.
TOPO_FEATURE_NAMES = tuple(
    f"{fam}_{_DIM_SUFFIX[d]}" for fam in _FAMILIES for d in (0, 1)
)

#: The six descriptors the selection pipeline converges on.
SELECTED_SIX = ("AL_H", "AL_C", "BC_C", "BC_H", "WA_H", "BA_H")


@dataclass(frozen=True)
class CurveGrid:
    """Uniform sampling grid for curve-valued descriptors."""

    lo: float
    hi: float
    bins: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError("grid requires lo < hi")
        if self.bins < 2:
            raise ValidationError("grid requires at least 2 bins")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.bins) + 0.5) * self.width


@dataclass(frozen=True)
class FeatureConfig:
    curve_bins: int = 100
    sigma_rule: str = "cap/20"
    landscape_layer: int = 1


def resolve_sigma(rule: str, cap: float) -> float:
    """Parse a sigma rule: `cap/<divisor>` or an absolute value in meters."""
    rule = rule.strip().lower()
    if rule.startswith("cap/"):
        return cap / float(rule[4:])
    return float(rule)


# ---------------------------------------------------------------------------
# Lifetime-vector descriptors
# ---------------------------------------------------------------------------


def lifetime_vector(diagram: PersistenceDiagram, dim: int) -> np.ndarray:
    """Lifetimes (death - birth) of all pairs in one dimension."""
    return diagram.lifetimes(dim)


def lifetime_statistics(lifetimes: np.ndarray) -> dict[str, float]:
    """Count, mean, and Shannon entropy of a lifetime vector.

    Entropy uses p_i = l_i / sum(l); empty and single-element vectors
    (and all-zero vectors) have entropy 0.
    """
    l = np.asarray(lifetimes, dtype=np.float64)
    count = len(l)
    if count == 0:
        return {"count": 0.0, "average": 0.0, "entropy": 0.0}
    total = float(l.sum())
    if total <= 0:
        return {"count": float(count), "average": float(l.mean()), "entropy": 0.0}
    p = l / total
    p = p[p > 0]
    entropy = float(-(p * np.log(p)).sum())
    return {"count": float(count), "average": float(l.mean()), "entropy": entropy}


def amplitude(lifetimes: np.ndarray, kind: str) -> float:
    """Wasserstein (Euclidean norm) or bottleneck (max) amplitude."""
    l = np.asarray(lifetimes, dtype=np.float64)
    if len(l) == 0:
        return 0.0
    if kind == "wasserstein":
        return float(np.sqrt((l * l).sum()))
    if kind == "bottleneck":
        return float(l.max())
    raise ValidationError(f"unknown amplitude kind {kind!r}")


# ---------------------------------------------------------------------------
# Curve descriptors
# ---------------------------------------------------------------------------


def betti_curve(diagram: PersistenceDiagram, dim: int, grid: CurveGrid) -> np.ndarray:
    """Number of pairs alive (birth < eps < death) at each bin center."""
    pairs = diagram.pairs_in_dim(dim)
    eps = grid.centers()
    if len(pairs) == 0:
        return np.zeros(grid.bins)
    alive = (pairs[:, 0:1] < eps[None, :]) & (eps[None, :] < pairs[:, 1:2])
    return alive.sum(axis=0).astype(np.float64)


def betti_feature(diagram: PersistenceDiagram, dim: int, grid: CurveGrid) -> float:
    """Discrete 2-norm of the Betti curve: sqrt(sum B(eps)^2 * d_eps)."""
    curve = betti_curve(diagram, dim, grid)
    return float(np.sqrt((curve * curve).sum() * grid.width))


def landscape_curve(
    diagram: PersistenceDiagram, dim: int, k: int, grid: CurveGrid
) -> np.ndarray:
    """k-th persistence landscape layer sampled at bin centers."""
    if k < 1:
        raise ValidationError("landscape layer k must be >= 1")
    pairs = diagram.pairs_in_dim(dim)
    eps = grid.centers()
    if len(pairs) < k:
        return np.zeros(grid.bins)
    tents = np.minimum(
        eps[None, :] - pairs[:, 0:1], pairs[:, 1:2] - eps[None, :]
    )
    np.clip(tents, 0.0, None, out=tents)
    # k-th largest per column
    part = np.partition(tents, len(pairs) - k, axis=0)
    return part[len(pairs) - k]


def landscape_feature(
    diagram: PersistenceDiagram, dim: int, k: int, grid: CurveGrid
) -> float:
    curve = landscape_curve(diagram, dim, k, grid)
    return float(np.sqrt((curve * curve).sum() * grid.width))


# ---------------------------------------------------------------------------
# 2D kernel descriptors
# ---------------------------------------------------------------------------


def _gaussian_profile(centers: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    z = (centers - mu) / sigma
    return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def heat_surface(
    diagram: PersistenceDiagram, dim: int, sigma: float, bins: int
) -> np.ndarray:
    """Heat-kernel function on [0, cap]^2: Gaussians at (b, d) minus their
    mirror images at (d, b), making the surface antisymmetric about the
    diagonal."""
    pairs = diagram.pairs_in_dim(dim)
    grid = CurveGrid(0.0, diagram.cap, bins)
    centers = grid.centers()
    surface = np.zeros((bins, bins))
    for b, d in pairs:
        gx = _gaussian_profile(centers, b, sigma)
        gy = _gaussian_profile(centers, d, sigma)
        surface += np.outer(gx, gy)
        surface -= np.outer(gy, gx)
    return surface


def heat_feature(
    diagram: PersistenceDiagram, dim: int, sigma: float, bins: int = 100
) -> float:
    """Discrete 2-norm of the heat surface, scaled by cell area."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    if diagram.cap <= 0 or len(diagram.pairs_in_dim(dim)) == 0:
        return 0.0
    surface = heat_surface(diagram, dim, sigma, bins)
    cell = (diagram.cap / bins) ** 2
    return float(np.sqrt((surface * surface).sum() * cell))


def image_surface(
    diagram: PersistenceDiagram, dim: int, sigma: float, bins: int
) -> np.ndarray:
    """Weighted Gaussian density on the birth-persistence plane [0, cap]^2.

    Each pair contributes at (birth, lifetime) with linear weight
    lifetime / max(lifetime) over the pairs of this dimension.
    """
    pairs = diagram.pairs_in_dim(dim)
    grid = CurveGrid(0.0, diagram.cap, bins)
    centers = grid.centers()
    surface = np.zeros((bins, bins))
    lifetimes = pairs[:, 1] - pairs[:, 0]
    max_l = lifetimes.max() if len(lifetimes) else 0.0
    if max_l <= 0:
        return surface
    for (b, _), l in zip(pairs, lifetimes):
        gx = _gaussian_profile(centers, b, sigma)
        gy = _gaussian_profile(centers, l, sigma)
        surface += (l / max_l) * np.outer(gx, gy)
    return surface


def image_feature(
    diagram: PersistenceDiagram, dim: int, sigma: float, bins: int = 100
) -> float:
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    if diagram.cap <= 0 or len(diagram.pairs_in_dim(dim)) == 0:
        return 0.0
    surface = image_surface(diagram, dim, sigma, bins)
    cell = (diagram.cap / bins) ** 2
    return float(np.sqrt((surface * surface).sum() * cell))


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def featurize(
    diagram: PersistenceDiagram, config: FeatureConfig = FeatureConfig()
) -> dict[str, float]:
    """All 18 topological descriptors of one diagram, in canonical order."""
    cap = diagram.cap
    sigma = resolve_sigma(config.sigma_rule, cap) if cap > 0 else 1.0
    grid = CurveGrid(0.0, cap, config.curve_bins) if cap > 0 else None

    values: dict[str, float] = {}
    for dim in (0, 1):
        suffix = _DIM_SUFFIX[dim]
        stats = lifetime_statistics(lifetime_vector(diagram, dim))
        values[f"PE_{suffix}"] = stats["entropy"]
        values[f"AL_{suffix}"] = stats["average"]
        values[f"NP_{suffix}"] = stats["count"]
        if grid is None:
            values[f"BC_{suffix}"] = 0.0
            values[f"LS_{suffix}"] = 0.0
        else:
            values[f"BC_{suffix}"] = betti_feature(diagram, dim, grid)
            values[f"LS_{suffix}"] = landscape_feature(
                diagram, dim, config.landscape_layer, grid
            )
        lifetimes = lifetime_vector(diagram, dim)
        values[f"WA_{suffix}"] = amplitude(lifetimes, "wasserstein")
        values[f"BA_{suffix}"] = amplitude(lifetimes, "bottleneck")
        if grid is None:
            values[f"HK_{suffix}"] = 0.0
            values[f"PI_{suffix}"] = 0.0
        else:
            values[f"HK_{suffix}"] = heat_feature(diagram, dim, sigma, config.curve_bins)
            values[f"PI_{suffix}"] = image_feature(diagram, dim, sigma, config.curve_bins)
    return {name: values[name] for name in TOPO_FEATURE_NAMES}
