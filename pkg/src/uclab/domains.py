"""Compact convex feasible sets: exact projection, norm bounds, covering nets.

Two set kinds are supported, axis-aligned boxes and Euclidean balls. All
operations accept a single point of shape ``(d,)`` or a batch of shape
``(k, d)`` and return arrays of the same shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError, CapacityError

DEFAULT_NET_CAP = 10**7
DEDUP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    """A box ``[lower, upper]`` or a ball ``{x : ||x - center|| <= radius}``."""

    kind: str
    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ArgumentError(f"dimension must be positive, got {self.dim}")
        if self.kind == "box":
            lo = np.asarray(self.lower, dtype=float).reshape(-1)
            hi = np.asarray(self.upper, dtype=float).reshape(-1)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ArgumentError("box bounds must have one entry per dimension")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ArgumentError("box bounds must be finite")
            if np.any(lo >= hi):
                raise ArgumentError("box requires lower[i] < upper[i] for every i")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind == "ball":
            c = np.asarray(self.center, dtype=float).reshape(-1)
            if c.shape != (self.dim,) or not np.all(np.isfinite(c)):
                raise ArgumentError("ball center must be a finite vector of length dim")
            if self.radius is None or not (float(self.radius) > 0) or not math.isfinite(self.radius):
                raise ArgumentError(f"ball radius must be positive and finite, got {self.radius}")
            c.setflags(write=False)
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ArgumentError(f"unknown domain kind {self.kind!r}")

    # constructors -------------------------------------------------------

    @classmethod
    def box(cls, lower, upper) -> "ConvexDomain":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls("box", lower.size, lower=lower, upper=upper)

    @classmethod
    def cube(cls, dim: int, half_width: float) -> "ConvexDomain":
        """The box ``[-half_width, half_width]^dim``."""
        return cls.box(np.full(dim, -float(half_width)), np.full(dim, float(half_width)))

    @classmethod
    def ball(cls, center, radius: float) -> "ConvexDomain":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls("ball", center.size, center=center, radius=radius)

    @classmethod
    def from_dict(cls, spec: dict) -> "ConvexDomain":
        if spec["kind"] == "box":
            return cls.box(spec["lower"], spec["upper"])
        return cls.ball(spec["center"], spec["radius"])

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}

    # geometry -----------------------------------------------------------

    def _check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.ndim == 0 or p.shape[-1] != self.dim:
            raise ArgumentError(
                f"point has dimension {p.shape[-1] if p.ndim else 0}, domain has {self.dim}")
        return p

    def project(self, p) -> np.ndarray:
        """Euclidean projection onto the set (clamp for boxes, radial scaling for balls)."""
        p = self._check(p)
        if self.kind == "box":
            return np.clip(p, self.lower, self.upper)
        diff = p - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = self.radius / np.maximum(norm, self.radius)
        return self.center + diff * scale

    def contains(self, p, atol: float = 1e-12) -> np.ndarray:
        p = self._check(p)
        if self.kind == "box":
            return np.all((p >= self.lower - atol) & (p <= self.upper + atol), axis=-1)
        return np.linalg.norm(p - self.center, axis=-1) <= self.radius + atol

    def squared_bound(self) -> float:
        """``sup ||x||^2`` over the set."""
        if self.kind == "box":
            corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
            return float(corner @ corner)
        return (float(np.linalg.norm(self.center)) + self.radius) ** 2

    def diameter(self) -> float:
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        return 2.0 * self.radius

    def bounding_box(self) -> "ConvexDomain":
        if self.kind == "box":
            return self
        return ConvexDomain.box(self.center - self.radius, self.center + self.radius)

    def sample_uniform(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Uniform draws from the set (used for probes and property checks)."""
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper, size=(size, self.dim))
        direction = rng.standard_normal((size, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = self.radius * rng.random(size) ** (1.0 / self.dim)
        return self.center + direction * r[:, None]


def project(domain: ConvexDomain, p) -> np.ndarray:
    return domain.project(p)


def squared_bound(domain: ConvexDomain) -> float:
    return domain.squared_bound()


@dataclass(frozen=True, eq=False)
class CoveringNet:
    """Finite point set such that every point of the parent domain lies
    within ``radius`` of some member."""

    points: np.ndarray
    radius: float
    domain: ConvexDomain
    approximate: bool = False

    @property
    def count(self) -> int:
        return int(self.points.shape[0])

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index"] + [f"x_{j}" for j in range(d)])
            for i, row in enumerate(self.points):
                writer.writerow([i] + [format(float(v), ".17g") for v in row])


def grid_counts(widths, radius: float) -> np.ndarray:
    """Per-axis cell counts for a grid whose cell half-diagonal is at most ``radius``."""
    widths = np.asarray(widths, dtype=float)
    d = widths.size
    spacing = 2.0 * radius / math.sqrt(d)
    # guard against ceil(2.0000000001) style rounding on exact multiples
    return np.maximum(1, np.ceil(widths / spacing - 1e-12)).astype(int)


def net_size(domain: ConvexDomain, radius: float) -> int:
    """Number of grid points ``covering_net`` would generate before deduplication."""
    if not radius > 0:
        raise ArgumentError(f"net radius must be positive, got {radius}")
    box = domain.bounding_box()
    return math.prod(int(m) for m in grid_counts(box.upper - box.lower, radius))


def covering_net(domain: ConvexDomain, radius: float, cap: int = DEFAULT_NET_CAP) -> CoveringNet:
    """Axis-aligned cell-center grid with 2-norm covering radius ``<= radius``.

    Per axis the cell width is at most ``2 * radius / sqrt(d)``, so the cell
    half-diagonal, which bounds the distance from any point to its cell
    center, is at most ``radius``. Ball domains use the grid of the bounding
    box, projected onto the ball; projection is non-expansive so coverage is
    preserved. Near-duplicate projected points are merged.

    Raises
    ------
    CapacityError
        If the grid would contain more than ``cap`` points.
    """
    q = net_size(domain, radius)
    if q > cap:
        raise CapacityError(q, cap)
    box = domain.bounding_box()
    counts = grid_counts(box.upper - box.lower, radius)
    axes = []
    for lo, hi, m in zip(box.lower, box.upper, counts):
        h = (hi - lo) / m
        axes.append(lo + h * (np.arange(m) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.reshape(-1) for g in mesh], axis=1)
    if domain.kind == "ball":
        points = _dedupe(domain.project(points))
    points.setflags(write=False)
    return CoveringNet(points=points, radius=float(radius), domain=domain)


def subsampled_net(domain: ConvexDomain, count: int, seed: int) -> CoveringNet:
    """Seeded uniform point set standing in for a net when the exact grid is too large.

    Carries no covering guarantee; ``approximate`` is set so reports flag it.
    """
    if count < 1:
        raise ArgumentError("net_subsample must be a positive count")
    rng = np.random.default_rng(seed)
    points = domain.sample_uniform(rng, count)
    points.setflags(write=False)
    return CoveringNet(points=points, radius=float("nan"), domain=domain, approximate=True)


def _dedupe(points: np.ndarray) -> np.ndarray:
    keys = np.round(points / DEDUP_TOL)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]
