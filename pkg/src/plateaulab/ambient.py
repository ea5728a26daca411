"""Convex ambient regions with nearest-point retractions.

Restricted to convex boxes and balls in R^n: the nearest-point map is a
1-Lipschitz retraction defined on all of R^n, so the localizable
retraction constant is 1 and the retraction radius is unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AmbientSpace"]


@dataclass(frozen=True)
class AmbientSpace:
    kind: str                    # "box" or "ball"
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float = 0.0

    @classmethod
    def box(cls, lo, hi) -> "AmbientSpace":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if np.any(hi <= lo):
            raise ValueError("degenerate box")
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "AmbientSpace":
        if radius <= 0:
            raise ValueError("degenerate ball")
        return cls("ball", center=np.asarray(center, dtype=float),
                   radius=float(radius))

    @property
    def n(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    @property
    def kappa(self) -> float:
        """Lipschitz constant of the localizable retraction (1: convex)."""
        return 1.0

    def retraction_radius(self, p) -> float:
        """Radius below which the localized retraction exists; unbounded
        for convex regions."""
        return float("inf")

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def retract(self, points) -> np.ndarray:
        """Nearest-point projection, vectorized over rows."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "box":
            return np.clip(pts, self.lo, self.hi)
        d = pts - self.center
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))
        return self.center + d * scale

    def interior_point(self) -> np.ndarray:
        if self.kind == "box":
            return 0.5 * (self.lo + self.hi)
        return self.center.copy()
